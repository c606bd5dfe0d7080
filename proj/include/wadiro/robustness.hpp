#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "wadiro/core.hpp"
#include "wadiro/errors.hpp"

namespace wadiro {

/// Order-1 Wasserstein distance between two equal-weight 1-D samples:
/// mean absolute difference of the sorted sequences.
double w1_1d(std::vector<double> u, std::vector<double> v);

/// Monte Carlo sliced-Wasserstein distance (order 1) between two
/// equal-count point sets, averaging w1_1d over `projections` uniform
/// directions on the unit sphere. Deterministic per seed.
double sw_distance(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, int projections,
                   std::uint64_t seed);
double sw_distance_serial(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, int projections,
                          std::uint64_t seed);

/// The projection directions used by sw_distance for a given seed.
Eigen::MatrixXd sw_projections(Eigen::Index dim, int projections, std::uint64_t seed);

// --- benchmark functions ----------------------------------------------

enum class BenchmarkFunction { mccormick, pgp, keane, ackley };

std::string to_string(BenchmarkFunction function);
BenchmarkFunction benchmark_from_string(const std::string& name);

struct BenchmarkSpec {
  BenchmarkFunction function = BenchmarkFunction::ackley;
  int dim = 4;  // fixed at 2 for mccormick/pgp
  int n_samples = 2000;
  std::uint64_t seed = 0;

  void validate() const;
  std::pair<Eigen::VectorXd, Eigen::VectorXd> domain() const;  // lo, hi
};

double benchmark_eval(const BenchmarkSpec& spec, const Eigen::VectorXd& x);

/// Uniform i.i.d. draws over the canonical box, labels by evaluation.
Dataset sample_benchmark(const BenchmarkSpec& spec);

// --- outlier generation -----------------------------------------------

enum class OutlierProposal { uniform_box, gaussian_tail };

struct OutlierGenConfig {
  int m_bar = 0;        // outliers to generate
  double phi = 0.1;     // minimum sliced-Wasserstein shift per outlier
  int projections = 64; // Monte Carlo directions
  OutlierProposal proposal = OutlierProposal::uniform_box;
  double proposal_scale = 1.5;  // box multiplier / tail scale
  int max_rejects = 20000;      // per outlier
  std::uint64_t seed = 0;

  void validate() const;
};

struct OutlierAudit {
  std::vector<double> shifts;      // achieved SW shift per accepted outlier
  std::vector<int> rejections;     // proposals rejected before acceptance
};

/// Carries the accepted prefix when the rejection budget runs out.
class OutlierBudgetError : public PartialResultError {
 public:
  OutlierBudgetError(Dataset accepted_, OutlierAudit audit_, std::size_t requested)
      : PartialResultError("outlier generation exhausted its rejection budget",
                           static_cast<std::size_t>(accepted_.features.rows()), requested),
        accepted(std::move(accepted_)),
        audit(std::move(audit_)) {}
  Dataset accepted;
  OutlierAudit audit;
};

/// Fresh-inlier source used to equalize sample counts in the acceptance
/// test; absent, a seeded duplicate of a base point is used instead.
using InlierSampler = std::function<Eigen::VectorXd(std::mt19937_64&)>;  // returns (x, y)

std::pair<Dataset, OutlierAudit> generate_outliers(const Dataset& base,
                                                   const OutlierGenConfig& cfg,
                                                   const InlierSampler& fresh_inlier = {});

// --- corruption pipeline ----------------------------------------------

enum class OutlierSplit { train_only, train_val_random };

struct CorruptionSpec {
  double outlier_fraction = 0.0;  // in [0, 1)
  double noise_sigma = 0.0;       // gaussian label noise
  bool noise_train = true;
  bool noise_val = true;
  bool noise_test = false;  // the test split is never corrupted
  OutlierSplit outlier_split = OutlierSplit::train_only;
  OutlierGenConfig generator;

  void validate() const;
};

struct CorruptedSplits {
  Dataset train;
  Dataset val;
  Dataset test;
  int injected_outliers = 0;
  OutlierAudit audit;
};

/// Splits first, adds label noise to the flagged splits, then injects
/// round(fraction x split size) generated outliers. Test rows stay
/// bit-identical to their clean originals.
CorruptedSplits corrupt_and_split(const Dataset& data, const CorruptionSpec& corr,
                                  std::array<double, 3> ratios, std::uint64_t seed,
                                  const InlierSampler& fresh_inlier = {});

}  // namespace wadiro
