#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace wadiro {

enum class SplitTag { train, val, test, unsplit };

std::string to_string(SplitTag tag);

/// Feature matrix plus one-dimensional labels. Immutable by convention:
/// every operation returns a new Dataset instead of mutating in place.
struct Dataset {
  Eigen::MatrixXd features;  // N x d
  Eigen::VectorXd labels;    // N
  std::vector<std::string> feature_names;  // empty when unnamed
  SplitTag split_tag = SplitTag::unsplit;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }

  // Throws std::invalid_argument on shape mismatch, empty data or
  // non-finite entries.
  void validate() const;
};

enum class SamplingDistribution { gaussian };

/// The fixed vectors that generate activation patterns. Persisted with
/// every trained model; predictions are undefined without them.
struct SamplingSet {
  Eigen::MatrixXd vectors;  // P x d, one sampling vector per row
  std::uint64_t seed = 0;
  SamplingDistribution distribution = SamplingDistribution::gaussian;
  Eigen::VectorXd mean;   // d, gaussian location (default 0)
  Eigen::VectorXd sigma;  // d, diagonal scale (default 1)
  bool dedup_applied = false;

  Eigen::Index count() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

/// N x P binary matrix, bit (j,i) = 1 iff sample j activates gate i.
/// Rows are packed into 64-bit words.
class ActivationPatterns {
 public:
  ActivationPatterns() = default;
  ActivationPatterns(Eigen::Index rows, Eigen::Index cols);

  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  bool bit(Eigen::Index j, Eigen::Index i) const {
    return (words_[static_cast<std::size_t>(j) * words_per_row_ +
                   static_cast<std::size_t>(i) / 64] >>
            (static_cast<std::size_t>(i) % 64)) &
           1u;
  }
  void set_bit(Eigen::Index j, Eigen::Index i, bool value);

  // Column i as a packed bit vector (used as a dedup key).
  std::vector<std::uint64_t> column_key(Eigen::Index i) const;
  bool columns_equal(Eigen::Index a, Eigen::Index b) const;

  bool operator==(const ActivationPatterns& other) const;

  const std::vector<std::uint64_t>& words() const { return words_; }

 private:
  Eigen::Index rows_ = 0;
  Eigen::Index cols_ = 0;
  std::size_t words_per_row_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Rows are the modified samples (vec(x d^T), vec(x d^T), [1,] y).
struct LiftedDataset {
  Eigen::MatrixXd lifted;  // N x (2Pd [+1] +1)
  bool with_bias = false;
  Eigen::Index feature_dim = 0;    // d
  Eigen::Index pattern_count = 0;  // P
};

/// Column means and population standard deviations for the features and
/// the label (last slot). Constant columns store stdev 1.
struct ScalerState {
  Eigen::VectorXd means;   // d+1
  Eigen::VectorXd stdevs;  // d+1, strictly positive

  bool fitted() const { return means.size() > 0; }
};

enum class ScaleMode { fit_transform, transform, inverse };

// --- Operations ------------------------------------------------------

/// Draws `count` gaussian sampling vectors. With dedup, vectors that
/// induce an activation column already produced by an earlier vector on
/// this dataset are dropped (first occurrence kept), so the result may
/// hold fewer than `count` rows. Deterministic for a fixed seed.
SamplingSet gen_sampling_vectors(const Dataset& dataset, int count, std::uint64_t seed,
                                 bool dedup);

/// Oversamples until `stall_limit` consecutive draws add no new pattern
/// (bounded by `hard_cap` vectors). Approximates exhausting the
/// arrangement without enumerating it.
SamplingSet gen_sampling_vectors_saturating(const Dataset& dataset, std::uint64_t seed,
                                            int stall_limit = 1000, int hard_cap = 4096);

/// bits[j][i] = 1(x_j . s_i >= 0); a zero inner product counts as active.
ActivationPatterns compute_patterns(const Dataset& dataset, const SamplingSet& s);

// Reference kernel, single-threaded. compute_patterns must agree bit for bit.
ActivationPatterns compute_patterns_serial(const Dataset& dataset, const SamplingSet& s);

/// Activation bits of a single input against every sampling vector.
std::vector<bool> activation_bits(const Eigen::VectorXd& x, const SamplingSet& s);

/// Lifts one sample to (vec(x d^T), vec(x d^T), [1,] y). vec is
/// column-major: block i holds x when gate i is active, zeros otherwise.
Eigen::VectorXd lift_sample(const Eigen::VectorXd& x, double y, const SamplingSet& s,
                            bool with_bias);

LiftedDataset lift_dataset(const Dataset& dataset, const SamplingSet& s, bool with_bias);
LiftedDataset lift_dataset_serial(const Dataset& dataset, const SamplingSet& s,
                                  bool with_bias);

/// Standardizes features and label to zero mean, unit population
/// variance. transform/inverse require a fitted state.
std::pair<Dataset, ScalerState> standardize(const Dataset& dataset,
                                            std::optional<ScalerState> state,
                                            ScaleMode mode);

Eigen::VectorXd scale_features(const Eigen::VectorXd& x, const ScalerState& state);
double scale_label(double y, const ScalerState& state);
double unscale_label(double y_scaled, const ScalerState& state);

}  // namespace wadiro
