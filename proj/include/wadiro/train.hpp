#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wadiro/conic.hpp"
#include "wadiro/core.hpp"

namespace wadiro {

enum class Program {
  scnn_l1,        // plain l1-loss SCNN
  scnn_lasso,     // + lambda * ||beta||_1
  scnn_ridge,     // + lambda * ||beta||_2^2
  wadiro_l1,      // epsilon-ball under W_{||.||_1,1}: dual norm inf
  wadiro_l2,      // epsilon-ball under W_{||.||_2,1}: dual norm l2
  wadiro_linreg,  // distributionally robust regression on raw features
};

std::string to_string(Program program);
Program program_from_string(const std::string& name);

enum class WassersteinNorm { l1, l2 };

/// Hard convex constraints on the training predictions. Bounds and
/// ramping limits use +/-inf for absent entries; all values live in the
/// units of the dataset handed to train().
struct PhysicsConstraints {
  Eigen::VectorXd lower;    // size N or empty; -inf marks no bound
  Eigen::VectorXd upper;    // size N or empty; +inf marks no bound
  Eigen::VectorXd ramping;  // size N-1 or empty; entry k bounds |yhat_{k+1} - yhat_k|

  struct LinearRow {
    std::vector<std::pair<Eigen::Index, double>> prediction_terms;         // gamma_i
    std::vector<std::pair<Eigen::Index, Eigen::VectorXd>> feature_terms;   // eta_i
    double lower;
    double upper;
  };
  std::vector<LinearRow> linear_rows;

  bool empty() const;
  void validate(Eigen::Index n, Eigen::Index d) const;

  /// Count of predictions violating any constraint beyond tol.
  int count_violations(const Eigen::MatrixXd& features, const Eigen::VectorXd& predictions,
                       double tol = 1e-6) const;
};

/// Rewrites constraints stated in original units into the standardized
/// units used during training.
PhysicsConstraints standardize_constraints(const PhysicsConstraints& constraints,
                                           const ScalerState& scaler);

struct TrainConfig {
  Program program = Program::scnn_l1;
  double epsilon = 0.0;  // Wasserstein ball radius
  double lambda = 0.0;   // lasso / ridge weight
  WassersteinNorm norm = WassersteinNorm::l1;  // wadiro_linreg metric norm
  int max_neurons = 16;  // pattern budget P before dedup
  bool with_bias = false;
  bool penalize_bias = false;  // include the bias in the dual-norm / regularizer
  std::optional<PhysicsConstraints> physics;
  std::uint64_t seed = 0;
  double solver_tol = 1e-8;
  int solver_max_iterations = 200;

  void validate() const;
};

/// Optimal cone-constrained weight pair. beta() is the regression
/// vector (vec(nu), vec(-omega), [b,] -1) with the fixed label slot.
struct RawWeights {
  Eigen::MatrixXd nu;     // P x d
  Eigen::MatrixXd omega;  // P x d
  std::optional<double> bias;

  Eigen::Index pattern_count() const { return nu.rows(); }
  Eigen::Index dim() const { return nu.cols(); }

  Eigen::VectorXd beta() const;
  Eigen::VectorXd beta_trainable(bool penalize_bias) const;
  double dual_norm(Program program, bool penalize_bias) const;
};

/// Solves the configured training program on an (already standardized)
/// dataset with a fixed sampling set. Infeasible physics constraints
/// surface as SolveStatus::infeasible with zero weights.
std::pair<RawWeights, SolveReport> train(const Dataset& dataset, const SamplingSet& s,
                                         const TrainConfig& cfg);

/// WaDiRo linear regression baseline on raw features. Returns the
/// weight vector (w, [b]).
std::pair<Eigen::VectorXd, SolveReport> train_wadiro_linreg(const Dataset& dataset,
                                                            const TrainConfig& cfg);

/// Decoupled objective (1/N) sum_j |beta' zhat_j| plus the configured
/// regularization term, evaluated directly from lifted rows. Used as an
/// independent check of solver objectives.
double objective_oracle(const Dataset& dataset, const SamplingSet& s,
                        const RawWeights& weights, const TrainConfig& cfg);

/// Indicator-form training predictions yhat_j = sum_i d_ji x_j'(nu_i - omega_i) (+b).
Eigen::VectorXd training_predictions(const Dataset& dataset, const SamplingSet& s,
                                     const RawWeights& weights);

Eigen::VectorXd linreg_predictions(const Dataset& dataset, const Eigen::VectorXd& weights,
                                   bool with_bias);

/// Elementwise slack of the cone constraints (2D_i - I) X nu_i >= 0 and
/// the same for omega; the most negative value over all gates/samples.
double cone_feasibility_margin(const Dataset& dataset, const SamplingSet& s,
                               const RawWeights& weights);

}  // namespace wadiro
