#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>

#include "wadiro/core.hpp"
#include "wadiro/train.hpp"

namespace wadiro {

/// Training provenance embedded in every model file.
struct Provenance {
  std::string program = "scnn_l1";
  double epsilon = 0.0;
  double lambda = 0.0;
  std::string norm = "l1";
  int max_neurons = 0;
  int effective_patterns = 0;
  bool penalize_bias = false;
  std::uint64_t seed = 0;
  double solver_tol = 1e-8;
  std::string solver_status = "optimal";
  double objective_value = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  double wall_time = 0.0;
  // The fixed -1 label slot (and the bias unless penalize_bias) stays
  // outside the dual-norm constraints.
  std::string dual_norm_scope = "trainable-only";
  double zero_block_threshold = 1e-9;
};

Provenance make_provenance(const TrainConfig& cfg, const SolveReport& report,
                           int effective_patterns);

/// Trained-model artifact. Prediction runs in the SCNN (indicator) form
/// with the stored sampling set; inputs and outputs are in original
/// units, standardization is applied internally.
struct ScnnModel {
  RawWeights raw;
  SamplingSet sampling;
  ScalerState scaler;
  bool with_bias = false;
  Provenance provenance;
  int schema_version = 1;

  Eigen::Index dim() const { return raw.dim(); }
  Eigen::Index pattern_count() const { return raw.pattern_count(); }
};

inline constexpr int kModelSchemaVersion = 1;

double predict(const ScnnModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd predict_batch(const ScnnModel& model, const Eigen::MatrixXd& features);

/// Prediction in standardized units from a standardized input; the
/// stability certifier works on this scale.
double predict_standardized(const ScnnModel& model, const Eigen::VectorXd& x_std);

/// Two-layer ReLU network weights recovered from the convex solution.
/// The output bias is carried over verbatim (zero when absent).
struct SnnWeights {
  Eigen::MatrixXd w1;  // m x d
  Eigen::VectorXd w2;  // m
  double bias = 0.0;

  Eigen::Index neuron_count() const { return w1.rows(); }
};

/// Per nonzero block: nu_i -> (nu_i/sqrt(||nu_i||), sqrt(||nu_i||)),
/// omega_i -> (omega_i/sqrt(||omega_i||), -sqrt(||omega_i||)). Blocks
/// with norm below the threshold emit no neuron.
SnnWeights map_to_snn(const ScnnModel& model, double zero_threshold = 1e-9);

/// sum_i max(x' W1_i, 0) w2_i (+ bias); standardized units.
double predict_snn(const SnnWeights& weights, const Eigen::VectorXd& x_std);

/// Fraction of inputs (standardized) where some nonzero weight block
/// sees its ReLU gate sign(x' nu_i) disagree with the stored indicator
/// gate 1(x' s_i >= 0). Diagnostic only; prediction always follows the
/// indicator form.
double gate_disagreement_rate(const ScnnModel& model, const Eigen::MatrixXd& inputs_std,
                              double zero_threshold = 1e-9);

/// Canonical versioned JSON; two saves of the same model are
/// byte-identical.
void save_model(const ScnnModel& model, const std::filesystem::path& path);
ScnnModel load_model(const std::filesystem::path& path);

std::string model_to_json(const ScnnModel& model);
ScnnModel model_from_json(const std::string& text);

}  // namespace wadiro
