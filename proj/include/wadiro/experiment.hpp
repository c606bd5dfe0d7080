#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "wadiro/model.hpp"
#include "wadiro/robustness.hpp"
#include "wadiro/train.hpp"

namespace wadiro {

struct MetricsRow {
  double mae = 0.0;
  double rmse = 0.0;
  int violations = 0;
};

/// MAE, RMSE and constraint-violation count in the units of the inputs.
MetricsRow metrics(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred,
                   const Eigen::MatrixXd& features,
                   const std::optional<PhysicsConstraints>& constraints = std::nullopt);

/// Spearman rank correlation; NaN-free inputs of equal length >= 2.
double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b);

/// Synthetic hourly load profile with the cyclical calendar encoding,
/// weekend/holiday flag and weather columns; labels are nonnegative
/// consumption values. Stands in for proprietary building telemetry.
Dataset synthetic_load_dataset(int hours, std::uint64_t seed);

/// Nonnegativity constraints (y >= 0) for every sample of a split.
PhysicsConstraints nonnegativity_constraints(Eigen::Index n);

// --- hyperparameter search --------------------------------------------

struct HyperRange {
  double log_lo = -8.0;  // log-uniform over [e^-8, e^1]
  double log_hi = 1.0;
};

struct ModelTemplate {
  std::string name = "wadiro_l1";
  Program program = Program::wadiro_l1;
  HyperRange strength;  // epsilon or lambda, by program
  int neurons_lo = 10;
  int neurons_hi = 40;
  bool with_bias = true;
  bool tune_norm = false;  // wadiro_linreg: sample the metric norm too
  bool nonneg_constraint = false;
};

struct TrialRecord {
  int trial = 0;
  TrainConfig config;
  double train_mae = 0.0;
  double val_mae = 0.0;
  std::string solver_status;
  int iterations = 0;
  double objective_value = 0.0;
  std::string to_json_line(const std::string& model_name) const;
};

struct SearchOutcome {
  TrainConfig best_config;
  double best_val_mae = 0.0;
  int best_trial = -1;
  std::vector<TrialRecord> trials;
};

/// Seeded i.i.d. draws from the template's ranges; selects the best
/// trial by validation MAE. Throws when every trial fails to solve.
SearchOutcome random_search(const Dataset& train, const Dataset& val,
                            const ModelTemplate& tmpl, int trials, std::uint64_t seed,
                            double solver_tol = 1e-8);

// --- experiment orchestration -----------------------------------------

struct ExperimentConfig {
  std::string dataset_kind = "benchmark";  // benchmark | csv | synthetic_load
  BenchmarkSpec benchmark;
  std::filesystem::path csv_path;
  int synthetic_hours = 1000;
  CorruptionSpec corruption;
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
  std::vector<ModelTemplate> models;
  int trials = 40;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  double solver_tol = 1e-8;

  // Optional stability-grid study (neuron budget x regularization).
  bool stability_grid = false;
  std::vector<int> grid_neurons;
  std::vector<double> grid_strengths;
  double grid_box_halfwidth = 2.0;  // standardized units
  double grid_eps = 0.1;

  void validate() const;
};

struct ModelOutcome {
  std::string name;
  TrainConfig best_config;
  double best_val_mae = 0.0;
  MetricsRow train_metrics;
  MetricsRow val_metrics;
  MetricsRow test_metrics;
  std::filesystem::path model_file;
  std::vector<TrialRecord> trials;
  double wall_time = 0.0;
};

struct GridCell {
  int neurons = 0;
  double strength = 0.0;
  double test_mae = 0.0;
  double l_eps = 0.0;
};

struct ExperimentResult {
  std::vector<ModelOutcome> models;
  int injected_outliers = 0;
  std::vector<GridCell> grid;  // stability study cells, when enabled
  std::string report_json;     // canonical, timing-free
};

/// sample -> corrupt -> split -> search -> final test pipeline; writes
/// report.json, normalized_errors.csv, per-model files, trial logs and
/// timings.csv under output_dir (when set).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Loads/creates the configured dataset (before corruption).
Dataset load_experiment_dataset(const ExperimentConfig& cfg);

/// Fresh-inlier sampler matching the configured data source, used by
/// the outlier generator to equalize sample counts.
InlierSampler experiment_inlier_sampler(const ExperimentConfig& cfg);

}  // namespace wadiro
