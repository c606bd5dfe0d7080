#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "oracles.hpp"
#include <json.hpp>

#include "wadiro/experiment.hpp"

using namespace wadiro;

TEST_CASE("error metrics") {
  Eigen::VectorXd y(2), yhat(2);
  y << 0, 2;
  yhat << 1, 1;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  auto row = metrics(y, yhat, x);
  CHECK(row.mae == doctest::Approx(1.0));
  CHECK(row.rmse == doctest::Approx(1.0));
  CHECK(row.violations == 0);

  auto perfect = metrics(y, y, x);
  CHECK(perfect.mae == doctest::Approx(0.0));
  CHECK(perfect.rmse == doctest::Approx(0.0));

  Eigen::VectorXd pred(2);
  pred << -0.5, 3.0;
  auto constrained = metrics(y, pred, x, nonnegativity_constraints(2));
  CHECK(constrained.violations == 1);

  Eigen::VectorXd shorter(1);
  CHECK_THROWS_AS(metrics(y, shorter, x), std::invalid_argument);
}

TEST_CASE("spearman correlation endpoints") {
  CHECK(spearman_correlation({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman_correlation({1, 2, 3, 4}, {9, 7, 5, 3}) == doctest::Approx(-1.0));
  CHECK(std::abs(spearman_correlation({1, 2, 3, 4, 5, 6, 7, 8},
                                      {2, 1, 4, 3, 6, 5, 8, 7})) < 1.0);
}

TEST_CASE("synthetic load profile matches the schema") {
  const auto data = synthetic_load_dataset(24 * 14, 5);
  CHECK(data.dim() == 8);
  CHECK(data.size() == 24 * 14);
  CHECK(data.labels.minCoeff() >= 0.0);
  CHECK(data.feature_names[4] == "weekend");
  for (Eigen::Index t = 0; t < data.size(); ++t) {
    CHECK(data.features(t, 0) >= 0.0);  // cyclical encodings in [0,1]
    CHECK(data.features(t, 0) <= 1.0);
    CHECK((data.features(t, 4) == 0.0 || data.features(t, 4) == 1.0));
  }
  const auto again = synthetic_load_dataset(24 * 14, 5);
  CHECK(again.features == data.features);
  CHECK(again.labels == data.labels);
}

namespace {

ExperimentConfig small_config(const std::filesystem::path& out) {
  ExperimentConfig cfg;
  cfg.dataset_kind = "benchmark";
  cfg.benchmark.function = BenchmarkFunction::mccormick;
  cfg.benchmark.dim = 2;
  cfg.benchmark.n_samples = 120;
  cfg.benchmark.seed = 3;
  cfg.corruption.outlier_fraction = 0.1;
  cfg.corruption.noise_sigma = 0.5;
  cfg.corruption.outlier_split = OutlierSplit::train_val_random;
  cfg.corruption.generator.phi = 0.02;
  cfg.corruption.generator.projections = 32;
  cfg.trials = 3;
  cfg.seed = 11;
  cfg.output_dir = out;

  ModelTemplate robust;
  robust.name = "wadiro";
  robust.program = Program::wadiro_l1;
  robust.neurons_lo = 4;
  robust.neurons_hi = 6;
  ModelTemplate plain;
  plain.name = "scnn";
  plain.program = Program::scnn_l1;
  plain.neurons_lo = 4;
  plain.neurons_hi = 6;
  cfg.models = {robust, plain};
  return cfg;
}

}  // namespace

TEST_CASE("random search is seeded and selects the argmin") {
  const auto data = sample_benchmark(
      BenchmarkSpec{BenchmarkFunction::mccormick, 2, 150, 2});
  CorruptionSpec clean;
  auto splits = corrupt_and_split(data, clean, {0.6, 0.2, 0.2}, 1);

  ModelTemplate tmpl;
  tmpl.program = Program::wadiro_l1;
  tmpl.neurons_lo = 4;
  tmpl.neurons_hi = 6;
  auto a = random_search(splits.train, splits.val, tmpl, 4, 9);
  auto b = random_search(splits.train, splits.val, tmpl, 4, 9);
  CHECK(a.best_trial == b.best_trial);
  REQUIRE(a.trials.size() == 4);
  for (std::size_t t = 0; t < 4; ++t)
    CHECK(a.trials[t].to_json_line("m") == b.trials[t].to_json_line("m"));
  for (const auto& trial : a.trials)
    if (!std::isnan(trial.val_mae)) CHECK(a.best_val_mae <= trial.val_mae + 1e-15);

  auto single = random_search(splits.train, splits.val, tmpl, 1, 9);
  CHECK(single.best_trial == 0);
}

TEST_CASE("experiment pipeline is reproducible and leak-free") {
  const auto dir = std::filesystem::temp_directory_path() / "wadiro_experiment_test";
  std::filesystem::remove_all(dir);
  auto cfg = small_config(dir);
  const auto result = run_experiment(cfg);
  REQUIRE(result.models.size() == 2);

  // Rerun: byte-identical canonical report.
  const auto rerun = run_experiment(cfg);
  CHECK(result.report_json == rerun.report_json);

  // Artifacts on disk.
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "normalized_errors.csv"));
  CHECK(std::filesystem::exists(dir / "wadiro.trials.jsonl"));
  CHECK(std::filesystem::exists(dir / "wadiro.model.json"));
  CHECK(std::filesystem::exists(dir / "timings.csv"));

  // Normalized columns map the extremes to 0 and 1.
  std::vector<double> maes;
  for (const auto& m : result.models) maes.push_back(m.test_metrics.mae);
  const auto report = nlohmann::json::parse(result.report_json);
  const auto& norm = report.at("normalized_test_mae");
  double lo = 1e300, hi = -1e300;
  for (double v : maes) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (std::size_t i = 0; i < maes.size(); ++i) {
    const double nv = norm[i].template get<double>();
    if (maes[i] == lo) CHECK(nv == doctest::Approx(0.0));
    if (maes[i] == hi) CHECK(nv == doctest::Approx(1.0));
  }

  // No test leakage: test-row fingerprints never appear in train/val.
  const auto data = load_experiment_dataset(cfg);
  auto splits = corrupt_and_split(data, cfg.corruption, cfg.ratios, cfg.seed,
                                  experiment_inlier_sampler(cfg));
  auto key = [](const Dataset& ds, Eigen::Index j) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < ds.dim(); ++c) row.push_back(ds.features(j, c));
    row.push_back(ds.labels[j]);
    return row;
  };
  std::set<std::vector<double>> test_rows;
  for (Eigen::Index j = 0; j < splits.test.size(); ++j) test_rows.insert(key(splits.test, j));
  for (const Dataset* split : {&splits.train, &splits.val})
    for (Eigen::Index j = 0; j < split->size(); ++j)
      CHECK(test_rows.count(key(*split, j)) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stability grid emits one cell per combination") {
  const auto dir = std::filesystem::temp_directory_path() / "wadiro_grid_test";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg;
  cfg.dataset_kind = "benchmark";
  cfg.benchmark.function = BenchmarkFunction::mccormick;
  cfg.benchmark.dim = 2;
  cfg.benchmark.n_samples = 80;
  cfg.benchmark.seed = 6;
  cfg.trials = 1;
  cfg.seed = 4;
  cfg.output_dir = dir;
  ModelTemplate tmpl;
  tmpl.name = "wadiro";
  tmpl.program = Program::wadiro_l1;
  tmpl.neurons_lo = 3;
  tmpl.neurons_hi = 3;
  cfg.models = {tmpl};
  cfg.stability_grid = true;
  cfg.grid_neurons = {2, 4};
  cfg.grid_strengths = {1e-3, 1e-1};
  cfg.grid_eps = 0.1;
  const auto result = run_experiment(cfg);
  REQUIRE(result.grid.size() == 4);
  for (const auto& cell : result.grid) {
    CHECK(cell.l_eps >= 0.0);
    CHECK(cell.test_mae > 0.0);
  }
  CHECK(std::filesystem::exists(dir / "stability_grid.csv"));
  std::filesystem::remove_all(dir);
}
