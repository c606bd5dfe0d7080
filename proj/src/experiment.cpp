#include "wadiro/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "wadiro/guarantees.hpp"
#include "wadiro/io.hpp"

namespace wadiro {

using nlohmann::json;

MetricsRow metrics(const Eigen::VectorXd& y_true, const Eigen::VectorXd& y_pred,
                   const Eigen::MatrixXd& features,
                   const std::optional<PhysicsConstraints>& constraints) {
  if (y_true.size() != y_pred.size()) throw std::invalid_argument("metrics: length mismatch");
  if (y_true.size() == 0) throw std::invalid_argument("metrics: empty inputs");
  MetricsRow row;
  row.mae = (y_true - y_pred).cwiseAbs().mean();
  row.rmse = std::sqrt((y_true - y_pred).array().square().mean());
  if (constraints && !constraints->empty())
    row.violations = constraints->count_violations(features, y_pred);
  return row;
}

double spearman_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("spearman: need two equal-length samples");
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double shared = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank for ties
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = shared;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += ra[i];
    mean_b += rb[i];
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (ra[i] - mean_a) * (rb[i] - mean_b);
    va += (ra[i] - mean_a) * (ra[i] - mean_a);
    vb += (rb[i] - mean_b) * (rb[i] - mean_b);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

Dataset synthetic_load_dataset(int hours, std::uint64_t seed) {
  if (hours < 1) throw std::invalid_argument("synthetic load: need at least one hour");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Dataset out;
  out.features.resize(hours, 8);
  out.labels.resize(hours);
  out.feature_names = {"dow_cos", "dow_sin", "hour_cos", "hour_sin",
                       "weekend",  "temp",    "irradiance", "wind"};
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int t = 0; t < hours; ++t) {
    const int day = (t / 24) % 7;
    const int hour = t % 24;
    const bool weekend = day >= 5 || unif(rng) < 0.02;  // weekends plus holidays
    const double season = std::sin(two_pi * static_cast<double>(t) / (24.0 * 365.0));
    const double temp = 8.0 + 14.0 * season + 5.0 * std::sin(two_pi * hour / 24.0 - 2.0) +
                        2.0 * noise(rng);
    const double daylight = std::max(0.0, std::sin(two_pi * (hour - 6.0) / 24.0));
    const double irr = std::max(0.0, 800.0 * daylight * (0.4 + 0.6 * unif(rng)));
    const double wind = std::abs(3.0 + 2.0 * noise(rng));

    out.features(t, 0) = 0.5 + 0.5 * std::cos(two_pi * day / 7.0);
    out.features(t, 1) = 0.5 + 0.5 * std::sin(two_pi * day / 7.0);
    out.features(t, 2) = 0.5 + 0.5 * std::cos(two_pi * hour / 24.0);
    out.features(t, 3) = 0.5 + 0.5 * std::sin(two_pi * hour / 24.0);
    out.features(t, 4) = weekend ? 1.0 : 0.0;
    out.features(t, 5) = temp;
    out.features(t, 6) = irr;
    out.features(t, 7) = wind;

    const double occupancy =
        weekend ? 0.15 : std::max(0.0, std::sin(two_pi * (hour - 3.0) / 24.0));
    const double heating = std::max(0.0, 15.0 - temp) * 0.35;
    const double cooling = std::max(0.0, temp - 22.0) * 0.5;
    const double load =
        0.4 + 6.0 * occupancy + heating + cooling - 0.002 * irr + 1.2 * noise(rng);
    out.labels[t] = std::max(0.0, load);
  }
  return out;
}

PhysicsConstraints nonnegativity_constraints(Eigen::Index n) {
  PhysicsConstraints physics;
  physics.lower = Eigen::VectorXd::Zero(n);
  physics.upper = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  return physics;
}

std::string TrialRecord::to_json_line(const std::string& model_name) const {
  json j;
  j["model"] = model_name;
  j["trial"] = trial;
  j["program"] = to_string(config.program);
  j["epsilon"] = config.epsilon;
  j["lambda"] = config.lambda;
  j["norm"] = config.norm == WassersteinNorm::l1 ? "l1" : "l2";
  j["max_neurons"] = config.max_neurons;
  j["with_bias"] = config.with_bias;
  j["train_mae"] = train_mae;
  j["val_mae"] = val_mae;
  j["solver_status"] = solver_status;
  j["iterations"] = iterations;
  j["objective_value"] = objective_value;
  return j.dump();
}

namespace {

// One training trial shared by search and final fits: standardizes on
// the training split, trains, and returns the model plus split errors.
struct FittedModel {
  ScnnModel model;               // SCNN programs
  Eigen::VectorXd linreg;        // wadiro_linreg weights (original-unit pipeline below)
  bool is_linreg = false;
  ScalerState scaler;
  SolveReport report;
  bool with_bias = false;
};

FittedModel fit_once(const Dataset& train_split, const TrainConfig& cfg_in,
                     bool nonneg_constraint) {
  FittedModel out;
  TrainConfig cfg = cfg_in;
  auto [train_std, scaler] = standardize(train_split, std::nullopt, ScaleMode::fit_transform);
  out.scaler = scaler;
  out.with_bias = cfg.with_bias;
  if (nonneg_constraint)
    cfg.physics = standardize_constraints(nonnegativity_constraints(train_split.size()), scaler);

  if (cfg.program == Program::wadiro_linreg) {
    out.is_linreg = true;
    auto [w, report] = train_wadiro_linreg(train_std, cfg);
    out.linreg = w;
    out.report = report;
    // Reuse the model container so prediction code has one path.
    out.model.raw.nu = Eigen::MatrixXd::Zero(1, train_split.dim());
    out.model.raw.omega = Eigen::MatrixXd::Zero(1, train_split.dim());
    out.model.sampling.vectors = Eigen::MatrixXd::Zero(1, train_split.dim());
    out.model.scaler = scaler;
    return out;
  }

  auto s = gen_sampling_vectors(train_std, cfg.max_neurons, cfg.seed, true);
  auto [weights, report] = train(train_std, s, cfg);
  out.report = report;
  out.model.raw = weights;
  out.model.sampling = s;
  out.model.scaler = scaler;
  out.model.with_bias = cfg.with_bias;
  out.model.provenance = make_provenance(cfg, report, static_cast<int>(s.count()));
  return out;
}

Eigen::VectorXd predict_split(const FittedModel& fitted, const Dataset& split) {
  if (!fitted.is_linreg) return predict_batch(fitted.model, split.features);
  Eigen::VectorXd out(split.size());
  const Eigen::Index d = split.dim();
  for (Eigen::Index r = 0; r < split.size(); ++r) {
    const Eigen::VectorXd x_std = scale_features(split.features.row(r).transpose(), fitted.scaler);
    double pred = x_std.head(d).dot(fitted.linreg.head(d));
    if (fitted.with_bias && fitted.linreg.size() == d + 1) pred += fitted.linreg[d];
    out[r] = unscale_label(pred, fitted.scaler);
  }
  return out;
}

}  // namespace

SearchOutcome random_search(const Dataset& train, const Dataset& val,
                            const ModelTemplate& tmpl, int trials, std::uint64_t seed,
                            double solver_tol) {
  if (trials < 1) throw std::invalid_argument("random_search: trials must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  SearchOutcome outcome;
  outcome.best_val_mae = std::numeric_limits<double>::infinity();
  int failures = 0;
  for (int t = 0; t < trials; ++t) {
    TrainConfig cfg;
    cfg.program = tmpl.program;
    cfg.with_bias = tmpl.with_bias;
    cfg.solver_tol = solver_tol;
    cfg.seed = seed + static_cast<std::uint64_t>(t);
    const double strength =
        std::exp(tmpl.strength.log_lo + (tmpl.strength.log_hi - tmpl.strength.log_lo) * unif(rng));
    switch (tmpl.program) {
      case Program::wadiro_l1:
      case Program::wadiro_l2:
      case Program::wadiro_linreg:
        cfg.epsilon = strength;
        break;
      case Program::scnn_lasso:
      case Program::scnn_ridge:
        cfg.lambda = strength;
        break;
      case Program::scnn_l1:
        break;
    }
    const int span = std::max(1, tmpl.neurons_hi - tmpl.neurons_lo + 1);
    cfg.max_neurons = tmpl.neurons_lo + static_cast<int>(unif(rng) * span) % span;
    if (tmpl.tune_norm && tmpl.program == Program::wadiro_linreg)
      cfg.norm = unif(rng) < 0.5 ? WassersteinNorm::l1 : WassersteinNorm::l2;

    TrialRecord record;
    record.trial = t;
    record.config = cfg;
    try {
      const FittedModel fitted = fit_once(train, cfg, tmpl.nonneg_constraint);
      record.solver_status = to_string(fitted.report.status);
      record.iterations = fitted.report.iterations;
      record.objective_value = fitted.report.objective_value;
      if (fitted.report.status == SolveStatus::optimal ||
          fitted.report.status == SolveStatus::max_iter) {
        record.train_mae = metrics(train.labels, predict_split(fitted, train), train.features).mae;
        record.val_mae = metrics(val.labels, predict_split(fitted, val), val.features).mae;
        if (record.val_mae < outcome.best_val_mae) {
          outcome.best_val_mae = record.val_mae;
          outcome.best_config = cfg;
          outcome.best_trial = t;
        }
      } else {
        record.val_mae = std::numeric_limits<double>::quiet_NaN();
        ++failures;
      }
    } catch (const std::exception& e) {
      record.solver_status = std::string("error: ") + e.what();
      record.val_mae = std::numeric_limits<double>::quiet_NaN();
      ++failures;
    }
    outcome.trials.push_back(std::move(record));
  }
  if (outcome.best_trial < 0)
    throw std::runtime_error("random_search: every trial failed to solve");
  (void)failures;
  return outcome;
}

void ExperimentConfig::validate() const {
  if (trials < 1) throw std::invalid_argument("experiment: trials must be >= 1");
  if (models.empty() && !stability_grid)
    throw std::invalid_argument("experiment: no model templates configured");
  if (dataset_kind != "benchmark" && dataset_kind != "csv" && dataset_kind != "synthetic_load")
    throw std::invalid_argument("experiment: unknown dataset kind " + dataset_kind);
  if (dataset_kind == "csv" && csv_path.empty())
    throw std::invalid_argument("experiment: csv dataset requires a path");
  corruption.validate();
  if (stability_grid && (grid_neurons.empty() || grid_strengths.empty()))
    throw std::invalid_argument("experiment: stability grid needs neuron and strength lists");
}

Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset_kind == "benchmark") return sample_benchmark(cfg.benchmark);
  if (cfg.dataset_kind == "synthetic_load")
    return synthetic_load_dataset(cfg.synthetic_hours, cfg.seed);
  return read_csv(cfg.csv_path);
}

InlierSampler experiment_inlier_sampler(const ExperimentConfig& cfg) {
  if (cfg.dataset_kind == "benchmark") {
    BenchmarkSpec spec = cfg.benchmark;
    return [spec](std::mt19937_64& rng) {
      const auto [lo, hi] = spec.domain();
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      Eigen::VectorXd z(spec.dim + 1);
      for (int k = 0; k < spec.dim; ++k) z[k] = lo[k] + (hi[k] - lo[k]) * unif(rng);
      z[spec.dim] = benchmark_eval(spec, z.head(spec.dim));
      return z;
    };
  }
  return {};  // fall back to duplicating a base point
}

namespace {

json metrics_to_json(const MetricsRow& row) {
  return json{{"mae", row.mae}, {"rmse", row.rmse}, {"violations", row.violations}};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const bool emit = !cfg.output_dir.empty();
  if (emit) std::filesystem::create_directories(cfg.output_dir);

  const Dataset data = load_experiment_dataset(cfg);
  CorruptionSpec corruption = cfg.corruption;
  if (corruption.generator.phi <= 0.0) corruption.generator.phi = 0.1;
  const auto splits =
      corrupt_and_split(data, corruption, cfg.ratios, cfg.seed, experiment_inlier_sampler(cfg));

  ExperimentResult result;
  result.injected_outliers = splits.injected_outliers;

  std::ostringstream timings;
  timings << "stage,seconds\n";

  for (const auto& tmpl : cfg.models) {
    const auto t0 = std::chrono::steady_clock::now();
    ModelOutcome outcome;
    outcome.name = tmpl.name;
    auto search = random_search(splits.train, splits.val, tmpl, cfg.trials, cfg.seed,
                                cfg.solver_tol);
    outcome.best_config = search.best_config;
    outcome.best_val_mae = search.best_val_mae;
    outcome.trials = std::move(search.trials);

    const FittedModel fitted = fit_once(splits.train, outcome.best_config, tmpl.nonneg_constraint);
    const std::optional<PhysicsConstraints> test_constraints =
        tmpl.nonneg_constraint
            ? std::optional<PhysicsConstraints>(nonnegativity_constraints(splits.test.size()))
            : std::nullopt;
    outcome.train_metrics = metrics(splits.train.labels, predict_split(fitted, splits.train),
                                    splits.train.features);
    outcome.val_metrics =
        metrics(splits.val.labels, predict_split(fitted, splits.val), splits.val.features);
    outcome.test_metrics = metrics(splits.test.labels, predict_split(fitted, splits.test),
                                   splits.test.features, test_constraints);
    outcome.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (emit && !fitted.is_linreg) {
      outcome.model_file = cfg.output_dir / (tmpl.name + ".model.json");
      save_model(fitted.model, outcome.model_file);
    }
    if (emit) {
      std::ofstream log(cfg.output_dir / (tmpl.name + ".trials.jsonl"));
      for (const auto& record : outcome.trials) log << record.to_json_line(tmpl.name) << '\n';
    }
    timings << tmpl.name << "," << outcome.wall_time << "\n";
    result.models.push_back(std::move(outcome));
  }

  if (cfg.stability_grid) {
    const auto& tmpl = cfg.models.empty() ? ModelTemplate{} : cfg.models.front();
    for (int neurons : cfg.grid_neurons) {
      for (double strength : cfg.grid_strengths) {
        TrainConfig gcfg;
        gcfg.program = tmpl.program == Program::wadiro_linreg ? Program::wadiro_l1 : tmpl.program;
        gcfg.with_bias = tmpl.with_bias;
        gcfg.max_neurons = neurons;
        gcfg.seed = cfg.seed;  // fixed sampling seed across the grid
        gcfg.solver_tol = cfg.solver_tol;
        switch (gcfg.program) {
          case Program::scnn_lasso:
          case Program::scnn_ridge:
            gcfg.lambda = strength;
            break;
          default:
            gcfg.epsilon = strength;
            break;
        }
        const FittedModel fitted = fit_once(splits.train, gcfg, false);
        GridCell cell;
        cell.neurons = neurons;
        cell.strength = strength;
        cell.test_mae = metrics(splits.test.labels, predict_split(fitted, splits.test),
                                splits.test.features)
                            .mae;
        StabilityDomain domain;
        domain.lo = Eigen::VectorXd::Constant(data.dim(), -cfg.grid_box_halfwidth);
        domain.hi = Eigen::VectorXd::Constant(data.dim(), cfg.grid_box_halfwidth);
        domain.eps = cfg.grid_eps;
        cell.l_eps =
            certify_stability(fitted.model, domain, CertifyMode::branch_and_bound, 1e-7).l_eps;
        result.grid.push_back(cell);
      }
    }
    if (emit) {
      std::ofstream heat(cfg.output_dir / "stability_grid.csv");
      heat << "neurons,strength,test_mae,l_eps\n";
      heat.precision(17);
      for (const auto& cell : result.grid)
        heat << cell.neurons << "," << cell.strength << "," << cell.test_mae << ","
             << cell.l_eps << "\n";
    }
  }

  // Canonical report: deterministic for a fixed (config, seed); wall
  // times live in timings.csv instead.
  json report;
  report["seed"] = cfg.seed;
  report["dataset_kind"] = cfg.dataset_kind;
  report["injected_outliers"] = result.injected_outliers;
  json jmodels = json::array();
  for (const auto& outcome : result.models) {
    json jm;
    jm["name"] = outcome.name;
    jm["program"] = to_string(outcome.best_config.program);
    jm["epsilon"] = outcome.best_config.epsilon;
    jm["lambda"] = outcome.best_config.lambda;
    jm["max_neurons"] = outcome.best_config.max_neurons;
    jm["val_mae"] = outcome.best_val_mae;
    jm["train"] = metrics_to_json(outcome.train_metrics);
    jm["val"] = metrics_to_json(outcome.val_metrics);
    jm["test"] = metrics_to_json(outcome.test_metrics);
    jmodels.push_back(jm);
  }
  report["models"] = jmodels;

  // Min-max normalized errors across models (per metric).
  if (result.models.size() > 1) {
    auto normalize = [&](auto getter) {
      std::vector<double> values;
      for (const auto& m : result.models) values.push_back(getter(m));
      const double lo = *std::min_element(values.begin(), values.end());
      const double hi = *std::max_element(values.begin(), values.end());
      json out = json::array();
      for (double v : values) out.push_back(hi > lo ? (v - lo) / (hi - lo) : 0.0);
      return out;
    };
    report["normalized_test_mae"] =
        normalize([](const ModelOutcome& m) { return m.test_metrics.mae; });
    report["normalized_test_rmse"] =
        normalize([](const ModelOutcome& m) { return m.test_metrics.rmse; });
  }
  result.report_json = report.dump(2);

  if (emit) {
    std::ofstream(cfg.output_dir / "report.json") << result.report_json << '\n';
    std::ofstream(cfg.output_dir / "timings.csv") << timings.str();
    if (result.models.size() > 1) {
      std::ofstream norm(cfg.output_dir / "normalized_errors.csv");
      norm << "model,test_mae,test_rmse,norm_mae,norm_rmse\n";
      norm.precision(17);
      const auto& jm = report["normalized_test_mae"];
      const auto& jr = report["normalized_test_rmse"];
      for (std::size_t i = 0; i < result.models.size(); ++i)
        norm << result.models[i].name << "," << result.models[i].test_metrics.mae << ","
             << result.models[i].test_metrics.rmse << "," << jm[i].get<double>() << ","
             << jr[i].get<double>() << "\n";
    }
  }
  return result;
}

}  // namespace wadiro
