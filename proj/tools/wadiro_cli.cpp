// Command-line front end: train/predict/certify plus the data tooling
// (benchmark sampling, corruption, experiments, bound calculators).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wadiro/errors.hpp"
#include "wadiro/experiment.hpp"
#include "wadiro/guarantees.hpp"
#include "wadiro/io.hpp"
#include "wadiro/model.hpp"

using nlohmann::json;
using namespace wadiro;

namespace {

constexpr int kExitInvalidConfig = 2;
constexpr int kExitSolverFailure = 3;
constexpr int kExitPartialResult = 4;

json load_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  json j;
  in >> j;
  return j;
}

ModelTemplate template_from_json(const json& jm) {
  ModelTemplate tmpl;
  tmpl.name = jm.value("name", std::string("model"));
  tmpl.program = program_from_string(jm.value("program", std::string("wadiro_l1")));
  if (jm.contains("neurons")) {
    tmpl.neurons_lo = jm["neurons"][0].get<int>();
    tmpl.neurons_hi = jm["neurons"][1].get<int>();
  }
  if (jm.contains("log_strength")) {
    tmpl.strength.log_lo = jm["log_strength"][0].get<double>();
    tmpl.strength.log_hi = jm["log_strength"][1].get<double>();
  }
  tmpl.with_bias = jm.value("bias", true);
  tmpl.tune_norm = jm.value("tune_norm", false);
  tmpl.nonneg_constraint = jm.value("nonneg", false);
  return tmpl;
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  const auto& jd = j.at("dataset");
  cfg.dataset_kind = jd.value("kind", std::string("benchmark"));
  if (cfg.dataset_kind == "benchmark") {
    cfg.benchmark.function = benchmark_from_string(jd.value("function", std::string("ackley")));
    cfg.benchmark.dim = jd.value("dim", 4);
    cfg.benchmark.n_samples = jd.value("n", 1000);
    cfg.benchmark.seed = jd.value("seed", std::uint64_t{0});
  } else if (cfg.dataset_kind == "csv") {
    cfg.csv_path = jd.at("path").get<std::string>();
  } else if (cfg.dataset_kind == "synthetic_load") {
    cfg.synthetic_hours = jd.value("hours", 1000);
  }
  if (j.contains("corruption")) {
    const auto& jc = j["corruption"];
    cfg.corruption.outlier_fraction = jc.value("outlier_fraction", 0.0);
    cfg.corruption.noise_sigma = jc.value("noise_sigma", 0.0);
    const auto split = jc.value("outlier_split", std::string("train_only"));
    cfg.corruption.outlier_split =
        split == "train_val_random" ? OutlierSplit::train_val_random : OutlierSplit::train_only;
    cfg.corruption.generator.phi = jc.value("phi", 0.1);
    cfg.corruption.generator.projections = jc.value("projections", 64);
    cfg.corruption.generator.proposal_scale = jc.value("proposal_scale", 1.5);
    cfg.corruption.generator.max_rejects = jc.value("max_rejects", 20000);
  }
  for (const auto& jm : j.value("models", json::array())) cfg.models.push_back(template_from_json(jm));
  cfg.trials = j.value("trials", 40);
  cfg.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("ratios")) {
    cfg.ratios[0] = j["ratios"][0].get<double>();
    cfg.ratios[1] = j["ratios"][1].get<double>();
    cfg.ratios[2] = j["ratios"][2].get<double>();
  }
  cfg.solver_tol = j.value("solver_tol", 1e-8);
  if (j.contains("stability_grid")) {
    const auto& jg = j["stability_grid"];
    cfg.stability_grid = true;
    for (const auto& v : jg.at("neurons")) cfg.grid_neurons.push_back(v.get<int>());
    for (const auto& v : jg.at("strengths")) cfg.grid_strengths.push_back(v.get<double>());
    cfg.grid_eps = jg.value("eps", 0.1);
    cfg.grid_box_halfwidth = jg.value("box", 2.0);
  }
  return cfg;
}

json certificate_to_json(const StabilityCertificate& cert) {
  json j;
  j["l_eps"] = cert.l_eps;
  j["l_eps_original"] = cert.l_eps_original;
  j["argmax_x"] = std::vector<double>(cert.argmax_x.data(),
                                      cert.argmax_x.data() + cert.argmax_x.size());
  j["argmax_eps"] = std::vector<double>(cert.argmax_eps.data(),
                                        cert.argmax_eps.data() + cert.argmax_eps.size());
  j["gamma_bits"] = cert.gamma_bits;
  j["eta_bits"] = cert.eta_bits;
  j["zeta"] = cert.zeta;
  j["bound_gap"] = cert.bound_gap;
  j["nodes_explored"] = cert.nodes_explored;
  j["big_m_values"] = cert.big_m_values;
  return j;
}

int run_train(const std::string& data_path, const std::string& out_path,
              const std::string& program, double epsilon, double lambda,
              const std::string& norm, int neurons, bool bias, bool nonneg, double tol,
              std::uint64_t seed) {
  TrainConfig cfg;
  cfg.program = program_from_string(program);
  cfg.epsilon = epsilon;
  cfg.lambda = lambda;
  cfg.norm = norm == "l2" ? WassersteinNorm::l2 : WassersteinNorm::l1;
  cfg.max_neurons = neurons;
  cfg.with_bias = bias;
  cfg.seed = seed;
  cfg.solver_tol = tol;
  cfg.validate();
  if (cfg.program == Program::wadiro_linreg)
    throw std::invalid_argument("train: the linear baseline has no model-file form; "
                                "use the experiment pipeline");

  const Dataset data = read_csv(data_path);
  auto [std_data, scaler] = standardize(data, std::nullopt, ScaleMode::fit_transform);
  if (nonneg)
    cfg.physics = standardize_constraints(nonnegativity_constraints(data.size()), scaler);
  const auto s = gen_sampling_vectors(std_data, cfg.max_neurons, cfg.seed, true);
  auto [weights, report] = train(std_data, s, cfg);
  if (report.status != SolveStatus::optimal && report.status != SolveStatus::max_iter) {
    std::cerr << "training failed: " << to_string(report.status) << "\n";
    return kExitSolverFailure;
  }
  ScnnModel model;
  model.raw = weights;
  model.sampling = s;
  model.scaler = scaler;
  model.with_bias = cfg.with_bias;
  model.provenance = make_provenance(cfg, report, static_cast<int>(s.count()));
  save_model(model, out_path);
  std::cout << "status=" << to_string(report.status) << " objective=" << report.objective_value
            << " patterns=" << s.count() << " iterations=" << report.iterations << "\n";
  return 0;
}

int run_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_path) {
  const auto model = load_model(model_path);
  const auto data = read_csv(data_path);
  const Eigen::VectorXd predictions = predict_batch(model, data.features);
  write_csv_with_predictions(out_path, data, predictions);
  std::cout << "wrote " << out_path << " (" << data.size() << " rows)\n";
  return 0;
}

int run_certify(const std::string& model_path, const std::string& domain_path,
                const std::string& mode, double gap, const std::string& out_path) {
  const auto model = load_model(model_path);
  const auto jd = load_json(domain_path);
  StabilityDomain domain;
  const auto lo = jd.at("lo").get<std::vector<double>>();
  const auto hi = jd.at("hi").get<std::vector<double>>();
  domain.lo = Eigen::Map<const Eigen::VectorXd>(lo.data(), static_cast<Eigen::Index>(lo.size()));
  domain.hi = Eigen::Map<const Eigen::VectorXd>(hi.data(), static_cast<Eigen::Index>(hi.size()));
  domain.eps = jd.at("eps").get<double>();
  const CertifyMode cmode =
      mode == "exhaustive" ? CertifyMode::exhaustive : CertifyMode::branch_and_bound;
  const auto cert = certify_stability(model, domain, cmode, gap);
  const json out = certificate_to_json(cert);
  if (out_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream(out_path) << out.dump(2) << "\n";
    std::cout << "l_eps=" << cert.l_eps << " (original units " << cert.l_eps_original
              << "), nodes=" << cert.nodes_explored << "\n";
  }
  return 0;
}

int run_benchmark(const std::string& function, int dim, int n, std::uint64_t seed,
                  const std::string& out_path) {
  BenchmarkSpec spec;
  spec.function = benchmark_from_string(function);
  spec.dim = dim;
  spec.n_samples = n;
  spec.seed = seed;
  write_csv(out_path, sample_benchmark(spec));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int run_corrupt(const std::string& data_path, const std::string& out_dir, double fraction,
                double sigma, const std::string& split, double phi, int projections,
                double proposal_scale, std::uint64_t seed) {
  const auto data = read_csv(data_path);
  CorruptionSpec corr;
  corr.outlier_fraction = fraction;
  corr.noise_sigma = sigma;
  corr.outlier_split =
      split == "train_val_random" ? OutlierSplit::train_val_random : OutlierSplit::train_only;
  corr.generator.phi = phi;
  corr.generator.projections = projections;
  corr.generator.proposal_scale = proposal_scale;
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);

  auto write_outputs = [&](const CorruptedSplits& splits, bool complete) {
    write_csv(dir / "train.csv", splits.train);
    write_csv(dir / "val.csv", splits.val);
    write_csv(dir / "test.csv", splits.test);
    json audit;
    audit["complete"] = complete;
    audit["injected_outliers"] = splits.injected_outliers;
    audit["shifts"] = splits.audit.shifts;
    audit["rejections"] = splits.audit.rejections;
    std::ofstream(dir / "audit.json") << audit.dump(2) << "\n";
  };

  try {
    const auto splits = corrupt_and_split(data, corr, {0.6, 0.2, 0.2}, seed);
    write_outputs(splits, true);
    std::cout << "injected " << splits.injected_outliers << " outliers\n";
    return 0;
  } catch (const OutlierBudgetError& e) {
    // Flush the clean partition plus whatever was accepted.
    CorruptionSpec clean = corr;
    clean.outlier_fraction = 0.0;
    auto splits = corrupt_and_split(data, clean, {0.6, 0.2, 0.2}, seed);
    splits.audit = e.audit;
    splits.injected_outliers = static_cast<int>(e.produced_count);
    write_outputs(splits, false);
    std::cerr << "partial result: " << e.produced_count << "/" << e.requested_count
              << " outliers accepted\n";
    return kExitPartialResult;
  }
}

int run_experiment_cmd(const std::string& config_path, const std::string& out_dir) {
  auto cfg = experiment_from_json(load_json(config_path));
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const auto result = run_experiment(cfg);
  for (const auto& outcome : result.models)
    std::cout << outcome.name << ": test mae " << outcome.test_metrics.mae << ", rmse "
              << outcome.test_metrics.rmse << ", violations "
              << outcome.test_metrics.violations << "\n";
  if (!result.grid.empty()) std::cout << result.grid.size() << " stability-grid cells\n";
  return 0;
}

int run_bounds(double train_error, double b_star, double r_hat, double r, double s_bound,
               double t, long long n, double delta, int p, const std::string& variant,
               double zeta) {
  BoundInputs in;
  in.train_error = train_error;
  in.b_star = b_star;
  in.r_hat = r_hat;
  in.r = r;
  in.s_bound = s_bound;
  in.t = t;
  in.n = n;
  in.delta = delta;
  in.p = p;
  in.norm_variant = variant == "l2" ? WassersteinNorm::l2 : WassersteinNorm::l1;
  json out;
  out["lifted_bound"] = rademacher_bound_lifted(in);
  out["original_bound"] = rademacher_bound_original(in);
  if (zeta > 0.0) out["tail_probability"] = probabilistic_tail(in, zeta);
  std::cout << out.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("WADIRO_THREADS")) {
#ifdef _OPENMP
    const int count = std::atoi(threads);
    if (count > 0) omp_set_num_threads(count);
#endif
    (void)threads;
  }

  CLI::App app{"Wasserstein-robust shallow convex network toolkit"};
  app.require_subcommand(1);

  // train
  auto* tr = app.add_subcommand("train", "fit a model on a dataset CSV");
  std::string tr_data, tr_out = "model.json", tr_program = "wadiro_l1", tr_norm = "l1";
  double tr_eps = 0.1, tr_lambda = 0.0, tr_tol = 1e-8;
  int tr_neurons = 16;
  bool tr_bias = true, tr_nonneg = false;
  std::uint64_t tr_seed = 0;
  tr->add_option("--data", tr_data, "input CSV (features..., label)")->required();
  tr->add_option("--out", tr_out, "model file to write");
  tr->add_option("--program", tr_program, "scnn_l1|scnn_lasso|scnn_ridge|wadiro_l1|wadiro_l2");
  tr->add_option("--epsilon", tr_eps, "Wasserstein ball radius");
  tr->add_option("--lambda", tr_lambda, "lasso/ridge weight");
  tr->add_option("--norm", tr_norm, "l1|l2 (wadiro_linreg metric)");
  tr->add_option("--neurons", tr_neurons, "pattern budget before dedup");
  tr->add_flag("--bias,!--no-bias", tr_bias, "output-layer bias");
  tr->add_flag("--nonneg", tr_nonneg, "enforce nonnegative training predictions");
  tr->add_option("--tol", tr_tol, "solver tolerance");
  tr->add_option("--seed", tr_seed, "sampling seed");

  // predict
  auto* pr = app.add_subcommand("predict", "append a prediction column to a CSV");
  std::string pr_model, pr_data, pr_out = "predictions.csv";
  pr->add_option("--model", pr_model)->required();
  pr->add_option("--data", pr_data)->required();
  pr->add_option("--out", pr_out);

  // certify
  auto* ce = app.add_subcommand("certify", "epsilon-stability certificate");
  std::string ce_model, ce_domain, ce_mode = "bnb", ce_out;
  double ce_gap = 1e-9;
  ce->add_option("--model", ce_model)->required();
  ce->add_option("--domain", ce_domain, "JSON {lo:[...], hi:[...], eps} in standardized units")
      ->required();
  ce->add_option("--mode", ce_mode, "bnb|exhaustive");
  ce->add_option("--gap", ce_gap, "branch-and-bound gap target");
  ce->add_option("--out", ce_out, "certificate JSON (stdout when omitted)");

  // benchmark
  auto* be = app.add_subcommand("benchmark", "sample a benchmark function to CSV");
  std::string be_function = "ackley", be_out = "benchmark.csv";
  int be_dim = 4, be_n = 2000;
  std::uint64_t be_seed = 0;
  be->add_option("--function", be_function, "mccormick|pgp|keane|ackley");
  be->add_option("--dim", be_dim);
  be->add_option("--n", be_n);
  be->add_option("--seed", be_seed);
  be->add_option("--out", be_out);

  // corrupt
  auto* co = app.add_subcommand("corrupt", "split a CSV and inject corruption");
  std::string co_data, co_out = "corrupted", co_split = "train_only";
  double co_fraction = 0.1, co_sigma = 0.0, co_phi = 0.1, co_scale = 1.5;
  int co_projections = 64;
  std::uint64_t co_seed = 0;
  co->add_option("--data", co_data)->required();
  co->add_option("--out-dir", co_out);
  co->add_option("--fraction", co_fraction, "outlier fraction of the target splits");
  co->add_option("--sigma", co_sigma, "gaussian label noise");
  co->add_option("--split", co_split, "train_only|train_val_random");
  co->add_option("--phi", co_phi, "minimum sliced-Wasserstein shift");
  co->add_option("--projections", co_projections);
  co->add_option("--proposal-scale", co_scale, "proposal box multiplier");
  co->add_option("--seed", co_seed);

  // experiment
  auto* ex = app.add_subcommand("experiment", "run a configured experiment");
  std::string ex_config, ex_out;
  ex->add_option("--config", ex_config, "experiment JSON")->required();
  ex->add_option("--out-dir", ex_out, "artifact directory (overrides config)");

  // bounds
  auto* bo = app.add_subcommand("bounds", "out-of-sample bound calculators");
  double bo_train = 0.0, bo_bstar = 1.0, bo_rhat = 1.0, bo_r = 1.0, bo_s = 1.0, bo_t = 1.0,
         bo_delta = 0.1, bo_zeta = 0.0;
  long long bo_n = 100;
  int bo_p = 1;
  std::string bo_variant = "l1";
  bo->add_option("--train-error", bo_train);
  bo->add_option("--b-star", bo_bstar);
  bo->add_option("--r-hat", bo_rhat);
  bo->add_option("--r", bo_r);
  bo->add_option("--s", bo_s);
  bo->add_option("--t", bo_t);
  bo->add_option("--n", bo_n);
  bo->add_option("--delta", bo_delta);
  bo->add_option("--p", bo_p);
  bo->add_option("--variant", bo_variant, "l1|l2");
  bo->add_option("--zeta", bo_zeta, "tail threshold (adds the tail probability)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitInvalidConfig;
  }

  try {
    if (tr->parsed())
      return run_train(tr_data, tr_out, tr_program, tr_eps, tr_lambda, tr_norm, tr_neurons,
                       tr_bias, tr_nonneg, tr_tol, tr_seed);
    if (pr->parsed()) return run_predict(pr_model, pr_data, pr_out);
    if (ce->parsed()) return run_certify(ce_model, ce_domain, ce_mode, ce_gap, ce_out);
    if (be->parsed()) return run_benchmark(be_function, be_dim, be_n, be_seed, be_out);
    if (co->parsed())
      return run_corrupt(co_data, co_out, co_fraction, co_sigma, co_split, co_phi,
                         co_projections, co_scale, co_seed);
    if (ex->parsed()) return run_experiment_cmd(ex_config, ex_out);
    if (bo->parsed())
      return run_bounds(bo_train, bo_bstar, bo_rhat, bo_r, bo_s, bo_t, bo_n, bo_delta, bo_p,
                        bo_variant, bo_zeta);
  } catch (const OutlierBudgetError& e) {
    std::cerr << "partial result: " << e.what() << "\n";
    return kExitPartialResult;
  } catch (const PartialResultError& e) {
    std::cerr << "partial result: " << e.what() << "\n";
    return kExitPartialResult;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const json::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolverFailure;
  }
  return 0;
}
