#include "wadiro/model.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "wadiro/errors.hpp"

namespace wadiro {

using nlohmann::json;

Provenance make_provenance(const TrainConfig& cfg, const SolveReport& report,
                           int effective_patterns) {
  Provenance p;
  p.program = to_string(cfg.program);
  p.epsilon = cfg.epsilon;
  p.lambda = cfg.lambda;
  p.norm = cfg.norm == WassersteinNorm::l1 ? "l1" : "l2";
  p.max_neurons = cfg.max_neurons;
  p.effective_patterns = effective_patterns;
  p.penalize_bias = cfg.penalize_bias;
  p.seed = cfg.seed;
  p.solver_tol = cfg.solver_tol;
  p.solver_status = to_string(report.status);
  p.objective_value = report.objective_value;
  p.primal_residual = report.primal_residual;
  p.dual_residual = report.dual_residual;
  p.gap = report.gap;
  p.iterations = report.iterations;
  p.wall_time = report.wall_time;
  return p;
}

double predict_standardized(const ScnnModel& model, const Eigen::VectorXd& x_std) {
  if (x_std.size() != model.dim())
    throw std::invalid_argument("predict: input dimension mismatch");
  double acc = model.raw.bias.value_or(0.0);
  for (Eigen::Index i = 0; i < model.pattern_count(); ++i) {
    if (x_std.dot(model.sampling.vectors.row(i)) >= 0.0)
      acc += x_std.dot(model.raw.nu.row(i) - model.raw.omega.row(i));
  }
  return acc;
}

double predict(const ScnnModel& model, const Eigen::VectorXd& x) {
  if (!x.allFinite()) throw std::invalid_argument("predict: non-finite input");
  const Eigen::VectorXd x_std = scale_features(x, model.scaler);
  return unscale_label(predict_standardized(model, x_std), model.scaler);
}

Eigen::VectorXd predict_batch(const ScnnModel& model, const Eigen::MatrixXd& features) {
  Eigen::VectorXd out(features.rows());
  for (Eigen::Index r = 0; r < features.rows(); ++r)
    out[r] = predict(model, features.row(r).transpose());
  return out;
}

SnnWeights map_to_snn(const ScnnModel& model, double zero_threshold) {
  const Eigen::Index p = model.pattern_count();
  const Eigen::Index d = model.dim();
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> outs;
  for (Eigen::Index i = 0; i < p; ++i) {
    const double norm = model.raw.nu.row(i).norm();
    if (norm > zero_threshold) {
      rows.push_back(model.raw.nu.row(i).transpose() / std::sqrt(norm));
      outs.push_back(std::sqrt(norm));
    }
  }
  for (Eigen::Index i = 0; i < p; ++i) {
    const double norm = model.raw.omega.row(i).norm();
    if (norm > zero_threshold) {
      rows.push_back(model.raw.omega.row(i).transpose() / std::sqrt(norm));
      outs.push_back(-std::sqrt(norm));
    }
  }
  SnnWeights w;
  w.w1.resize(static_cast<Eigen::Index>(rows.size()), d);
  w.w2.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    w.w1.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
    w.w2[static_cast<Eigen::Index>(r)] = outs[r];
  }
  w.bias = model.raw.bias.value_or(0.0);
  return w;
}

double predict_snn(const SnnWeights& weights, const Eigen::VectorXd& x_std) {
  if (x_std.size() != weights.w1.cols() && weights.neuron_count() > 0)
    throw std::invalid_argument("predict_snn: input dimension mismatch");
  double acc = weights.bias;
  for (Eigen::Index i = 0; i < weights.neuron_count(); ++i)
    acc += std::max(x_std.dot(weights.w1.row(i)), 0.0) * weights.w2[i];
  return acc;
}

double gate_disagreement_rate(const ScnnModel& model, const Eigen::MatrixXd& inputs_std,
                              double zero_threshold) {
  if (inputs_std.rows() == 0) return 0.0;
  Eigen::Index disagreements = 0;
  for (Eigen::Index r = 0; r < inputs_std.rows(); ++r) {
    const Eigen::VectorXd x = inputs_std.row(r).transpose();
    bool mismatch = false;
    for (Eigen::Index i = 0; i < model.pattern_count() && !mismatch; ++i) {
      const bool gate = x.dot(model.sampling.vectors.row(i)) >= 0.0;
      if (model.raw.nu.row(i).norm() > zero_threshold &&
          (x.dot(model.raw.nu.row(i)) >= 0.0) != gate)
        mismatch = true;
      if (model.raw.omega.row(i).norm() > zero_threshold &&
          (x.dot(model.raw.omega.row(i)) >= 0.0) != gate)
        mismatch = true;
    }
    if (mismatch) ++disagreements;
  }
  return static_cast<double>(disagreements) / static_cast<double>(inputs_std.rows());
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vector_from_json(const json& j) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(j.size()));
  Eigen::Index i = 0;
  for (const auto& x : j) out[i++] = x.get<double>();
  return out;
}

// Weights are stored flat in the vec convention: gate-major blocks of d.
json weights_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) out.push_back(m(i, k));
  return out;
}

Eigen::MatrixXd weights_from_json(const json& j, Eigen::Index p, Eigen::Index d) {
  if (static_cast<Eigen::Index>(j.size()) != p * d)
    throw std::invalid_argument("model: weight block has wrong length");
  Eigen::MatrixXd out(p, d);
  Eigen::Index idx = 0;
  for (const auto& x : j) {
    out(idx / d, idx % d) = x.get<double>();
    ++idx;
  }
  return out;
}

}  // namespace

std::string model_to_json(const ScnnModel& model) {
  const Eigen::Index p = model.pattern_count();
  const Eigen::Index d = model.dim();
  json j;
  j["schema_version"] = model.schema_version;
  j["d"] = d;
  j["P"] = p;
  j["with_bias"] = model.with_bias;
  j["nu"] = weights_to_json(model.raw.nu);
  j["omega"] = weights_to_json(model.raw.omega);
  j["bias"] = model.raw.bias.value_or(0.0);
  json sv = json::array();
  for (Eigen::Index i = 0; i < p; ++i)
    sv.push_back(vector_to_json(model.sampling.vectors.row(i).transpose()));
  j["sampling_vectors"] = sv;
  j["sampling_seed"] = model.sampling.seed;
  j["sampling_dedup"] = model.sampling.dedup_applied;
  j["scaler"] = {{"means", vector_to_json(model.scaler.means)},
                 {"stdevs", vector_to_json(model.scaler.stdevs)}};
  const auto& pr = model.provenance;
  j["provenance"] = {{"program", pr.program},
                     {"epsilon", pr.epsilon},
                     {"lambda", pr.lambda},
                     {"norm", pr.norm},
                     {"max_neurons", pr.max_neurons},
                     {"effective_patterns", pr.effective_patterns},
                     {"penalize_bias", pr.penalize_bias},
                     {"seed", pr.seed},
                     {"solver_tol", pr.solver_tol},
                     {"solver_status", pr.solver_status},
                     {"objective_value", pr.objective_value},
                     {"primal_residual", pr.primal_residual},
                     {"dual_residual", pr.dual_residual},
                     {"gap", pr.gap},
                     {"iterations", pr.iterations},
                     {"wall_time", pr.wall_time},
                     {"dual_norm_scope", pr.dual_norm_scope},
                     {"zero_block_threshold", pr.zero_block_threshold}};
  return j.dump(2);
}

ScnnModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("model: ") + e.what(), e.byte);
  }
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer())
    throw ParseError("model: missing schema_version", 0);
  const int version = j["schema_version"].get<int>();
  if (version != kModelSchemaVersion)
    throw SchemaError("model: unsupported schema version " + std::to_string(version), version,
                      kModelSchemaVersion);

  ScnnModel model;
  model.schema_version = version;
  const auto p = j.at("P").get<Eigen::Index>();
  const auto d = j.at("d").get<Eigen::Index>();
  model.with_bias = j.at("with_bias").get<bool>();
  model.raw.nu = weights_from_json(j.at("nu"), p, d);
  model.raw.omega = weights_from_json(j.at("omega"), p, d);
  if (model.with_bias) model.raw.bias = j.at("bias").get<double>();
  model.sampling.vectors.resize(p, d);
  const auto& sv = j.at("sampling_vectors");
  if (static_cast<Eigen::Index>(sv.size()) != p)
    throw std::invalid_argument("model: sampling vector count mismatch");
  for (Eigen::Index i = 0; i < p; ++i) {
    const Eigen::VectorXd row = vector_from_json(sv[static_cast<std::size_t>(i)]);
    if (row.size() != d) throw std::invalid_argument("model: sampling vector dimension");
    model.sampling.vectors.row(i) = row.transpose();
  }
  model.sampling.seed = j.value("sampling_seed", std::uint64_t{0});
  model.sampling.dedup_applied = j.value("sampling_dedup", false);
  model.sampling.mean = Eigen::VectorXd::Zero(d);
  model.sampling.sigma = Eigen::VectorXd::Ones(d);
  model.scaler.means = vector_from_json(j.at("scaler").at("means"));
  model.scaler.stdevs = vector_from_json(j.at("scaler").at("stdevs"));
  if (model.scaler.means.size() != d + 1 || model.scaler.stdevs.size() != d + 1)
    throw std::invalid_argument("model: scaler dimension mismatch");

  const auto& pr = j.at("provenance");
  model.provenance.program = pr.value("program", "scnn_l1");
  model.provenance.epsilon = pr.value("epsilon", 0.0);
  model.provenance.lambda = pr.value("lambda", 0.0);
  model.provenance.norm = pr.value("norm", "l1");
  model.provenance.max_neurons = pr.value("max_neurons", 0);
  model.provenance.effective_patterns = pr.value("effective_patterns", static_cast<int>(p));
  model.provenance.penalize_bias = pr.value("penalize_bias", false);
  model.provenance.seed = pr.value("seed", std::uint64_t{0});
  model.provenance.solver_tol = pr.value("solver_tol", 1e-8);
  model.provenance.solver_status = pr.value("solver_status", "optimal");
  model.provenance.objective_value = pr.value("objective_value", 0.0);
  model.provenance.primal_residual = pr.value("primal_residual", 0.0);
  model.provenance.dual_residual = pr.value("dual_residual", 0.0);
  model.provenance.gap = pr.value("gap", 0.0);
  model.provenance.iterations = pr.value("iterations", 0);
  model.provenance.wall_time = pr.value("wall_time", 0.0);
  model.provenance.dual_norm_scope = pr.value("dual_norm_scope", "trainable-only");
  model.provenance.zero_block_threshold = pr.value("zero_block_threshold", 1e-9);
  return model;
}

void save_model(const ScnnModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("model: cannot write " + path.string());
  out << model_to_json(model) << '\n';
}

ScnnModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("model: cannot open " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return model_from_json(text);
}

}  // namespace wadiro
