#include "wadiro/train.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace wadiro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::string to_string(Program program) {
  switch (program) {
    case Program::scnn_l1: return "scnn_l1";
    case Program::scnn_lasso: return "scnn_lasso";
    case Program::scnn_ridge: return "scnn_ridge";
    case Program::wadiro_l1: return "wadiro_l1";
    case Program::wadiro_l2: return "wadiro_l2";
    case Program::wadiro_linreg: return "wadiro_linreg";
  }
  return "scnn_l1";
}

Program program_from_string(const std::string& name) {
  if (name == "scnn_l1") return Program::scnn_l1;
  if (name == "scnn_lasso") return Program::scnn_lasso;
  if (name == "scnn_ridge") return Program::scnn_ridge;
  if (name == "wadiro_l1") return Program::wadiro_l1;
  if (name == "wadiro_l2") return Program::wadiro_l2;
  if (name == "wadiro_linreg") return Program::wadiro_linreg;
  throw std::invalid_argument("unknown training program: " + name);
}

bool PhysicsConstraints::empty() const {
  return lower.size() == 0 && upper.size() == 0 && ramping.size() == 0 && linear_rows.empty();
}

void PhysicsConstraints::validate(Eigen::Index n, Eigen::Index d) const {
  if (lower.size() != 0 && lower.size() != n)
    throw std::invalid_argument("physics: lower bound vector length mismatch");
  if (upper.size() != 0 && upper.size() != n)
    throw std::invalid_argument("physics: upper bound vector length mismatch");
  if (lower.size() == n && upper.size() == n)
    for (Eigen::Index j = 0; j < n; ++j)
      if (lower[j] > upper[j]) throw std::invalid_argument("physics: lower bound above upper");
  if (ramping.size() != 0 && ramping.size() != n - 1)
    throw std::invalid_argument("physics: ramping vector must have N-1 entries");
  for (Eigen::Index k = 0; k < ramping.size(); ++k)
    if (ramping[k] < 0.0) throw std::invalid_argument("physics: negative ramping bound");
  for (const auto& row : linear_rows) {
    if (row.lower > row.upper) throw std::invalid_argument("physics: linear row bounds crossed");
    for (const auto& [j, gamma] : row.prediction_terms) {
      (void)gamma;
      if (j < 0 || j >= n) throw std::invalid_argument("physics: linear row sample index");
    }
    for (const auto& [j, eta] : row.feature_terms) {
      if (j < 0 || j >= n) throw std::invalid_argument("physics: linear row sample index");
      if (eta.size() != d) throw std::invalid_argument("physics: linear row eta dimension");
    }
  }
}

int PhysicsConstraints::count_violations(const Eigen::MatrixXd& features,
                                         const Eigen::VectorXd& predictions,
                                         double tol) const {
  const Eigen::Index n = predictions.size();
  std::vector<bool> violated(static_cast<std::size_t>(n), false);
  for (Eigen::Index j = 0; j < n && lower.size() == n; ++j)
    if (predictions[j] < lower[j] - tol) violated[static_cast<std::size_t>(j)] = true;
  for (Eigen::Index j = 0; j < n && upper.size() == n; ++j)
    if (predictions[j] > upper[j] + tol) violated[static_cast<std::size_t>(j)] = true;
  for (Eigen::Index k = 0; k + 1 < n && ramping.size() == n - 1; ++k)
    if (std::abs(predictions[k + 1] - predictions[k]) > ramping[k] + tol)
      violated[static_cast<std::size_t>(k + 1)] = true;
  for (const auto& row : linear_rows) {
    double acc = 0.0;
    for (const auto& [j, gamma] : row.prediction_terms) acc += gamma * predictions[j];
    for (const auto& [j, eta] : row.feature_terms) acc += eta.dot(features.row(j));
    if (acc < row.lower - tol || acc > row.upper + tol)
      for (const auto& [j, gamma] : row.prediction_terms) {
        (void)gamma;
        violated[static_cast<std::size_t>(j)] = true;
      }
  }
  int count = 0;
  for (bool v : violated) count += v ? 1 : 0;
  return count;
}

PhysicsConstraints standardize_constraints(const PhysicsConstraints& constraints,
                                           const ScalerState& scaler) {
  const Eigen::Index d = scaler.means.size() - 1;
  const double mu_y = scaler.means[d];
  const double sd_y = scaler.stdevs[d];
  PhysicsConstraints out;
  if (constraints.lower.size() > 0) out.lower = (constraints.lower.array() - mu_y) / sd_y;
  if (constraints.upper.size() > 0) out.upper = (constraints.upper.array() - mu_y) / sd_y;
  if (constraints.ramping.size() > 0) out.ramping = constraints.ramping / sd_y;
  for (const auto& row : constraints.linear_rows) {
    PhysicsConstraints::LinearRow r;
    double shift = 0.0;
    for (const auto& [j, gamma] : row.prediction_terms) {
      r.prediction_terms.push_back({j, gamma * sd_y});
      shift += gamma * mu_y;
    }
    for (const auto& [j, eta] : row.feature_terms) {
      Eigen::VectorXd scaled = eta.cwiseProduct(scaler.stdevs.head(d));
      shift += eta.dot(scaler.means.head(d));
      r.feature_terms.push_back({j, std::move(scaled)});
    }
    r.lower = row.lower - shift;
    r.upper = row.upper - shift;
    out.linear_rows.push_back(std::move(r));
  }
  return out;
}

void TrainConfig::validate() const {
  if (epsilon < 0.0) throw std::invalid_argument("train: epsilon must be >= 0");
  if (lambda < 0.0) throw std::invalid_argument("train: lambda must be >= 0");
  if (max_neurons < 1) throw std::invalid_argument("train: max_neurons must be >= 1");
  if (!(solver_tol > 0.0 && solver_tol <= 1e-2))
    throw std::invalid_argument("train: solver_tol out of range");
}

Eigen::VectorXd RawWeights::beta() const {
  const Eigen::Index p = nu.rows();
  const Eigen::Index d = nu.cols();
  Eigen::VectorXd out(2 * p * d + (bias ? 1 : 0) + 1);
  for (Eigen::Index i = 0; i < p; ++i) {
    out.segment(i * d, d) = nu.row(i).transpose();
    out.segment(p * d + i * d, d) = -omega.row(i).transpose();
  }
  if (bias) out[2 * p * d] = *bias;
  out[out.size() - 1] = -1.0;
  return out;
}

Eigen::VectorXd RawWeights::beta_trainable(bool penalize_bias) const {
  const Eigen::Index p = nu.rows();
  const Eigen::Index d = nu.cols();
  const bool with_b = bias.has_value() && penalize_bias;
  Eigen::VectorXd out(2 * p * d + (with_b ? 1 : 0));
  for (Eigen::Index i = 0; i < p; ++i) {
    out.segment(i * d, d) = nu.row(i).transpose();
    out.segment(p * d + i * d, d) = -omega.row(i).transpose();
  }
  if (with_b) out[2 * p * d] = *bias;
  return out;
}

double RawWeights::dual_norm(Program program, bool penalize_bias) const {
  const Eigen::VectorXd tr = beta_trainable(penalize_bias);
  switch (program) {
    case Program::wadiro_l1: return tr.lpNorm<Eigen::Infinity>();
    case Program::wadiro_l2: return tr.norm();
    case Program::scnn_lasso: return tr.lpNorm<1>();
    case Program::scnn_ridge: return tr.squaredNorm();
    default: return 0.0;
  }
}

namespace {

// Variable layout shared by every SCNN training program.
struct Layout {
  Eigen::Index p = 0;
  Eigen::Index d = 0;
  bool with_bias = false;
  int bias_idx = -1;
  int next = 0;

  int nu(Eigen::Index i, Eigen::Index k) const { return static_cast<int>(i * d + k); }
  int om(Eigen::Index i, Eigen::Index k) const { return static_cast<int>(p * d + i * d + k); }
};

Layout make_layout(Eigen::Index p, Eigen::Index d, bool with_bias) {
  Layout l;
  l.p = p;
  l.d = d;
  l.with_bias = with_bias;
  l.next = static_cast<int>(2 * p * d);
  if (with_bias) l.bias_idx = l.next++;
  return l;
}

struct RowScratch {
  std::vector<int> vars;
  std::vector<double> coeffs;
  void clear() {
    vars.clear();
    coeffs.clear();
  }
  void push(int var, double coeff) {
    vars.push_back(var);
    coeffs.push_back(coeff);
  }
};

// Appends the prediction expression of sample j (active-gate nu/omega
// terms plus bias) scaled by `sign`.
void push_prediction(RowScratch& row, const Layout& layout, const Eigen::MatrixXd& x,
                     const ActivationPatterns& bits, Eigen::Index j, double sign) {
  for (Eigen::Index i = 0; i < layout.p; ++i) {
    if (!bits.bit(j, i)) continue;
    for (Eigen::Index k = 0; k < layout.d; ++k) {
      const double v = sign * x(j, k);
      if (v == 0.0) continue;
      row.push(layout.nu(i, k), v);
      row.push(layout.om(i, k), -v);
    }
  }
  if (layout.with_bias) row.push(layout.bias_idx, sign);
}

void add_cone_rows(ConicProblem& problem, const Layout& layout, const Eigen::MatrixXd& x,
                   const ActivationPatterns& bits) {
  RowScratch row;
  const Eigen::Index n = x.rows();
  for (Eigen::Index i = 0; i < layout.p; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double sign = bits.bit(j, i) ? -1.0 : 1.0;  // -(2d-1) x' u <= 0
      row.clear();
      for (Eigen::Index k = 0; k < layout.d; ++k)
        if (x(j, k) != 0.0) row.push(layout.nu(i, k), sign * x(j, k));
      if (!row.vars.empty())
        problem.add_inequality(row.vars.data(), row.coeffs.data(),
                               static_cast<int>(row.vars.size()), 0.0);
      row.clear();
      for (Eigen::Index k = 0; k < layout.d; ++k)
        if (x(j, k) != 0.0) row.push(layout.om(i, k), sign * x(j, k));
      if (!row.vars.empty())
        problem.add_inequality(row.vars.data(), row.coeffs.data(),
                               static_cast<int>(row.vars.size()), 0.0);
    }
  }
}

void add_physics_rows(ConicProblem& problem, const Layout& layout, const Eigen::MatrixXd& x,
                      const ActivationPatterns& bits, const PhysicsConstraints& physics) {
  RowScratch row;
  const Eigen::Index n = x.rows();
  for (Eigen::Index j = 0; j < n && physics.upper.size() == n; ++j) {
    if (physics.upper[j] == kInf) continue;
    row.clear();
    push_prediction(row, layout, x, bits, j, 1.0);
    problem.add_inequality(row.vars.data(), row.coeffs.data(),
                           static_cast<int>(row.vars.size()), physics.upper[j]);
  }
  for (Eigen::Index j = 0; j < n && physics.lower.size() == n; ++j) {
    if (physics.lower[j] == -kInf) continue;
    row.clear();
    push_prediction(row, layout, x, bits, j, -1.0);
    problem.add_inequality(row.vars.data(), row.coeffs.data(),
                           static_cast<int>(row.vars.size()), -physics.lower[j]);
  }
  for (Eigen::Index k = 0; k + 1 < n && physics.ramping.size() == n - 1; ++k) {
    if (physics.ramping[k] == kInf) continue;
    for (double sign : {1.0, -1.0}) {
      row.clear();
      push_prediction(row, layout, x, bits, k + 1, sign);
      push_prediction(row, layout, x, bits, k, -sign);
      problem.add_inequality(row.vars.data(), row.coeffs.data(),
                             static_cast<int>(row.vars.size()), physics.ramping[k]);
    }
  }
  for (const auto& lrow : physics.linear_rows) {
    double constant = 0.0;
    for (const auto& [j, eta] : lrow.feature_terms) constant += eta.dot(x.row(j));
    for (double sign : {1.0, -1.0}) {
      const double bound = sign > 0 ? lrow.upper : -lrow.lower;
      if (bound == kInf) continue;
      row.clear();
      for (const auto& [j, gamma] : lrow.prediction_terms)
        push_prediction(row, layout, x, bits, j, sign * gamma);
      problem.add_inequality(row.vars.data(), row.coeffs.data(),
                             static_cast<int>(row.vars.size()), bound - sign * constant);
    }
  }
}

RawWeights extract_weights(const Eigen::VectorXd& primal, const Layout& layout) {
  RawWeights w;
  w.nu.resize(layout.p, layout.d);
  w.omega.resize(layout.p, layout.d);
  for (Eigen::Index i = 0; i < layout.p; ++i)
    for (Eigen::Index k = 0; k < layout.d; ++k) {
      w.nu(i, k) = primal[layout.nu(i, k)];
      w.omega(i, k) = primal[layout.om(i, k)];
    }
  if (layout.with_bias) w.bias = primal[layout.bias_idx];
  return w;
}

RawWeights zero_weights(const Layout& layout) {
  RawWeights w;
  w.nu = Eigen::MatrixXd::Zero(layout.p, layout.d);
  w.omega = Eigen::MatrixXd::Zero(layout.p, layout.d);
  if (layout.with_bias) w.bias = 0.0;
  return w;
}

}  // namespace

std::pair<RawWeights, SolveReport> train(const Dataset& dataset, const SamplingSet& s,
                                         const TrainConfig& cfg) {
  cfg.validate();
  dataset.validate();
  if (dataset.dim() != s.dim()) throw std::invalid_argument("train: dimension mismatch");
  if (cfg.program == Program::wadiro_linreg)
    throw std::invalid_argument("train: use train_wadiro_linreg for the linear baseline");

  const Eigen::Index n = dataset.size();
  const Eigen::Index d = dataset.dim();
  const Eigen::Index p = s.count();
  const auto bits = compute_patterns(dataset, s);
  const Layout layout = make_layout(p, d, cfg.with_bias);

  const bool robust = (cfg.program == Program::wadiro_l1 || cfg.program == Program::wadiro_l2) &&
                      cfg.epsilon > 0.0;
  const bool lasso = cfg.program == Program::scnn_lasso && cfg.lambda > 0.0;
  const bool ridge = cfg.program == Program::scnn_ridge && cfg.lambda > 0.0;
  const int n_penalized =
      static_cast<int>(2 * p * d) + ((cfg.with_bias && cfg.penalize_bias) ? 1 : 0);

  int var_count = layout.next;
  int a_idx = -1, t0_idx = -1, q_idx = -1, g0_idx = -1, g1_idx = -1;
  if (robust) a_idx = var_count++;
  if (lasso) {
    t0_idx = var_count;
    var_count += n_penalized;
  }
  if (ridge) {
    q_idx = var_count++;
    g0_idx = var_count++;
    g1_idx = var_count++;
  }
  const int c0_idx = var_count;
  var_count += static_cast<int>(n);

  ConicProblem problem(var_count);
  const std::size_t approx_nnz =
      static_cast<std::size_t>(2 * n) * static_cast<std::size_t>(p * d + 2) +
      static_cast<std::size_t>(2 * p * n) * static_cast<std::size_t>(d);
  problem.reserve_inequalities(static_cast<std::size_t>(2 * n + 2 * p * n + 4 * p * d),
                               approx_nnz);

  // Objective: mean l1 loss plus the configured regularizer.
  for (Eigen::Index j = 0; j < n; ++j)
    problem.objective_coeff(c0_idx + static_cast<int>(j), 1.0 / static_cast<double>(n));
  if (robust) problem.objective_coeff(a_idx, cfg.epsilon);
  if (lasso)
    for (int k = 0; k < n_penalized; ++k) problem.objective_coeff(t0_idx + k, cfg.lambda);
  if (ridge) problem.objective_coeff(q_idx, cfg.lambda);

  // Sample rows  +/-(yhat_j - y_j) <= c_j.
  RowScratch row;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (double sign : {1.0, -1.0}) {
      row.clear();
      push_prediction(row, layout, dataset.features, bits, j, sign);
      row.push(c0_idx + static_cast<int>(j), -1.0);
      problem.add_inequality(row.vars.data(), row.coeffs.data(),
                             static_cast<int>(row.vars.size()), sign * dataset.labels[j]);
    }
  }

  add_cone_rows(problem, layout, dataset.features, bits);

  // Trainable beta slots in lifted order: nu block, -omega block, then
  // optionally the bias. |beta_k| bounds only see variable magnitudes,
  // so the omega sign flip is immaterial.
  auto for_each_penalized = [&](auto&& fn) {
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index k = 0; k < d; ++k) fn(layout.nu(i, k));
    for (Eigen::Index i = 0; i < p; ++i)
      for (Eigen::Index k = 0; k < d; ++k) fn(layout.om(i, k));
    if (cfg.with_bias && cfg.penalize_bias) fn(layout.bias_idx);
  };

  if (robust && cfg.program == Program::wadiro_l1) {
    for_each_penalized([&](int var) {
      problem.add_inequality({{var, 1.0}, {a_idx, -1.0}}, 0.0);
      problem.add_inequality({{var, -1.0}, {a_idx, -1.0}}, 0.0);
    });
  }
  if (robust && cfg.program == Program::wadiro_l2) {
    std::vector<int> tail;
    for_each_penalized([&](int var) { tail.push_back(var); });
    problem.add_soc_block(a_idx, std::move(tail));
  }
  if (lasso) {
    int t = t0_idx;
    for_each_penalized([&](int var) {
      problem.add_inequality({{var, 1.0}, {t, -1.0}}, 0.0);
      problem.add_inequality({{var, -1.0}, {t, -1.0}}, 0.0);
      ++t;
    });
  }
  if (ridge) {
    // ||(g1, beta)||_2 <= g0 with g0 = (q+1)/2, g1 = (q-1)/2 encodes
    // ||beta||^2 <= q.
    problem.add_equality({{g0_idx, 2.0}, {q_idx, -1.0}}, 1.0);
    problem.add_equality({{g1_idx, 2.0}, {q_idx, -1.0}}, -1.0);
    std::vector<int> tail{g1_idx};
    for_each_penalized([&](int var) { tail.push_back(var); });
    problem.add_soc_block(g0_idx, std::move(tail));
  }

  if (cfg.physics && !cfg.physics->empty()) {
    cfg.physics->validate(n, d);
    add_physics_rows(problem, layout, dataset.features, bits, *cfg.physics);
  }

  SolverOptions options;
  options.tol = cfg.solver_tol;
  options.max_iterations = cfg.solver_max_iterations;
  auto report = solve_conic(problem, options);

  if (report.status == SolveStatus::optimal || report.status == SolveStatus::max_iter)
    return {extract_weights(report.primal, layout), std::move(report)};
  return {zero_weights(layout), std::move(report)};
}

std::pair<Eigen::VectorXd, SolveReport> train_wadiro_linreg(const Dataset& dataset,
                                                            const TrainConfig& cfg) {
  cfg.validate();
  dataset.validate();
  const Eigen::Index n = dataset.size();
  const Eigen::Index d = dataset.dim();

  const bool robust = cfg.epsilon > 0.0;
  int var_count = static_cast<int>(d);
  const int bias_idx = cfg.with_bias ? var_count++ : -1;
  const int a_idx = robust ? var_count++ : -1;
  const int c0_idx = var_count;
  var_count += static_cast<int>(n);

  ConicProblem problem(var_count);
  for (Eigen::Index j = 0; j < n; ++j)
    problem.objective_coeff(c0_idx + static_cast<int>(j), 1.0 / static_cast<double>(n));
  if (robust) problem.objective_coeff(a_idx, cfg.epsilon);

  RowScratch row;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (double sign : {1.0, -1.0}) {
      row.clear();
      for (Eigen::Index k = 0; k < d; ++k)
        if (dataset.features(j, k) != 0.0)
          row.push(static_cast<int>(k), sign * dataset.features(j, k));
      if (cfg.with_bias) row.push(bias_idx, sign);
      row.push(c0_idx + static_cast<int>(j), -1.0);
      problem.add_inequality(row.vars.data(), row.coeffs.data(),
                             static_cast<int>(row.vars.size()), sign * dataset.labels[j]);
    }
  }

  const int n_penalized = static_cast<int>(d) + ((cfg.with_bias && cfg.penalize_bias) ? 1 : 0);
  if (robust && cfg.norm == WassersteinNorm::l1) {
    for (int k = 0; k < n_penalized; ++k) {
      const int var = k < static_cast<int>(d) ? k : bias_idx;
      problem.add_inequality({{var, 1.0}, {a_idx, -1.0}}, 0.0);
      problem.add_inequality({{var, -1.0}, {a_idx, -1.0}}, 0.0);
    }
  }
  if (robust && cfg.norm == WassersteinNorm::l2) {
    std::vector<int> tail;
    for (int k = 0; k < n_penalized; ++k) tail.push_back(k < static_cast<int>(d) ? k : bias_idx);
    problem.add_soc_block(a_idx, std::move(tail));
  }

  SolverOptions options;
  options.tol = cfg.solver_tol;
  options.max_iterations = cfg.solver_max_iterations;
  auto report = solve_conic(problem, options);

  Eigen::VectorXd weights = Eigen::VectorXd::Zero(d + (cfg.with_bias ? 1 : 0));
  if (report.status == SolveStatus::optimal || report.status == SolveStatus::max_iter) {
    for (Eigen::Index k = 0; k < d; ++k) weights[k] = report.primal[k];
    if (cfg.with_bias) weights[d] = report.primal[bias_idx];
  }
  return {std::move(weights), std::move(report)};
}

double objective_oracle(const Dataset& dataset, const SamplingSet& s,
                        const RawWeights& weights, const TrainConfig& cfg) {
  if (weights.dim() != dataset.dim() || weights.pattern_count() != s.count())
    throw std::invalid_argument("objective_oracle: shape mismatch");
  const bool with_bias = weights.bias.has_value();
  const auto lifted = lift_dataset(dataset, s, with_bias);
  const Eigen::VectorXd beta = weights.beta();
  double loss = 0.0;
  for (Eigen::Index j = 0; j < lifted.lifted.rows(); ++j)
    loss += std::abs(beta.dot(lifted.lifted.row(j)));
  loss /= static_cast<double>(lifted.lifted.rows());

  switch (cfg.program) {
    case Program::wadiro_l1:
    case Program::wadiro_l2:
      return loss + cfg.epsilon * weights.dual_norm(cfg.program, cfg.penalize_bias);
    case Program::scnn_lasso:
    case Program::scnn_ridge:
      return loss + cfg.lambda * weights.dual_norm(cfg.program, cfg.penalize_bias);
    default:
      return loss;
  }
}

Eigen::VectorXd training_predictions(const Dataset& dataset, const SamplingSet& s,
                                     const RawWeights& weights) {
  const auto bits = compute_patterns(dataset, s);
  const Eigen::Index n = dataset.size();
  const Eigen::Index p = s.count();
  Eigen::VectorXd out(n);
  const Eigen::MatrixXd diff = weights.nu - weights.omega;
  for (Eigen::Index j = 0; j < n; ++j) {
    double acc = weights.bias.value_or(0.0);
    for (Eigen::Index i = 0; i < p; ++i)
      if (bits.bit(j, i)) acc += dataset.features.row(j).dot(diff.row(i));
    out[j] = acc;
  }
  return out;
}

Eigen::VectorXd linreg_predictions(const Dataset& dataset, const Eigen::VectorXd& weights,
                                   bool with_bias) {
  const Eigen::Index d = dataset.dim();
  if (weights.size() != d + (with_bias ? 1 : 0))
    throw std::invalid_argument("linreg_predictions: weight length mismatch");
  Eigen::VectorXd out = dataset.features * weights.head(d);
  if (with_bias) out.array() += weights[d];
  return out;
}

double cone_feasibility_margin(const Dataset& dataset, const SamplingSet& s,
                               const RawWeights& weights) {
  const auto bits = compute_patterns(dataset, s);
  double margin = kInf;
  for (Eigen::Index i = 0; i < s.count(); ++i)
    for (Eigen::Index j = 0; j < dataset.size(); ++j) {
      const double sign = bits.bit(j, i) ? 1.0 : -1.0;
      margin = std::min(margin, sign * dataset.features.row(j).dot(weights.nu.row(i)));
      margin = std::min(margin, sign * dataset.features.row(j).dot(weights.omega.row(i)));
    }
  return margin;
}

}  // namespace wadiro
