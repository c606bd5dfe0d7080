#include "wadiro/guarantees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "wadiro/conic.hpp"

namespace wadiro {

void BoundInputs::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!(std::isfinite(train_error) && train_error >= 0.0))
    throw std::invalid_argument("bounds: train_error must be finite and nonnegative");
  if (!positive(b_star) || !positive(r_hat) || !positive(r) || !positive(s_bound) ||
      !positive(t))
    throw std::invalid_argument("bounds: norm bounds must be positive and finite");
  if (n < 1) throw std::invalid_argument("bounds: need at least one sample");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("bounds: delta outside (0,1)");
  if (p < 1) throw std::invalid_argument("bounds: pattern count must be >= 1");
}

namespace {

double tail_term(const BoundInputs& in) {
  const double n = static_cast<double>(in.n);
  return in.b_star * in.r_hat * std::sqrt(8.0 * std::log(2.0 / in.delta) / n);
}

}  // namespace

double rademacher_bound_lifted(const BoundInputs& in) {
  in.validate();
  const double n = static_cast<double>(in.n);
  return in.train_error + 2.0 * in.b_star * in.r_hat / std::sqrt(n) + tail_term(in);
}

double rademacher_bound_original(const BoundInputs& in) {
  in.validate();
  const double n = static_cast<double>(in.n);
  const double psi = in.norm_variant == WassersteinNorm::l1
                         ? in.b_star * 2.0 * static_cast<double>(in.p) * in.r
                         : in.b_star * std::sqrt(2.0 * static_cast<double>(in.p)) * in.r;
  return in.train_error + 2.0 * psi / std::sqrt(n) + tail_term(in);
}

double probabilistic_tail(const BoundInputs& in, double zeta_threshold) {
  in.validate();
  const double n = static_cast<double>(in.n);
  const double slack = 2.0 * in.b_star * in.r_hat / std::sqrt(n) + tail_term(in);
  if (!(zeta_threshold > slack))
    throw std::invalid_argument("bounds: zeta must exceed the slack term");
  return (in.train_error + slack) / (in.train_error + zeta_threshold);
}

void StabilityDomain::validate(Eigen::Index dim) const {
  if (lo.size() != dim || hi.size() != dim)
    throw std::invalid_argument("stability: domain dimension mismatch");
  if (!lo.allFinite() || !hi.allFinite())
    throw std::invalid_argument("stability: unbounded domain box");
  for (Eigen::Index k = 0; k < dim; ++k)
    if (lo[k] > hi[k]) throw std::invalid_argument("stability: empty domain box");
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw std::invalid_argument("stability: eps must be positive and finite");
}

namespace {

// Shared geometry of one certification instance: fixed weights, gate
// vectors, per-constraint big-M values and closed-gate margins.
struct MicpContext {
  Eigen::Index d = 0;
  Eigen::Index p = 0;
  Eigen::MatrixXd w;  // P x d rows nu_i - omega_i
  Eigen::MatrixXd s;  // P x d sampling vectors
  Eigen::VectorXd lo, hi;
  double eps = 0.0;

  Eigen::VectorXd mg_pos, mg_neg;    // gate Ms over the x box
  Eigen::VectorXd mge_pos, mge_neg;  // gate Ms over the inflated box
  Eigen::VectorXd mx, me;            // per-coordinate product Ms
  Eigen::VectorXd margin, margin_e;  // closed-gate margins
  double mo = 0.0;                   // objective linearization M

  // Variable layout of the full relaxation.
  int vx(Eigen::Index k) const { return static_cast<int>(k); }
  int veps(Eigen::Index k) const { return static_cast<int>(d + k); }
  int va(Eigen::Index i, Eigen::Index k) const { return static_cast<int>(2 * d + i * d + k); }
  int vb(Eigen::Index i, Eigen::Index k) const {
    return static_cast<int>(2 * d + p * d + i * d + k);
  }
  int vgamma(Eigen::Index i) const { return static_cast<int>(2 * d + 2 * p * d + i); }
  int veta(Eigen::Index i) const { return static_cast<int>(2 * d + 2 * p * d + p + i); }
  int valpha() const { return static_cast<int>(2 * d + 2 * p * d + 2 * p); }
  int vzeta() const { return valpha() + 1; }
  int var_count() const { return vzeta() + 1; }
  int binaries() const { return static_cast<int>(2 * p + 1); }

  int binary_var(int b) const {
    if (b < p) return vgamma(b);
    if (b < 2 * p) return veta(b - p);
    return vzeta();
  }
};

MicpContext make_context(const ScnnModel& model, const StabilityDomain& domain) {
  MicpContext ctx;
  ctx.d = model.dim();
  ctx.p = model.pattern_count();
  ctx.w = model.raw.nu - model.raw.omega;
  ctx.s = model.sampling.vectors;
  ctx.lo = domain.lo;
  ctx.hi = domain.hi;
  ctx.eps = domain.eps;

  const Eigen::VectorXd lo_e = domain.lo.array() - domain.eps;
  const Eigen::VectorXd hi_e = domain.hi.array() + domain.eps;
  auto box_max = [](const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                    const Eigen::VectorXd& a) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < a.size(); ++k)
      acc += std::max(lo[k] * a[k], hi[k] * a[k]);
    return acc;
  };
  ctx.mg_pos.resize(ctx.p);
  ctx.mg_neg.resize(ctx.p);
  ctx.mge_pos.resize(ctx.p);
  ctx.mge_neg.resize(ctx.p);
  ctx.margin.resize(ctx.p);
  ctx.margin_e.resize(ctx.p);
  for (Eigen::Index i = 0; i < ctx.p; ++i) {
    const Eigen::VectorXd si = ctx.s.row(i).transpose();
    ctx.mg_pos[i] = std::max(0.0, box_max(ctx.lo, ctx.hi, si));
    ctx.mg_neg[i] = std::max(0.0, box_max(ctx.lo, ctx.hi, Eigen::VectorXd(-si)));
    ctx.mge_pos[i] = std::max(0.0, box_max(lo_e, hi_e, si));
    ctx.mge_neg[i] = std::max(0.0, box_max(lo_e, hi_e, Eigen::VectorXd(-si)));
    // Closed gates require x's_i <= -margin so that the indicator replay
    // (>= 0 means active) matches the assignment exactly.
    ctx.margin[i] = 1e-9 * std::max(1.0, std::max(ctx.mg_pos[i], ctx.mg_neg[i]));
    ctx.margin_e[i] = 1e-9 * std::max(1.0, std::max(ctx.mge_pos[i], ctx.mge_neg[i]));
  }
  ctx.mx.resize(ctx.d);
  ctx.me.resize(ctx.d);
  for (Eigen::Index k = 0; k < ctx.d; ++k) {
    ctx.mx[k] = std::max(std::abs(ctx.lo[k]), std::abs(ctx.hi[k]));
    ctx.me[k] = std::max(std::abs(lo_e[k]), std::abs(hi_e[k]));
  }
  double ymax = 0.0, ymax_e = 0.0;
  for (Eigen::Index i = 0; i < ctx.p; ++i) {
    const Eigen::VectorXd wi = ctx.w.row(i).transpose();
    ymax += std::max(std::abs(box_max(ctx.lo, ctx.hi, wi)),
                     std::abs(box_max(ctx.lo, ctx.hi, Eigen::VectorXd(-wi))));
    ymax_e += std::max(std::abs(box_max(lo_e, hi_e, wi)),
                       std::abs(box_max(lo_e, hi_e, Eigen::VectorXd(-wi))));
  }
  ctx.mo = ymax + ymax_e + 1.0;
  return ctx;
}

// Full big-M relaxation with per-binary bounds (0 = fixed closed,
// 1 = fixed open, -1 = relaxed to [0,1]).
ConicProblem build_relaxation(const MicpContext& ctx, const std::vector<int8_t>& fix) {
  ConicProblem problem(ctx.var_count());
  problem.objective_coeff(ctx.valpha(), -1.0);  // maximize alpha

  for (Eigen::Index k = 0; k < ctx.d; ++k) {
    problem.add_inequality({{ctx.vx(k), 1.0}}, ctx.hi[k]);
    problem.add_inequality({{ctx.vx(k), -1.0}}, -ctx.lo[k]);
    problem.add_inequality({{ctx.veps(k), 1.0}}, ctx.eps);
    problem.add_inequality({{ctx.veps(k), -1.0}}, ctx.eps);
  }
  for (int b = 0; b < ctx.binaries(); ++b) {
    const double lb = fix[static_cast<std::size_t>(b)] == 1 ? 1.0 : 0.0;
    const double ub = fix[static_cast<std::size_t>(b)] == 0 ? 0.0 : 1.0;
    problem.add_inequality({{ctx.binary_var(b), 1.0}}, ub);
    problem.add_inequality({{ctx.binary_var(b), -1.0}}, -lb);
  }

  std::vector<std::pair<int, double>> row;
  auto gate_rows = [&](bool perturbed) {
    for (Eigen::Index i = 0; i < ctx.p; ++i) {
      const int gate = perturbed ? ctx.veta(i) : ctx.vgamma(i);
      const double mpos = perturbed ? ctx.mge_pos[i] : ctx.mg_pos[i];
      const double mneg = perturbed ? ctx.mge_neg[i] : ctx.mg_neg[i];
      const double mu = perturbed ? ctx.margin_e[i] : ctx.margin[i];
      // x's_i <= (Mpos + mu) g - mu  and  -x's_i <= Mneg (1 - g)
      row.clear();
      for (Eigen::Index k = 0; k < ctx.d; ++k) {
        if (ctx.s(i, k) == 0.0) continue;
        row.push_back({ctx.vx(k), ctx.s(i, k)});
        if (perturbed) row.push_back({ctx.veps(k), ctx.s(i, k)});
      }
      row.push_back({gate, -(mpos + mu)});
      problem.add_inequality(row, -mu);
      row.clear();
      for (Eigen::Index k = 0; k < ctx.d; ++k) {
        if (ctx.s(i, k) == 0.0) continue;
        row.push_back({ctx.vx(k), -ctx.s(i, k)});
        if (perturbed) row.push_back({ctx.veps(k), -ctx.s(i, k)});
      }
      row.push_back({gate, mneg});
      problem.add_inequality(row, mneg);
    }
  };
  gate_rows(false);
  gate_rows(true);

  // Product linearization: A models gamma_i * x, B models eta_i * x_eps.
  for (Eigen::Index i = 0; i < ctx.p; ++i) {
    for (Eigen::Index k = 0; k < ctx.d; ++k) {
      const double mxk = ctx.mx[k];
      problem.add_inequality(
          {{ctx.vx(k), 1.0}, {ctx.va(i, k), -1.0}, {ctx.vgamma(i), mxk}}, mxk);
      problem.add_inequality(
          {{ctx.vx(k), -1.0}, {ctx.va(i, k), 1.0}, {ctx.vgamma(i), mxk}}, mxk);
      problem.add_inequality({{ctx.va(i, k), 1.0}, {ctx.vgamma(i), -mxk}}, 0.0);
      problem.add_inequality({{ctx.va(i, k), -1.0}, {ctx.vgamma(i), -mxk}}, 0.0);

      const double mek = ctx.me[k];
      problem.add_inequality({{ctx.vx(k), 1.0},
                              {ctx.veps(k), 1.0},
                              {ctx.vb(i, k), -1.0},
                              {ctx.veta(i), mek}},
                             mek);
      problem.add_inequality({{ctx.vx(k), -1.0},
                              {ctx.veps(k), -1.0},
                              {ctx.vb(i, k), 1.0},
                              {ctx.veta(i), mek}},
                             mek);
      problem.add_inequality({{ctx.vb(i, k), 1.0}, {ctx.veta(i), -mek}}, 0.0);
      problem.add_inequality({{ctx.vb(i, k), -1.0}, {ctx.veta(i), -mek}}, 0.0);
    }
  }

  // Objective linearization over D = yhat_eps - yhat (biases cancel).
  auto push_diff = [&](double sign) {
    for (Eigen::Index i = 0; i < ctx.p; ++i)
      for (Eigen::Index k = 0; k < ctx.d; ++k) {
        if (ctx.w(i, k) == 0.0) continue;
        row.push_back({ctx.vb(i, k), sign * ctx.w(i, k)});
        row.push_back({ctx.va(i, k), -sign * ctx.w(i, k)});
      }
  };
  const double mo = ctx.mo;
  row.clear();
  push_diff(1.0);
  row.push_back({ctx.vzeta(), -mo});
  problem.add_inequality(row, 0.0);  // D <= Mo zeta
  row.clear();
  push_diff(-1.0);
  row.push_back({ctx.vzeta(), mo});
  problem.add_inequality(row, mo);  // D >= Mo (zeta - 1)
  row.clear();
  row.push_back({ctx.valpha(), 1.0});
  push_diff(-1.0);
  row.push_back({ctx.vzeta(), mo});
  problem.add_inequality(row, mo);  // alpha <= D + Mo (1 - zeta)
  row.clear();
  row.push_back({ctx.valpha(), -1.0});
  push_diff(1.0);
  row.push_back({ctx.vzeta(), mo});
  problem.add_inequality(row, mo);  // alpha >= D - Mo (1 - zeta)
  row.clear();
  row.push_back({ctx.valpha(), 1.0});
  push_diff(1.0);
  row.push_back({ctx.vzeta(), -mo});
  problem.add_inequality(row, 0.0);  // alpha <= -D + Mo zeta
  row.clear();
  row.push_back({ctx.valpha(), -1.0});
  push_diff(-1.0);
  row.push_back({ctx.vzeta(), -mo});
  problem.add_inequality(row, 0.0);  // alpha >= -D - Mo zeta
  return problem;
}

struct LeafResult {
  bool feasible = false;
  double value = 0.0;  // replayed |f(x) - f(x+eps)|
  Eigen::VectorXd x;
  Eigen::VectorXd eps;
  int sign = 1;
};

// Fixed-gate LP over (x, eps) only: the MICP with all binaries pinned
// presolves to this. Solved for one sign of the deviation.
LeafResult solve_leaf_sign(const MicpContext& ctx, const ScnnModel& model,
                           const std::vector<int8_t>& gamma, const std::vector<int8_t>& eta,
                           double sign) {
  ConicProblem problem(static_cast<int>(2 * ctx.d));
  // Objective coefficients: sign * (sum_eta w (x+eps) - sum_gamma w x).
  Eigen::VectorXd coef_x = Eigen::VectorXd::Zero(ctx.d);
  Eigen::VectorXd coef_e = Eigen::VectorXd::Zero(ctx.d);
  for (Eigen::Index i = 0; i < ctx.p; ++i) {
    if (eta[static_cast<std::size_t>(i)] == 1) {
      coef_x += ctx.w.row(i).transpose();
      coef_e += ctx.w.row(i).transpose();
    }
    if (gamma[static_cast<std::size_t>(i)] == 1) coef_x -= ctx.w.row(i).transpose();
  }
  for (Eigen::Index k = 0; k < ctx.d; ++k) {
    problem.objective_coeff(static_cast<int>(k), -sign * coef_x[k]);
    problem.objective_coeff(static_cast<int>(ctx.d + k), -sign * coef_e[k]);
    problem.add_inequality({{static_cast<int>(k), 1.0}}, ctx.hi[k]);
    problem.add_inequality({{static_cast<int>(k), -1.0}}, -ctx.lo[k]);
    problem.add_inequality({{static_cast<int>(ctx.d + k), 1.0}}, ctx.eps);
    problem.add_inequality({{static_cast<int>(ctx.d + k), -1.0}}, ctx.eps);
  }
  std::vector<std::pair<int, double>> row;
  for (Eigen::Index i = 0; i < ctx.p; ++i) {
    const bool open_gate = gamma[static_cast<std::size_t>(i)] == 1;
    row.clear();
    const double gsign = open_gate ? -1.0 : 1.0;  // open: x's >= 0, closed: x's <= -mu
    for (Eigen::Index k = 0; k < ctx.d; ++k)
      if (ctx.s(i, k) != 0.0) row.push_back({static_cast<int>(k), gsign * ctx.s(i, k)});
    if (!row.empty()) problem.add_inequality(row, open_gate ? 0.0 : -ctx.margin[i]);

    const bool open_eta = eta[static_cast<std::size_t>(i)] == 1;
    row.clear();
    const double hsign = open_eta ? -1.0 : 1.0;
    for (Eigen::Index k = 0; k < ctx.d; ++k)
      if (ctx.s(i, k) != 0.0) {
        row.push_back({static_cast<int>(k), hsign * ctx.s(i, k)});
        row.push_back({static_cast<int>(ctx.d + k), hsign * ctx.s(i, k)});
      }
    if (!row.empty()) problem.add_inequality(row, open_eta ? 0.0 : -ctx.margin_e[i]);
  }

  LeafResult out;
  auto report = solve_lp(problem, 1e-9);
  if (report.status != SolveStatus::optimal) return out;
  out.feasible = true;
  out.x = report.primal.head(ctx.d);
  out.eps = report.primal.segment(ctx.d, ctx.d);
  out.sign = sign > 0 ? 1 : 0;
  out.value = std::abs(predict_standardized(model, out.x) -
                       predict_standardized(model, Eigen::VectorXd(out.x + out.eps)));
  return out;
}

LeafResult solve_leaf(const MicpContext& ctx, const ScnnModel& model,
                      const std::vector<int8_t>& gamma, const std::vector<int8_t>& eta) {
  LeafResult best = solve_leaf_sign(ctx, model, gamma, eta, 1.0);
  LeafResult neg = solve_leaf_sign(ctx, model, gamma, eta, -1.0);
  if (!best.feasible || (neg.feasible && neg.value > best.value)) return neg;
  return best;
}

struct BnbNode {
  std::vector<int8_t> fix;
  double bound = 0.0;
  int depth = 0;
  long long id = 0;
  Eigen::VectorXd bin_values;
};

struct NodeOrder {
  bool operator()(const BnbNode& a, const BnbNode& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;  // best bound first
    if (a.depth != b.depth) return a.depth < b.depth;  // plunge on ties
    return a.id > b.id;
  }
};

StabilityCertificate certify_bnb(const MicpContext& ctx, const ScnnModel& model,
                                 double gap_target) {
  StabilityCertificate cert;
  cert.argmax_x = Eigen::VectorXd::Zero(ctx.d);
  cert.argmax_eps = Eigen::VectorXd::Zero(ctx.d);
  cert.gamma_bits.assign(static_cast<std::size_t>(ctx.p), 0);
  cert.eta_bits.assign(static_cast<std::size_t>(ctx.p), 0);

  double incumbent = -1.0;
  auto consider_leaf = [&](const std::vector<int8_t>& gamma, const std::vector<int8_t>& eta) {
    const LeafResult leaf = solve_leaf(ctx, model, gamma, eta);
    if (leaf.feasible && leaf.value > incumbent) {
      incumbent = leaf.value;
      cert.argmax_x = leaf.x;
      cert.argmax_eps = leaf.eps;
      for (Eigen::Index i = 0; i < ctx.p; ++i) {
        cert.gamma_bits[static_cast<std::size_t>(i)] = gamma[static_cast<std::size_t>(i)];
        cert.eta_bits[static_cast<std::size_t>(i)] = eta[static_cast<std::size_t>(i)];
      }
      cert.zeta = leaf.sign;
    }
  };

  const int nb = ctx.binaries();
  long long next_id = 0;
  std::priority_queue<BnbNode, std::vector<BnbNode>, NodeOrder> queue;

  auto evaluate = [&](BnbNode& node) -> bool {
    auto problem = build_relaxation(ctx, node.fix);
    auto report = solve_lp(problem, 1e-9);
    ++cert.nodes_explored;
    if (report.status != SolveStatus::optimal) return false;
    node.bound = -report.objective_value;  // alpha was maximized
    node.bin_values.resize(nb);
    for (int b = 0; b < nb; ++b) node.bin_values[b] = report.primal[ctx.binary_var(b)];
    // Incumbent from rounding the relaxed binaries and replaying.
    std::vector<int8_t> gamma(static_cast<std::size_t>(ctx.p));
    std::vector<int8_t> eta(static_cast<std::size_t>(ctx.p));
    for (Eigen::Index i = 0; i < ctx.p; ++i) {
      gamma[static_cast<std::size_t>(i)] = node.bin_values[static_cast<int>(i)] >= 0.5;
      eta[static_cast<std::size_t>(i)] =
          node.bin_values[static_cast<int>(ctx.p + i)] >= 0.5;
    }
    consider_leaf(gamma, eta);
    return true;
  };

  BnbNode root;
  root.fix.assign(static_cast<std::size_t>(nb), -1);
  root.id = next_id++;
  if (!evaluate(root)) {
    cert.l_eps = 0.0;
    return cert;
  }
  queue.push(std::move(root));

  while (!queue.empty()) {
    BnbNode node = queue.top();
    queue.pop();
    if (node.bound <= incumbent + gap_target) {
      cert.bound_gap = std::max(0.0, node.bound - incumbent);
      break;
    }
    // Most fractional free binary; ties resolved by index.
    int branch = -1;
    double frac_score = -1.0;
    for (int b = 0; b < nb; ++b) {
      if (node.fix[static_cast<std::size_t>(b)] != -1) continue;
      const double v = node.bin_values[b];
      const double score = 0.5 - std::abs(v - 0.5);
      if (score > frac_score + 1e-12) {
        frac_score = score;
        branch = b;
      }
    }
    if (branch == -1 || frac_score <= 1e-7) continue;  // integral relaxation
    for (int8_t value : {int8_t{0}, int8_t{1}}) {
      BnbNode child;
      child.fix = node.fix;
      child.fix[static_cast<std::size_t>(branch)] = value;
      child.depth = node.depth + 1;
      child.id = next_id++;
      if (evaluate(child) && child.bound > incumbent + gap_target) queue.push(std::move(child));
    }
  }

  cert.l_eps = std::max(0.0, incumbent);
  return cert;
}

StabilityCertificate certify_exhaustive(const MicpContext& ctx, const ScnnModel& model) {
  StabilityCertificate cert;
  const Eigen::Index p = ctx.p;

  // Realizable gate assignments, found by feasibility LPs over the box
  // (and the inflated box for the perturbed copy).
  auto region_feasible = [&](std::uint32_t combo, bool perturbed) {
    std::vector<int8_t> gates(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) gates[static_cast<std::size_t>(i)] = (combo >> i) & 1;
    ConicProblem problem(static_cast<int>(ctx.d));
    const Eigen::VectorXd lo = perturbed ? Eigen::VectorXd(ctx.lo.array() - ctx.eps) : ctx.lo;
    const Eigen::VectorXd hi = perturbed ? Eigen::VectorXd(ctx.hi.array() + ctx.eps) : ctx.hi;
    for (Eigen::Index k = 0; k < ctx.d; ++k) {
      problem.add_inequality({{static_cast<int>(k), 1.0}}, hi[k]);
      problem.add_inequality({{static_cast<int>(k), -1.0}}, -lo[k]);
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      const bool open_gate = gates[static_cast<std::size_t>(i)] == 1;
      std::vector<std::pair<int, double>> row;
      const double gsign = open_gate ? -1.0 : 1.0;
      for (Eigen::Index k = 0; k < ctx.d; ++k)
        if (ctx.s(i, k) != 0.0) row.push_back({static_cast<int>(k), gsign * ctx.s(i, k)});
      if (!row.empty())
        problem.add_inequality(
            row, open_gate ? 0.0 : -(perturbed ? ctx.margin_e[i] : ctx.margin[i]));
    }
    return solve_lp(problem, 1e-9).status == SolveStatus::optimal;
  };

  std::vector<std::uint32_t> gamma_combos, eta_combos;
  const std::uint32_t total = 1u << p;
  for (std::uint32_t combo = 0; combo < total; ++combo) {
    if (region_feasible(combo, false)) gamma_combos.push_back(combo);
    if (region_feasible(combo, true)) eta_combos.push_back(combo);
  }

  struct Pair {
    std::uint32_t gamma;
    std::uint32_t eta;
  };
  std::vector<Pair> pairs;
  pairs.reserve(gamma_combos.size() * eta_combos.size());
  for (auto g : gamma_combos)
    for (auto h : eta_combos) pairs.push_back({g, h});

  std::vector<double> values(pairs.size(), -1.0);
#pragma omp parallel for schedule(dynamic, 8)
  for (std::int64_t idx = 0; idx < static_cast<std::int64_t>(pairs.size()); ++idx) {
    std::vector<int8_t> gamma(static_cast<std::size_t>(p)), eta(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < p; ++i) {
      gamma[static_cast<std::size_t>(i)] = (pairs[static_cast<std::size_t>(idx)].gamma >> i) & 1;
      eta[static_cast<std::size_t>(i)] = (pairs[static_cast<std::size_t>(idx)].eta >> i) & 1;
    }
    const LeafResult leaf = solve_leaf(ctx, model, gamma, eta);
    if (leaf.feasible) values[static_cast<std::size_t>(idx)] = leaf.value;
  }

  std::size_t best = 0;
  double best_value = -1.0;
  for (std::size_t idx = 0; idx < values.size(); ++idx)
    if (values[idx] > best_value) {
      best_value = values[idx];
      best = idx;
    }

  cert.nodes_explored = static_cast<long long>(pairs.size());
  cert.gamma_bits.assign(static_cast<std::size_t>(p), 0);
  cert.eta_bits.assign(static_cast<std::size_t>(p), 0);
  cert.argmax_x = Eigen::VectorXd::Zero(ctx.d);
  cert.argmax_eps = Eigen::VectorXd::Zero(ctx.d);
  if (best_value < 0.0) return cert;

  std::vector<int8_t> gamma(static_cast<std::size_t>(p)), eta(static_cast<std::size_t>(p));
  for (Eigen::Index i = 0; i < p; ++i) {
    gamma[static_cast<std::size_t>(i)] = (pairs[best].gamma >> i) & 1;
    eta[static_cast<std::size_t>(i)] = (pairs[best].eta >> i) & 1;
  }
  const LeafResult leaf = solve_leaf(ctx, model, gamma, eta);
  cert.l_eps = leaf.value;
  cert.argmax_x = leaf.x;
  cert.argmax_eps = leaf.eps;
  for (Eigen::Index i = 0; i < p; ++i) {
    cert.gamma_bits[static_cast<std::size_t>(i)] = gamma[static_cast<std::size_t>(i)];
    cert.eta_bits[static_cast<std::size_t>(i)] = eta[static_cast<std::size_t>(i)];
  }
  cert.zeta = leaf.sign;
  cert.bound_gap = 0.0;
  return cert;
}

}  // namespace

StabilityCertificate certify_stability(const ScnnModel& model, const StabilityDomain& domain,
                                       CertifyMode mode, double gap_target) {
  domain.validate(model.dim());
  const MicpContext ctx = make_context(model, domain);
  if (mode == CertifyMode::exhaustive && ctx.binaries() > 22)
    throw std::invalid_argument("certify: exhaustive mode limited to 2P+1 <= 22 binaries");

  StabilityCertificate cert = mode == CertifyMode::exhaustive
                                  ? certify_exhaustive(ctx, model)
                                  : certify_bnb(ctx, model, gap_target);

  const Eigen::Index d_slot = model.scaler.means.size() - 1;
  cert.l_eps_original =
      model.scaler.fitted() ? cert.l_eps * model.scaler.stdevs[d_slot] : cert.l_eps;
  cert.big_m_values.clear();
  for (Eigen::Index i = 0; i < ctx.p; ++i) {
    cert.big_m_values.push_back(ctx.mg_pos[i]);
    cert.big_m_values.push_back(ctx.mg_neg[i]);
    cert.big_m_values.push_back(ctx.mge_pos[i]);
    cert.big_m_values.push_back(ctx.mge_neg[i]);
  }
  cert.big_m_values.push_back(ctx.mo);
  return cert;
}

namespace {

template <bool Parallel>
double scan_impl(const ScnnModel& model, const StabilityDomain& domain, int grid_density) {
  if (grid_density < 2) throw std::invalid_argument("scan: grid density must be >= 2");
  domain.validate(model.dim());
  const Eigen::Index d = model.dim();
  long long points = 1;
  for (Eigen::Index k = 0; k < d; ++k) points *= grid_density;
  const long long corners = 1ll << d;

  double best = 0.0;
#pragma omp parallel for schedule(static) reduction(max : best) if (Parallel)
  for (long long flat = 0; flat < points; ++flat) {
    Eigen::VectorXd x(d);
    long long rem = flat;
    for (Eigen::Index k = 0; k < d; ++k) {
      const long long step = rem % grid_density;
      rem /= grid_density;
      x[k] = domain.lo[k] +
             (domain.hi[k] - domain.lo[k]) * static_cast<double>(step) /
                 static_cast<double>(grid_density - 1);
    }
    const double fx = predict_standardized(model, x);
    for (long long corner = 0; corner < corners; ++corner) {
      Eigen::VectorXd xe = x;
      for (Eigen::Index k = 0; k < d; ++k)
        xe[k] += ((corner >> k) & 1) ? domain.eps : -domain.eps;
      best = std::max(best, std::abs(fx - predict_standardized(model, xe)));
    }
  }
  return best;
}

}  // namespace

double empirical_deviation_scan(const ScnnModel& model, const StabilityDomain& domain,
                                int grid_density) {
  return scan_impl<true>(model, domain, grid_density);
}

double empirical_deviation_scan_serial(const ScnnModel& model, const StabilityDomain& domain,
                                       int grid_density) {
  return scan_impl<false>(model, domain, grid_density);
}

}  // namespace wadiro
