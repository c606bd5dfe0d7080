#include "wadiro/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace wadiro {

double w1_1d(std::vector<double> u, std::vector<double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("w1_1d: length mismatch");
  if (u.empty()) throw std::invalid_argument("w1_1d: empty sample");
  std::sort(u.begin(), u.end());
  std::sort(v.begin(), v.end());
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += std::abs(u[i] - v[i]);
  return acc / static_cast<double>(u.size());
}

Eigen::MatrixXd sw_projections(Eigen::Index dim, int projections, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd theta(projections, dim);
  for (int l = 0; l < projections; ++l) {
    Eigen::VectorXd t(dim);
    do {
      for (Eigen::Index k = 0; k < dim; ++k) t[k] = normal(rng);
    } while (t.norm() < 1e-12);
    theta.row(l) = t.transpose() / t.norm();
  }
  return theta;
}

namespace {

template <bool Parallel>
double sw_impl(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, int projections,
               std::uint64_t seed) {
  if (u.rows() != v.rows()) throw std::invalid_argument("sw_distance: sample count mismatch");
  if (u.cols() != v.cols()) throw std::invalid_argument("sw_distance: dimension mismatch");
  if (u.rows() == 0) throw std::invalid_argument("sw_distance: empty sample");
  if (projections < 1) throw std::invalid_argument("sw_distance: need at least one projection");

  const Eigen::MatrixXd theta = sw_projections(u.cols(), projections, seed);
  std::vector<double> per_projection(static_cast<std::size_t>(projections));
#pragma omp parallel for schedule(static) if (Parallel)
  for (int l = 0; l < projections; ++l) {
    const Eigen::VectorXd pu = u * theta.row(l).transpose();
    const Eigen::VectorXd pv = v * theta.row(l).transpose();
    per_projection[static_cast<std::size_t>(l)] =
        w1_1d(std::vector<double>(pu.data(), pu.data() + pu.size()),
              std::vector<double>(pv.data(), pv.data() + pv.size()));
  }
  // Fixed-order reduction keeps the result identical for any thread count.
  double acc = 0.0;
  for (double x : per_projection) acc += x;
  return acc / static_cast<double>(projections);
}

}  // namespace

double sw_distance(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, int projections,
                   std::uint64_t seed) {
  return sw_impl<true>(u, v, projections, seed);
}

double sw_distance_serial(const Eigen::MatrixXd& u, const Eigen::MatrixXd& v, int projections,
                          std::uint64_t seed) {
  return sw_impl<false>(u, v, projections, seed);
}

// --- benchmark functions ----------------------------------------------

std::string to_string(BenchmarkFunction function) {
  switch (function) {
    case BenchmarkFunction::mccormick: return "mccormick";
    case BenchmarkFunction::pgp: return "pgp";
    case BenchmarkFunction::keane: return "keane";
    case BenchmarkFunction::ackley: return "ackley";
  }
  return "ackley";
}

BenchmarkFunction benchmark_from_string(const std::string& name) {
  if (name == "mccormick") return BenchmarkFunction::mccormick;
  if (name == "pgp") return BenchmarkFunction::pgp;
  if (name == "keane") return BenchmarkFunction::keane;
  if (name == "ackley") return BenchmarkFunction::ackley;
  throw std::invalid_argument("unknown benchmark function: " + name);
}

void BenchmarkSpec::validate() const {
  if (n_samples < 1) throw std::invalid_argument("benchmark: n_samples must be >= 1");
  if (function == BenchmarkFunction::mccormick || function == BenchmarkFunction::pgp) {
    if (dim != 2) throw std::invalid_argument("benchmark: this function is two-dimensional");
  } else if (dim < 2) {
    throw std::invalid_argument("benchmark: dimension must be >= 2");
  }
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> BenchmarkSpec::domain() const {
  Eigen::VectorXd lo(dim), hi(dim);
  switch (function) {
    case BenchmarkFunction::mccormick:
      lo << -1.5, -3.0;
      hi << 4.0, 4.0;
      break;
    case BenchmarkFunction::pgp:
      lo.setZero();
      hi.setOnes();
      break;
    case BenchmarkFunction::keane:
      lo.setZero();
      hi.setConstant(10.0);
      break;
    case BenchmarkFunction::ackley:
      lo.setConstant(-32.768);
      hi.setConstant(32.768);
      break;
  }
  return {lo, hi};
}

namespace {

double goldstein_price(double x, double y) {
  const double a = 1.0 + (x + y + 1.0) * (x + y + 1.0) *
                             (19.0 - 14.0 * x + 3.0 * x * x - 14.0 * y + 6.0 * x * y +
                              3.0 * y * y);
  const double b = 30.0 + (2.0 * x - 3.0 * y) * (2.0 * x - 3.0 * y) *
                              (18.0 - 32.0 * x + 12.0 * x * x + 48.0 * y - 36.0 * x * y +
                               27.0 * y * y);
  return a * b;
}

}  // namespace

double benchmark_eval(const BenchmarkSpec& spec, const Eigen::VectorXd& x) {
  spec.validate();
  if (x.size() != spec.dim) throw std::invalid_argument("benchmark: input dimension mismatch");
  const auto [lo, hi] = spec.domain();
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (x[k] < lo[k] - 1e-12 || x[k] > hi[k] + 1e-12)
      throw std::invalid_argument("benchmark: input outside the canonical domain");

  switch (spec.function) {
    case BenchmarkFunction::mccormick:
      return std::sin(x[0] + x[1]) + (x[0] - x[1]) * (x[0] - x[1]) - 1.5 * x[0] +
             2.5 * x[1] + 1.0;
    case BenchmarkFunction::pgp: {
      // Log-rescaled Goldstein-Price on [0,1]^2.
      const double xb = 4.0 * x[0] - 2.0;
      const double yb = 4.0 * x[1] - 2.0;
      return (std::log(goldstein_price(xb, yb)) - 8.693) / 2.427;
    }
    case BenchmarkFunction::keane: {
      double sum_cos4 = 0.0, prod_cos2 = 1.0, denom = 0.0;
      for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double c = std::cos(x[k]);
        sum_cos4 += c * c * c * c;
        prod_cos2 *= c * c;
        denom += static_cast<double>(k + 1) * x[k] * x[k];
      }
      if (denom <= 0.0)
        throw std::invalid_argument("benchmark: keane is singular at the origin");
      return -std::abs(sum_cos4 - 2.0 * prod_cos2) / std::sqrt(denom);
    }
    case BenchmarkFunction::ackley: {
      const double n = static_cast<double>(x.size());
      const double rms = std::sqrt(x.squaredNorm() / n);
      double mean_cos = 0.0;
      for (Eigen::Index k = 0; k < x.size(); ++k)
        mean_cos += std::cos(2.0 * std::numbers::pi * x[k]);
      mean_cos /= n;
      return -20.0 * std::exp(-0.2 * rms) - std::exp(mean_cos) + 20.0 + std::numbers::e;
    }
  }
  throw std::invalid_argument("benchmark: unknown function");
}

Dataset sample_benchmark(const BenchmarkSpec& spec) {
  spec.validate();
  const auto [lo, hi] = spec.domain();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Dataset out;
  out.features.resize(spec.n_samples, spec.dim);
  out.labels.resize(spec.n_samples);
  for (int r = 0; r < spec.n_samples; ++r) {
    for (int k = 0; k < spec.dim; ++k)
      out.features(r, k) = lo[k] + (hi[k] - lo[k]) * unif(rng);
    out.labels[r] = benchmark_eval(spec, out.features.row(r).transpose());
  }
  out.feature_names.resize(static_cast<std::size_t>(spec.dim));
  for (int k = 0; k < spec.dim; ++k)
    out.feature_names[static_cast<std::size_t>(k)] = "x" + std::to_string(k);
  return out;
}

// --- outlier generation -----------------------------------------------

void OutlierGenConfig::validate() const {
  if (m_bar < 0) throw std::invalid_argument("outliers: m_bar must be >= 0");
  if (!(phi > 0.0)) throw std::invalid_argument("outliers: phi must be positive");
  if (projections < 1) throw std::invalid_argument("outliers: projections must be >= 1");
  if (max_rejects < 1) throw std::invalid_argument("outliers: max_rejects must be >= 1");
  if (!(proposal_scale > 0.0)) throw std::invalid_argument("outliers: proposal scale");
}

namespace {

Eigen::MatrixXd stack_samples(const Eigen::MatrixXd& base, const std::vector<Eigen::VectorXd>& extra) {
  Eigen::MatrixXd out(base.rows() + static_cast<Eigen::Index>(extra.size()), base.cols());
  out.topRows(base.rows()) = base;
  for (std::size_t i = 0; i < extra.size(); ++i)
    out.row(base.rows() + static_cast<Eigen::Index>(i)) = extra[i].transpose();
  return out;
}

}  // namespace

std::pair<Dataset, OutlierAudit> generate_outliers(const Dataset& base,
                                                   const OutlierGenConfig& cfg,
                                                   const InlierSampler& fresh_inlier) {
  cfg.validate();
  base.validate();
  const Eigen::Index n = base.size();
  const Eigen::Index k = base.dim() + 1;  // outliers live in sample space (x, y)

  Eigen::MatrixXd z(n, k);
  z.leftCols(base.dim()) = base.features;
  z.col(base.dim()) = base.labels;

  // Proposal region: the data bounding box inflated around its center.
  Eigen::VectorXd lo = z.colwise().minCoeff();
  Eigen::VectorXd hi = z.colwise().maxCoeff();
  const Eigen::VectorXd center = 0.5 * (lo + hi);
  const Eigen::VectorXd half = 0.5 * (hi - lo).cwiseMax(1e-9);
  lo = center - cfg.proposal_scale * half;
  hi = center + cfg.proposal_scale * half;

  std::mt19937_64 proposal_rng(cfg.seed + 1);
  std::mt19937_64 inlier_rng(cfg.seed + 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto propose = [&]() {
    Eigen::VectorXd zt(k);
    if (cfg.proposal == OutlierProposal::uniform_box) {
      for (Eigen::Index c = 0; c < k; ++c)
        zt[c] = lo[c] + (hi[c] - lo[c]) * unif(proposal_rng);
    } else {
      for (Eigen::Index c = 0; c < k; ++c)
        zt[c] = center[c] + cfg.proposal_scale * half[c] * normal(proposal_rng);
    }
    return zt;
  };

  auto draw_inlier = [&]() -> Eigen::VectorXd {
    if (fresh_inlier) return fresh_inlier(inlier_rng);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    return z.row(pick(inlier_rng)).transpose();
  };

  std::vector<Eigen::VectorXd> accepted;
  OutlierAudit audit;
  for (int m = 0; m < cfg.m_bar; ++m) {
    // Left side: base plus previous outliers plus one fresh inlier, so
    // both sides carry N + m points.
    std::vector<Eigen::VectorXd> left_extra = accepted;
    left_extra.push_back(draw_inlier());
    const Eigen::MatrixXd left = stack_samples(z, left_extra);

    bool found = false;
    int rejects = 0;
    while (rejects < cfg.max_rejects) {
      const Eigen::VectorXd candidate = propose();
      std::vector<Eigen::VectorXd> right_extra = accepted;
      right_extra.push_back(candidate);
      const Eigen::MatrixXd right = stack_samples(z, right_extra);
      const double shift = sw_distance(left, right, cfg.projections, cfg.seed);
      if (shift >= cfg.phi) {
        accepted.push_back(candidate);
        audit.shifts.push_back(shift);
        audit.rejections.push_back(rejects);
        found = true;
        break;
      }
      ++rejects;
    }
    if (!found) {
      Dataset prefix;
      prefix.features.resize(static_cast<Eigen::Index>(accepted.size()), base.dim());
      prefix.labels.resize(static_cast<Eigen::Index>(accepted.size()));
      for (std::size_t i = 0; i < accepted.size(); ++i) {
        prefix.features.row(static_cast<Eigen::Index>(i)) =
            accepted[i].head(base.dim()).transpose();
        prefix.labels[static_cast<Eigen::Index>(i)] = accepted[i][base.dim()];
      }
      throw OutlierBudgetError(std::move(prefix), std::move(audit),
                               static_cast<std::size_t>(cfg.m_bar));
    }
  }

  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(accepted.size()), base.dim());
  out.labels.resize(static_cast<Eigen::Index>(accepted.size()));
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = accepted[i].head(base.dim()).transpose();
    out.labels[static_cast<Eigen::Index>(i)] = accepted[i][base.dim()];
  }
  out.feature_names = base.feature_names;
  return {std::move(out), std::move(audit)};
}

// --- corruption pipeline ----------------------------------------------

void CorruptionSpec::validate() const {
  if (!(outlier_fraction >= 0.0 && outlier_fraction < 1.0))
    throw std::invalid_argument("corruption: outlier fraction outside [0,1)");
  if (noise_sigma < 0.0) throw std::invalid_argument("corruption: negative noise sigma");
  if (noise_test) throw std::invalid_argument("corruption: the test split stays clean");
}

namespace {

Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& rows, SplitTag tag) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(rows[i]);
    out.labels[static_cast<Eigen::Index>(i)] = data.labels[rows[i]];
  }
  out.feature_names = data.feature_names;
  out.split_tag = tag;
  return out;
}

void append_rows(Dataset& target, const Dataset& extra, const std::vector<Eigen::Index>& rows) {
  const Eigen::Index old_n = target.size();
  target.features.conservativeResize(old_n + static_cast<Eigen::Index>(rows.size()),
                                     Eigen::NoChange);
  target.labels.conservativeResize(old_n + static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    target.features.row(old_n + static_cast<Eigen::Index>(i)) = extra.features.row(rows[i]);
    target.labels[old_n + static_cast<Eigen::Index>(i)] = extra.labels[rows[i]];
  }
}

}  // namespace

CorruptedSplits corrupt_and_split(const Dataset& data, const CorruptionSpec& corr,
                                  std::array<double, 3> ratios, std::uint64_t seed,
                                  const InlierSampler& fresh_inlier) {
  corr.validate();
  data.validate();
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
    throw std::invalid_argument("corruption: split ratios must sum to 1");

  const Eigen::Index n = data.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_train = static_cast<Eigen::Index>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto n_val = static_cast<Eigen::Index>(std::llround(ratios[1] * static_cast<double>(n)));
  const Eigen::Index n_test = n - n_train - n_val;
  if (n_train < 1 || n_val < 0 || n_test < 0)
    throw std::invalid_argument("corruption: dataset too small for the requested split");

  std::vector<Eigen::Index> train_rows(order.begin(), order.begin() + n_train);
  std::vector<Eigen::Index> val_rows(order.begin() + n_train, order.begin() + n_train + n_val);
  std::vector<Eigen::Index> test_rows(order.begin() + n_train + n_val, order.end());

  CorruptedSplits out;
  out.train = take_rows(data, train_rows, SplitTag::train);
  out.val = take_rows(data, val_rows, SplitTag::val);
  out.test = take_rows(data, test_rows, SplitTag::test);

  if (corr.noise_sigma > 0.0) {
    std::mt19937_64 noise_rng(seed + 1);
    std::normal_distribution<double> normal(0.0, corr.noise_sigma);
    if (corr.noise_train)
      for (Eigen::Index j = 0; j < out.train.size(); ++j) out.train.labels[j] += normal(noise_rng);
    if (corr.noise_val)
      for (Eigen::Index j = 0; j < out.val.size(); ++j) out.val.labels[j] += normal(noise_rng);
  }

  if (corr.outlier_fraction > 0.0) {
    const bool train_only = corr.outlier_split == OutlierSplit::train_only;
    const Eigen::Index pool =
        train_only ? out.train.size() : out.train.size() + out.val.size();
    const auto m_bar = static_cast<int>(
        std::llround(corr.outlier_fraction * static_cast<double>(pool)));
    if (m_bar > 0) {
      // Outliers are generated against the data they will corrupt.
      Dataset base = out.train;
      if (!train_only && out.val.size() > 0) {
        std::vector<Eigen::Index> all_val(static_cast<std::size_t>(out.val.size()));
        std::iota(all_val.begin(), all_val.end(), 0);
        append_rows(base, out.val, all_val);
      }
      OutlierGenConfig gen = corr.generator;
      gen.m_bar = m_bar;
      gen.seed = corr.generator.seed ^ seed;
      auto [outliers, audit] = generate_outliers(base, gen, fresh_inlier);
      out.audit = std::move(audit);
      out.injected_outliers = static_cast<int>(outliers.size());

      std::mt19937_64 assign_rng(seed + 2);
      std::vector<Eigen::Index> to_train, to_val;
      for (Eigen::Index i = 0; i < outliers.size(); ++i) {
        if (train_only) {
          to_train.push_back(i);
        } else {
          const double split_point =
              static_cast<double>(out.train.size()) /
              static_cast<double>(out.train.size() + out.val.size());
          std::uniform_real_distribution<double> unif(0.0, 1.0);
          (unif(assign_rng) < split_point ? to_train : to_val).push_back(i);
        }
      }
      append_rows(out.train, outliers, to_train);
      append_rows(out.val, outliers, to_val);
    }
  }
  return out;
}

}  // namespace wadiro
