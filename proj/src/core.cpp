#include "wadiro/core.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_set>

#include "wadiro/errors.hpp"

namespace wadiro {

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    case SplitTag::unsplit: return "unsplit";
  }
  return "unsplit";
}

void Dataset::validate() const {
  if (features.rows() < 1 || features.cols() < 1)
    throw std::invalid_argument("dataset must have at least one sample and one feature");
  if (labels.size() != features.rows())
    throw std::invalid_argument("label count does not match sample count");
  if (!features.allFinite() || !labels.allFinite())
    throw std::invalid_argument("dataset contains non-finite entries");
}

ActivationPatterns::ActivationPatterns(Eigen::Index rows, Eigen::Index cols)
    : rows_(rows),
      cols_(cols),
      words_per_row_((static_cast<std::size_t>(cols) + 63) / 64),
      words_(static_cast<std::size_t>(rows) * words_per_row_, 0) {}

void ActivationPatterns::set_bit(Eigen::Index j, Eigen::Index i, bool value) {
  auto& w = words_[static_cast<std::size_t>(j) * words_per_row_ +
                   static_cast<std::size_t>(i) / 64];
  const std::uint64_t mask = std::uint64_t{1} << (static_cast<std::size_t>(i) % 64);
  if (value)
    w |= mask;
  else
    w &= ~mask;
}

std::vector<std::uint64_t> ActivationPatterns::column_key(Eigen::Index i) const {
  std::vector<std::uint64_t> key((static_cast<std::size_t>(rows_) + 63) / 64, 0);
  for (Eigen::Index j = 0; j < rows_; ++j)
    if (bit(j, i))
      key[static_cast<std::size_t>(j) / 64] |= std::uint64_t{1}
                                               << (static_cast<std::size_t>(j) % 64);
  return key;
}

bool ActivationPatterns::columns_equal(Eigen::Index a, Eigen::Index b) const {
  for (Eigen::Index j = 0; j < rows_; ++j)
    if (bit(j, a) != bit(j, b)) return false;
  return true;
}

bool ActivationPatterns::operator==(const ActivationPatterns& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ && words_ == other.words_;
}

namespace {

struct KeyHash {
  std::size_t operator()(const std::vector<std::uint64_t>& key) const {
    std::size_t h = 1469598103934665603ull;
    for (auto w : key) {
      h ^= static_cast<std::size_t>(w);
      h *= 1099511628211ull;
    }
    return h;
  }
};

Eigen::MatrixXd draw_gaussian(Eigen::Index count, Eigen::Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(count, dim);
  for (Eigen::Index r = 0; r < count; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) out(r, c) = normal(rng);
  return out;
}

std::vector<std::uint64_t> pattern_column(const Eigen::MatrixXd& features,
                                          const Eigen::VectorXd& s) {
  const Eigen::Index n = features.rows();
  std::vector<std::uint64_t> key((static_cast<std::size_t>(n) + 63) / 64, 0);
  const Eigen::VectorXd prod = features * s;
  for (Eigen::Index j = 0; j < n; ++j)
    if (prod[j] >= 0.0)
      key[static_cast<std::size_t>(j) / 64] |= std::uint64_t{1}
                                               << (static_cast<std::size_t>(j) % 64);
  return key;
}

}  // namespace

SamplingSet gen_sampling_vectors(const Dataset& dataset, int count, std::uint64_t seed,
                                 bool dedup) {
  if (count < 1) throw std::invalid_argument("sampling vector count must be >= 1");
  dataset.validate();

  const Eigen::Index d = dataset.dim();
  Eigen::MatrixXd raw = draw_gaussian(count, d, seed);

  SamplingSet out;
  out.seed = seed;
  out.mean = Eigen::VectorXd::Zero(d);
  out.sigma = Eigen::VectorXd::Ones(d);
  out.dedup_applied = dedup;

  if (!dedup) {
    out.vectors = std::move(raw);
    return out;
  }

  std::unordered_set<std::vector<std::uint64_t>, KeyHash> seen;
  std::vector<Eigen::Index> kept;
  kept.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index r = 0; r < raw.rows(); ++r) {
    auto key = pattern_column(dataset.features, raw.row(r).transpose());
    if (seen.insert(std::move(key)).second) kept.push_back(r);
  }
  out.vectors.resize(static_cast<Eigen::Index>(kept.size()), d);
  for (std::size_t k = 0; k < kept.size(); ++k) out.vectors.row(static_cast<Eigen::Index>(k)) = raw.row(kept[k]);
  return out;
}

SamplingSet gen_sampling_vectors_saturating(const Dataset& dataset, std::uint64_t seed,
                                            int stall_limit, int hard_cap) {
  if (stall_limit < 1 || hard_cap < 1)
    throw std::invalid_argument("stall_limit and hard_cap must be >= 1");
  dataset.validate();

  const Eigen::Index d = dataset.dim();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::unordered_set<std::vector<std::uint64_t>, KeyHash> seen;
  std::vector<Eigen::VectorXd> kept;
  int stall = 0;
  while (stall < stall_limit && static_cast<int>(kept.size()) < hard_cap) {
    Eigen::VectorXd s(d);
    for (Eigen::Index c = 0; c < d; ++c) s[c] = normal(rng);
    auto key = pattern_column(dataset.features, s);
    if (seen.insert(std::move(key)).second) {
      kept.push_back(std::move(s));
      stall = 0;
    } else {
      ++stall;
    }
  }

  SamplingSet out;
  out.seed = seed;
  out.mean = Eigen::VectorXd::Zero(d);
  out.sigma = Eigen::VectorXd::Ones(d);
  out.dedup_applied = true;
  out.vectors.resize(static_cast<Eigen::Index>(kept.size()), d);
  for (std::size_t k = 0; k < kept.size(); ++k) out.vectors.row(static_cast<Eigen::Index>(k)) = kept[k].transpose();
  return out;
}

ActivationPatterns compute_patterns_serial(const Dataset& dataset, const SamplingSet& s) {
  if (dataset.dim() != s.dim())
    throw std::invalid_argument("dataset and sampling set dimensions differ");
  const Eigen::Index n = dataset.size();
  const Eigen::Index p = s.count();
  ActivationPatterns bits(n, p);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) {
      const double inner = dataset.features.row(j).dot(s.vectors.row(i));
      if (inner >= 0.0) bits.set_bit(j, i, true);
    }
  }
  return bits;
}

ActivationPatterns compute_patterns(const Dataset& dataset, const SamplingSet& s) {
  if (dataset.dim() != s.dim())
    throw std::invalid_argument("dataset and sampling set dimensions differ");
  const Eigen::Index n = dataset.size();
  const Eigen::Index p = s.count();
  ActivationPatterns bits(n, p);
#pragma omp parallel for schedule(static)
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) {
      const double inner = dataset.features.row(j).dot(s.vectors.row(i));
      if (inner >= 0.0) bits.set_bit(j, i, true);
    }
  }
  return bits;
}

std::vector<bool> activation_bits(const Eigen::VectorXd& x, const SamplingSet& s) {
  if (x.size() != s.dim())
    throw std::invalid_argument("input and sampling set dimensions differ");
  std::vector<bool> bits(static_cast<std::size_t>(s.count()));
  for (Eigen::Index i = 0; i < s.count(); ++i)
    bits[static_cast<std::size_t>(i)] = x.dot(s.vectors.row(i)) >= 0.0;
  return bits;
}

Eigen::VectorXd lift_sample(const Eigen::VectorXd& x, double y, const SamplingSet& s,
                            bool with_bias) {
  if (!x.allFinite() || !std::isfinite(y))
    throw std::invalid_argument("lift_sample: non-finite input");
  if (x.size() != s.dim())
    throw std::invalid_argument("lift_sample: dimension mismatch");

  const Eigen::Index d = x.size();
  const Eigen::Index p = s.count();
  const Eigen::Index block = p * d;
  Eigen::VectorXd row = Eigen::VectorXd::Zero(2 * block + (with_bias ? 1 : 0) + 1);
  for (Eigen::Index i = 0; i < p; ++i) {
    if (x.dot(s.vectors.row(i)) >= 0.0) {
      row.segment(i * d, d) = x;
      row.segment(block + i * d, d) = x;
    }
  }
  if (with_bias) row[2 * block] = 1.0;
  row[row.size() - 1] = y;
  return row;
}

namespace {

template <bool Parallel>
LiftedDataset lift_impl(const Dataset& dataset, const SamplingSet& s, bool with_bias) {
  dataset.validate();
  if (dataset.dim() != s.dim())
    throw std::invalid_argument("lift_dataset: dimension mismatch");

  const Eigen::Index n = dataset.size();
  const Eigen::Index d = dataset.dim();
  const Eigen::Index p = s.count();
  const Eigen::Index block = p * d;

  LiftedDataset out;
  out.with_bias = with_bias;
  out.feature_dim = d;
  out.pattern_count = p;
  out.lifted.setZero(n, 2 * block + (with_bias ? 1 : 0) + 1);

#pragma omp parallel for schedule(static) if (Parallel)
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd x = dataset.features.row(j).transpose();
    for (Eigen::Index i = 0; i < p; ++i) {
      if (x.dot(s.vectors.row(i)) >= 0.0) {
        out.lifted.row(j).segment(i * d, d) = x.transpose();
        out.lifted.row(j).segment(block + i * d, d) = x.transpose();
      }
    }
    if (with_bias) out.lifted(j, 2 * block) = 1.0;
    out.lifted(j, out.lifted.cols() - 1) = dataset.labels[j];
  }
  return out;
}

}  // namespace

LiftedDataset lift_dataset(const Dataset& dataset, const SamplingSet& s, bool with_bias) {
  return lift_impl<true>(dataset, s, with_bias);
}

LiftedDataset lift_dataset_serial(const Dataset& dataset, const SamplingSet& s,
                                  bool with_bias) {
  return lift_impl<false>(dataset, s, with_bias);
}

std::pair<Dataset, ScalerState> standardize(const Dataset& dataset,
                                            std::optional<ScalerState> state,
                                            ScaleMode mode) {
  dataset.validate();
  const Eigen::Index n = dataset.size();
  const Eigen::Index d = dataset.dim();

  ScalerState fitted;
  if (mode == ScaleMode::fit_transform) {
    fitted.means.resize(d + 1);
    fitted.stdevs.resize(d + 1);
    for (Eigen::Index c = 0; c < d; ++c) {
      const double mean = dataset.features.col(c).mean();
      const double var = (dataset.features.col(c).array() - mean).square().mean();
      fitted.means[c] = mean;
      fitted.stdevs[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    const double ymean = dataset.labels.mean();
    const double yvar = (dataset.labels.array() - ymean).square().mean();
    fitted.means[d] = ymean;
    fitted.stdevs[d] = yvar > 0.0 ? std::sqrt(yvar) : 1.0;
  } else {
    if (!state.has_value() || !state->fitted())
      throw StateError("standardize: transform/inverse require a fitted scaler");
    if (state->means.size() != d + 1)
      throw std::invalid_argument("standardize: scaler dimension mismatch");
    fitted = *state;
  }

  Dataset out = dataset;
  if (mode == ScaleMode::inverse) {
    for (Eigen::Index c = 0; c < d; ++c)
      out.features.col(c) = dataset.features.col(c).array() * fitted.stdevs[c] + fitted.means[c];
    out.labels = dataset.labels.array() * fitted.stdevs[d] + fitted.means[d];
  } else {
    for (Eigen::Index c = 0; c < d; ++c)
      out.features.col(c) = (dataset.features.col(c).array() - fitted.means[c]) / fitted.stdevs[c];
    out.labels = (dataset.labels.array() - fitted.means[d]) / fitted.stdevs[d];
  }
  (void)n;
  return {std::move(out), std::move(fitted)};
}

Eigen::VectorXd scale_features(const Eigen::VectorXd& x, const ScalerState& state) {
  if (!state.fitted()) throw StateError("scale_features: scaler not fitted");
  const Eigen::Index d = state.means.size() - 1;
  if (x.size() != d) throw std::invalid_argument("scale_features: dimension mismatch");
  return (x - state.means.head(d)).cwiseQuotient(state.stdevs.head(d));
}

double scale_label(double y, const ScalerState& state) {
  if (!state.fitted()) throw StateError("scale_label: scaler not fitted");
  const Eigen::Index d = state.means.size() - 1;
  return (y - state.means[d]) / state.stdevs[d];
}

double unscale_label(double y_scaled, const ScalerState& state) {
  if (!state.fitted()) throw StateError("unscale_label: scaler not fitted");
  const Eigen::Index d = state.means.size() - 1;
  return y_scaled * state.stdevs[d] + state.means[d];
}

}  // namespace wadiro
