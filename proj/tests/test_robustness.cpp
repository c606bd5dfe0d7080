#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "wadiro/robustness.hpp"

using namespace wadiro;

namespace {

Eigen::MatrixXd random_points(int n, int k, unsigned seed, double spread = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist(0.0, spread);
  Eigen::MatrixXd out(n, k);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < k; ++j) out(i, j) = dist(rng);
  return out;
}

}  // namespace

TEST_CASE("1-D Wasserstein basics") {
  CHECK(w1_1d({3, 1, 2}, {2, 3, 1}) == doctest::Approx(0.0));
  CHECK(w1_1d({0, 1}, {1, 2}) == doctest::Approx(1.0));
  CHECK(w1_1d({0, 0}, {0, 4}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(w1_1d({1, 2}, {1}), std::invalid_argument);
}

TEST_CASE("sorting shortcut equals the transport LP") {
  std::mt19937 rng(5);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 6; ++rep) {
    const int n = 4 + rep;
    std::vector<double> u(static_cast<std::size_t>(n)), v(static_cast<std::size_t>(n));
    for (auto& x : u) x = dist(rng);
    for (auto& x : v) x = 2.0 * dist(rng) + 0.5;
    CHECK(w1_1d(u, v) == doctest::Approx(oracles::lp_transport_1d(u, v)).epsilon(1e-7));
  }
}

TEST_CASE("sliced distance identity, symmetry and determinism") {
  const auto u = random_points(12, 3, 1);
  const auto v = random_points(12, 3, 2, 2.0);
  CHECK(sw_distance(u, u, 32, 7) == doctest::Approx(0.0));
  CHECK(sw_distance(u, v, 32, 7) == doctest::Approx(sw_distance(v, u, 32, 7)));
  CHECK(sw_distance(u, v, 32, 7) == sw_distance(u, v, 32, 7));
  CHECK(sw_distance_serial(u, v, 57, 3) == sw_distance(u, v, 57, 3));
  CHECK_THROWS_AS(sw_distance(u, random_points(5, 3, 3), 8, 0), std::invalid_argument);
}

TEST_CASE("one-dimensional slicing reduces to w1_1d") {
  const auto u = random_points(9, 1, 11);
  const auto v = random_points(9, 1, 12);
  std::vector<double> uv(u.data(), u.data() + u.rows());
  std::vector<double> vv(v.data(), v.data() + v.rows());
  CHECK(sw_distance(u, v, 5, 9) == doctest::Approx(w1_1d(uv, vv)).epsilon(1e-12));
}

TEST_CASE("monte carlo average matches the per-projection LP within 5 percent") {
  const int n = 6, L = 2000;
  const auto u = random_points(n, 2, 21);
  const auto v = random_points(n, 2, 22, 1.5);
  const double sw = sw_distance(u, v, L, 99);
  const auto theta = sw_projections(2, L, 99);
  double lp_avg = 0.0;
  for (int l = 0; l < L; ++l) {
    const Eigen::VectorXd pu = u * theta.row(l).transpose();
    const Eigen::VectorXd pv = v * theta.row(l).transpose();
    lp_avg += oracles::lp_transport_1d(std::vector<double>(pu.data(), pu.data() + n),
                                       std::vector<double>(pv.data(), pv.data() + n));
  }
  lp_avg /= L;
  CHECK(std::abs(sw - lp_avg) <= 0.05 * lp_avg);
}

TEST_CASE("benchmark function values") {
  BenchmarkSpec ackley;
  ackley.function = BenchmarkFunction::ackley;
  ackley.dim = 4;
  CHECK(benchmark_eval(ackley, Eigen::VectorXd::Zero(4)) == doctest::Approx(0.0).epsilon(1e-12));

  BenchmarkSpec mc;
  mc.function = BenchmarkFunction::mccormick;
  mc.dim = 2;
  CHECK(benchmark_eval(mc, Eigen::Vector2d(0, 0)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(benchmark_eval(mc, Eigen::Vector2d(10, 0)), std::invalid_argument);
  CHECK_THROWS_AS(benchmark_eval(mc, Eigen::VectorXd::Zero(3)), std::invalid_argument);

  BenchmarkSpec keane;
  keane.function = BenchmarkFunction::keane;
  keane.dim = 3;
  CHECK_THROWS_AS(benchmark_eval(keane, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("sampled ranges stay inside the documented envelopes") {
  BenchmarkSpec mc;
  mc.function = BenchmarkFunction::mccormick;
  mc.dim = 2;
  mc.n_samples = 2000;
  mc.seed = 3;
  const auto data = sample_benchmark(mc);
  CHECK(data.labels.minCoeff() >= -1.92);
  CHECK(data.labels.maxCoeff() <= 65.5);
  CHECK(data.labels.minCoeff() <= -1.5);  // the basin is reachable

  BenchmarkSpec pgp;
  pgp.function = BenchmarkFunction::pgp;
  pgp.dim = 2;
  pgp.n_samples = 2000;
  pgp.seed = 4;
  const auto pdata = sample_benchmark(pgp);
  CHECK(pdata.labels.minCoeff() >= -3.2);

  // Keane's reported range disagrees with the bump-function codomain;
  // informational only: the canonical formula is nonpositive.
  BenchmarkSpec keane;
  keane.function = BenchmarkFunction::keane;
  keane.dim = 4;
  keane.n_samples = 500;
  keane.seed = 5;
  const auto kdata = sample_benchmark(keane);
  CHECK(kdata.labels.maxCoeff() <= 0.0);

  // Determinism and the single-row case.
  const auto again = sample_benchmark(mc);
  CHECK(again.features == data.features);
  BenchmarkSpec one = mc;
  one.n_samples = 1;
  const auto row = sample_benchmark(one);
  CHECK(row.labels[0] ==
        doctest::Approx(benchmark_eval(mc, row.features.row(0).transpose())));
}

TEST_CASE("outlier generation honors the shift threshold") {
  BenchmarkSpec mc;
  mc.function = BenchmarkFunction::mccormick;
  mc.dim = 2;
  mc.n_samples = 50;
  mc.seed = 8;
  const auto base = sample_benchmark(mc);
  const double label_sd = std::sqrt((base.labels.array() - base.labels.mean()).square().mean());

  OutlierGenConfig cfg;
  cfg.m_bar = 5;
  cfg.phi = 0.5 * label_sd;
  cfg.projections = 64;
  // One moved point shifts the sliced distance by about ||dz|| / N, so
  // the proposal box must reach well past the data to clear phi.
  cfg.proposal_scale = 40.0;
  cfg.seed = 17;
  auto [outliers, audit] = generate_outliers(base, cfg);
  CHECK(outliers.size() == 5);
  CHECK(audit.shifts.size() == 5);
  for (double shift : audit.shifts) CHECK(shift >= cfg.phi);
  // The filter binds: at least one proposal fell below the threshold.
  int rejected = 0;
  for (int r : audit.rejections) rejected += r;
  CHECK(rejected >= 1);

  // A vanishing threshold accepts the first proposal every time.
  OutlierGenConfig easy = cfg;
  easy.phi = 1e-12;
  auto [eout, eaudit] = generate_outliers(base, easy);
  for (int r : eaudit.rejections) CHECK(r == 0);

  // Zero outliers requested.
  OutlierGenConfig none = cfg;
  none.m_bar = 0;
  auto [zout, zaudit] = generate_outliers(base, none);
  CHECK(zout.size() == 0);
  CHECK(zaudit.shifts.empty());
}

TEST_CASE("exhausted budget raises a partial result carrying the prefix") {
  BenchmarkSpec mc;
  mc.function = BenchmarkFunction::mccormick;
  mc.dim = 2;
  mc.n_samples = 40;
  mc.seed = 9;
  const auto base = sample_benchmark(mc);
  OutlierGenConfig cfg;
  cfg.m_bar = 3;
  cfg.phi = 1e9;  // unreachable
  cfg.max_rejects = 5;
  cfg.seed = 2;
  try {
    generate_outliers(base, cfg);
    CHECK(false);
  } catch (const OutlierBudgetError& e) {
    CHECK(e.produced_count == 0);
    CHECK(e.requested_count == 3);
    CHECK(e.accepted.features.rows() == 0);
  }
}

TEST_CASE("clean corruption is a pure partition") {
  auto data = oracles::random_dataset(100, 3, 31);
  CorruptionSpec corr;
  corr.outlier_fraction = 0.0;
  corr.noise_sigma = 0.0;
  auto splits = corrupt_and_split(data, corr, {0.6, 0.2, 0.2}, 7);
  CHECK(splits.train.size() + splits.val.size() + splits.test.size() == data.size());
  CHECK(splits.injected_outliers == 0);
  CHECK(splits.train.size() == 60);
  CHECK(splits.val.size() == 20);

  // Every split row is one of the original rows, and test rows are
  // bit-identical to their clean originals.
  auto row_key = [](const Dataset& ds, Eigen::Index j) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < ds.dim(); ++c) row.push_back(ds.features(j, c));
    row.push_back(ds.labels[j]);
    return row;
  };
  std::set<std::vector<double>> originals;
  for (Eigen::Index j = 0; j < data.size(); ++j) originals.insert(row_key(data, j));
  for (const Dataset* split : {&splits.train, &splits.val, &splits.test})
    for (Eigen::Index j = 0; j < split->size(); ++j)
      CHECK(originals.count(row_key(*split, j)) == 1);
}

TEST_CASE("corruption accounting per experiment protocol") {
  BenchmarkSpec mc;
  mc.function = BenchmarkFunction::mccormick;
  mc.dim = 2;
  mc.n_samples = 100;
  mc.seed = 12;
  const auto data = sample_benchmark(mc);

  // Train-only injection.
  CorruptionSpec a;
  a.outlier_fraction = 0.2;
  a.noise_sigma = 0.1;
  a.outlier_split = OutlierSplit::train_only;
  a.generator.phi = 0.05;
  a.generator.projections = 32;
  auto sa = corrupt_and_split(data, a, {0.6, 0.2, 0.2}, 3);
  CHECK(sa.injected_outliers == 12);  // round(0.2 * 60)
  CHECK(sa.train.size() == 72);
  CHECK(sa.val.size() == 20);
  CHECK(sa.test.size() == 20);

  // Random train+val injection; the test split never grows.
  CorruptionSpec b = a;
  b.outlier_split = OutlierSplit::train_val_random;
  b.outlier_fraction = 0.1;
  auto sb = corrupt_and_split(data, b, {0.6, 0.2, 0.2}, 3);
  CHECK(sb.injected_outliers == 8);  // round(0.1 * 80)
  CHECK(sb.train.size() + sb.val.size() == 88);
  CHECK(sb.test.size() == 20);

  // Test rows are never corrupted: identical to the clean partition.
  CorruptionSpec clean;
  auto sc = corrupt_and_split(data, clean, {0.6, 0.2, 0.2}, 3);
  CHECK(sb.test.features == sc.test.features);
  CHECK(sb.test.labels == sc.test.labels);
}

TEST_CASE("monte carlo variance decays like one over L") {
  const auto u = random_points(10, 2, 41);
  const auto v = random_points(10, 2, 42, 1.8);
  std::vector<double> log_l, log_var;
  for (int L : {8, 32, 128, 512}) {
    std::vector<double> estimates;
    for (unsigned seed = 0; seed < 48; ++seed)
      estimates.push_back(sw_distance(u, v, L, seed));
    double mean = 0.0;
    for (double e : estimates) mean += e;
    mean /= static_cast<double>(estimates.size());
    double var = 0.0;
    for (double e : estimates) var += (e - mean) * (e - mean);
    var /= static_cast<double>(estimates.size() - 1);
    log_l.push_back(std::log(static_cast<double>(L)));
    log_var.push_back(std::log(var));
  }
  // Least-squares slope of log var against log L: expect -1 within 30%.
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < log_l.size(); ++i) {
    mx += log_l[i];
    my += log_var[i];
  }
  mx /= static_cast<double>(log_l.size());
  my /= static_cast<double>(log_l.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < log_l.size(); ++i) {
    num += (log_l[i] - mx) * (log_var[i] - my);
    den += (log_l[i] - mx) * (log_l[i] - mx);
  }
  const double slope = num / den;
  CHECK(slope <= -0.7);
  CHECK(slope >= -1.3);
}
