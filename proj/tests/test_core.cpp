#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "wadiro/core.hpp"
#include "wadiro/errors.hpp"
#include "wadiro/io.hpp"

using namespace wadiro;

namespace {

Dataset make_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Dataset d;
  d.features = x;
  d.labels = y;
  return d;
}

Dataset random_dataset(int n, int d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = dist(rng);
    y[i] = dist(rng);
  }
  return make_dataset(x, y);
}

// Oracle: every sign pattern of a 2-D point set under all directions,
// found by sweeping the angle finely.
std::set<std::vector<int>> enumerate_2d_sign_patterns(const Eigen::MatrixXd& x) {
  std::set<std::vector<int>> patterns;
  const int steps = 20000;
  for (int k = 0; k < steps; ++k) {
    const double angle = 2.0 * M_PI * k / steps;
    Eigen::Vector2d s(std::cos(angle), std::sin(angle));
    std::vector<int> bits(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index j = 0; j < x.rows(); ++j)
      bits[static_cast<std::size_t>(j)] = x.row(j).dot(s) >= 0.0 ? 1 : 0;
    patterns.insert(bits);
  }
  return patterns;
}

}  // namespace

TEST_CASE("sampling vectors are deterministic for a fixed seed") {
  auto data = random_dataset(10, 3, 1);
  auto a = gen_sampling_vectors(data, 5, 7, false);
  auto b = gen_sampling_vectors(data, 5, 7, false);
  CHECK(a.vectors == b.vectors);
  CHECK(a.count() == 5);
  CHECK_THROWS_AS(gen_sampling_vectors(data, 0, 7, false), std::invalid_argument);
}

TEST_CASE("pattern column depends only on the direction of s") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, -1, 0;
  auto data = make_dataset(x, Eigen::VectorXd::Zero(2));
  SamplingSet s;
  s.vectors.resize(2, 2);
  s.vectors << 1, 0, 2, 0;
  auto bits = compute_patterns(data, s);
  CHECK(bits.columns_equal(0, 1));
  CHECK(bits.bit(0, 0));
  CHECK_FALSE(bits.bit(1, 0));
}

TEST_CASE("dedup caps the pattern count at the arrangement size") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, -1, 0;
  auto data = make_dataset(x, Eigen::VectorXd::Zero(2));
  auto s = gen_sampling_vectors(data, 50, 3, true);
  CHECK(s.count() <= 4);
  CHECK(s.dedup_applied);

  const auto oracle = enumerate_2d_sign_patterns(x);
  CHECK(s.count() <= static_cast<Eigen::Index>(oracle.size()));
  auto bits = compute_patterns(data, s);
  for (Eigen::Index i = 0; i < s.count(); ++i) {
    std::vector<int> column{bits.bit(0, i) ? 1 : 0, bits.bit(1, i) ? 1 : 0};
    CHECK(oracle.count(column) == 1);
  }
  // Dedup soundness: all columns pairwise distinct.
  for (Eigen::Index i = 0; i < s.count(); ++i)
    for (Eigen::Index k = i + 1; k < s.count(); ++k) CHECK_FALSE(bits.columns_equal(i, k));
}

TEST_CASE("activation bits follow the >= 0 indicator") {
  SamplingSet s;
  s.vectors.resize(1, 2);
  s.vectors << 1, 0;
  Eigen::VectorXd x(2);
  x << 1, 0;
  CHECK(activation_bits(x, s)[0]);
  x << -1, 0;
  CHECK_FALSE(activation_bits(x, s)[0]);
  x << 0, 5;  // zero inner product counts as active
  CHECK(activation_bits(x, s)[0]);
}

TEST_CASE("hand-evaluated pattern matrix") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 1, 1, -1;
  auto data = make_dataset(x, Eigen::VectorXd::Zero(2));
  SamplingSet s;
  s.vectors.resize(2, 2);
  s.vectors << 1, 0, 0, 1;
  auto bits = compute_patterns(data, s);
  CHECK(bits.bit(0, 0));
  CHECK(bits.bit(0, 1));
  CHECK(bits.bit(1, 0));
  CHECK_FALSE(bits.bit(1, 1));
}

TEST_CASE("parallel pattern kernel matches the serial reference") {
  auto data = random_dataset(257, 5, 11);
  auto s = gen_sampling_vectors(data, 67, 5, false);
  CHECK(compute_patterns(data, s) == compute_patterns_serial(data, s));
  auto lifted = lift_dataset(data, s, true);
  auto lifted_ref = lift_dataset_serial(data, s, true);
  CHECK(lifted.lifted == lifted_ref.lifted);
}

TEST_CASE("lift instantiates the three-gate example") {
  // Gates chosen so that d = (1, 0, 1) for x = (1, 2).
  SamplingSet s;
  s.vectors.resize(3, 2);
  s.vectors << 1, 0, 0, -1, 1, 1;
  Eigen::VectorXd x(2);
  x << 1, 2;
  auto row = lift_sample(x, 9.0, s, false);
  Eigen::VectorXd expected(13);
  expected << 1, 2, 0, 0, 1, 2, 1, 2, 0, 0, 1, 2, 9;
  CHECK(row == expected);

  // Zero input lifts to zeros regardless of the gate bits.
  auto zero_row = lift_sample(Eigen::VectorXd::Zero(2), 4.0, s, false);
  CHECK(zero_row.head(12).isZero(0.0));
  CHECK(zero_row[12] == 4.0);

  // Bias slot sits between the blocks and the label.
  auto bias_row = lift_sample(x, 9.0, s, true);
  CHECK(bias_row.size() == 14);
  CHECK(bias_row[12] == 1.0);
  CHECK(bias_row[13] == 9.0);
}

TEST_CASE("lifting a sample ignores the rest of the dataset") {
  auto data = random_dataset(20, 4, 2);
  auto s = gen_sampling_vectors(data, 6, 9, false);
  auto lifted = lift_dataset(data, s, false);
  auto shuffled = data;
  shuffled.features.row(3).swap(shuffled.features.row(11));
  std::swap(shuffled.labels[3], shuffled.labels[11]);
  for (Eigen::Index j : {0, 5, 17}) {
    auto row = lift_sample(data.features.row(j).transpose(), data.labels[j], s, false);
    CHECK(row == lifted.lifted.row(j).transpose());
  }
  // Both halves of every lifted row agree.
  const Eigen::Index block = s.count() * data.dim();
  for (Eigen::Index j = 0; j < data.size(); ++j)
    CHECK(lifted.lifted.row(j).segment(0, block) ==
          lifted.lifted.row(j).segment(block, block));
}

TEST_CASE("standardize handles constant columns and round-trips") {
  Eigen::MatrixXd x(3, 2);
  x << 5, 0, 5, 1, 5, 2;
  Eigen::VectorXd y(3);
  y << 1, 2, 3;
  auto data = make_dataset(x, y);

  auto [scaled, state] = standardize(data, std::nullopt, ScaleMode::fit_transform);
  CHECK(scaled.features.col(0).isZero(0.0));
  CHECK(state.stdevs[0] == 1.0);

  auto [roundtrip, state2] = standardize(scaled, state, ScaleMode::inverse);
  CHECK((roundtrip.features - data.features).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((roundtrip.labels - data.labels).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(standardize(data, std::nullopt, ScaleMode::transform), StateError);
}

TEST_CASE("population stdev on a two-point column") {
  Eigen::MatrixXd x(2, 1);
  x << 0, 2;
  Eigen::VectorXd y(2);
  y << 0, 0;
  auto [scaled, state] = standardize(make_dataset(x, y), std::nullopt, ScaleMode::fit_transform);
  CHECK(state.means[0] == doctest::Approx(1.0));
  CHECK(state.stdevs[0] == doctest::Approx(1.0));
  CHECK(scaled.features(0, 0) == doctest::Approx(-1.0));
  CHECK(scaled.features(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("csv round-trip and parse errors") {
  const auto dir = std::filesystem::temp_directory_path() / "wadiro_core_test";
  std::filesystem::create_directories(dir);
  auto data = random_dataset(7, 3, 21);
  data.feature_names = {"a", "b", "c"};
  const auto path = dir / "data.csv";
  write_csv(path, data);
  auto back = read_csv(path);
  CHECK(back.feature_names == data.feature_names);
  CHECK((back.features - data.features).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.labels - data.labels).cwiseAbs().maxCoeff() == 0.0);

  const auto bad = dir / "bad.csv";
  {
    std::ofstream out(bad);
    out << "a,b\n1,2\n3,oops\n";
  }
  try {
    read_csv(bad);
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(e.byte_offset > 0);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("saturating generation stops once the arrangement is exhausted") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, -1, 0;
  auto data = make_dataset(x, Eigen::VectorXd::Zero(2));
  auto s = gen_sampling_vectors_saturating(data, 13, 200, 64);
  CHECK(s.count() >= 2);
  CHECK(s.count() <= 4);
}
