#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "wadiro/conic.hpp"

using namespace wadiro;

TEST_CASE("minimal bound LP") {
  // min x  s.t.  x >= 1
  ConicProblem p(1);
  p.objective_coeff(0, 1.0);
  p.add_inequality({{0, -1.0}}, -1.0);
  auto r = solve_lp(p, 1e-8);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.primal[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.objective_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::max({r.primal_residual, r.dual_residual, r.gap}) <= 1e-8);
}

TEST_CASE("contradictory bounds are infeasible") {
  // min 0  s.t.  x >= 1, x <= 0
  ConicProblem p(1);
  p.add_inequality({{0, -1.0}}, -1.0);
  p.add_inequality({{0, 1.0}}, 0.0);
  auto r = solve_lp(p, 1e-8);
  CHECK(r.status == SolveStatus::infeasible);
  CHECK(r.primal.size() == 0);
}

TEST_CASE("one-sided objective is unbounded") {
  // min -x  s.t.  x >= 0
  ConicProblem p(1);
  p.objective_coeff(0, -1.0);
  p.add_inequality({{0, -1.0}}, 0.0);
  auto r = solve_lp(p, 1e-8);
  CHECK(r.status == SolveStatus::unbounded);
}

TEST_CASE("fixed-vector norm SOCP") {
  // min t  s.t.  ||(3,4)|| <= t   encoded via u = (3,4) pinned by equalities
  ConicProblem p(3);
  p.objective_coeff(0, 1.0);
  p.add_equality({{1, 1.0}}, 3.0);
  p.add_equality({{2, 1.0}}, 4.0);
  p.add_soc_block(0, {1, 2});
  auto r = solve_socp(p, 1e-8);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.primal[0] == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("degenerate zero-norm SOCP") {
  // min t  s.t.  ||(x)|| <= t, x = 0
  ConicProblem p(2);
  p.objective_coeff(0, 1.0);
  p.add_equality({{1, 1.0}}, 0.0);
  p.add_soc_block(0, {1});
  auto r = solve_socp(p, 1e-8);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.primal[0] == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("soc epigraph with a free shift") {
  // min t + x  s.t.  ||x - 1|| <= t. Substituting t = |x - 1| gives
  // f(x) = 1 on x <= 1 and 2x - 1 above, so the optimal value is 1
  // (attained on a ray; t = 0, x = 1 is one optimum).
  ConicProblem p(3);  // t, x, u
  p.objective_coeff(0, 1.0);
  p.objective_coeff(1, 1.0);
  p.add_equality({{2, 1.0}, {1, -1.0}}, -1.0);  // u - x = -1
  p.add_soc_block(0, {2});
  auto r = solve_socp(p, 1e-8);
  REQUIRE(r.status == SolveStatus::optimal);
  CHECK(r.objective_value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.primal[0] == doctest::Approx(std::abs(r.primal[1] - 1.0)).epsilon(1e-5));
  CHECK(replay_violation(p, r.primal) <= 1e-7);
}

TEST_CASE("solve_lp rejects SOC problems") {
  ConicProblem p(2);
  p.add_soc_block(0, {1});
  CHECK_THROWS_AS(solve_lp(p, 1e-8), std::invalid_argument);
}

TEST_CASE("tolerance domain is enforced") {
  ConicProblem p(1);
  p.objective_coeff(0, 1.0);
  p.add_inequality({{0, -1.0}}, -1.0);
  CHECK_THROWS_AS(solve_lp(p, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_lp(p, 0.5), std::invalid_argument);
}

namespace {

// Random bounded LP: min c'x over box lo <= x <= hi plus k random rows
// that keep the box center feasible.
ConicProblem random_lp(int n, int extra_rows, unsigned seed, Eigen::VectorXd* c_out) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist;
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  ConicProblem p(n);
  Eigen::VectorXd c(n);
  for (int i = 0; i < n; ++i) {
    c[i] = dist(rng);
    p.objective_coeff(i, c[i]);
    const double hi = unif(rng), lo = -unif(rng);
    p.add_inequality({{i, 1.0}}, hi);
    p.add_inequality({{i, -1.0}}, -lo);
  }
  for (int r = 0; r < extra_rows; ++r) {
    std::vector<std::pair<int, double>> terms;
    for (int i = 0; i < n; ++i) terms.push_back({i, dist(rng)});
    p.add_inequality(terms, unif(rng));  // rhs > 0 keeps x = 0 feasible
  }
  if (c_out) *c_out = c;
  return p;
}

}  // namespace

TEST_CASE("certified optimality: primal replay stays within tolerance") {
  for (unsigned seed = 0; seed < 8; ++seed) {
    auto p = random_lp(6, 4, seed, nullptr);
    auto r = solve_lp(p, 1e-8);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(replay_violation(p, r.primal) <= 1e-8);
  }
}

TEST_CASE("objective scaling moves the value, not the argmin") {
  Eigen::VectorXd c;
  auto p = random_lp(5, 3, 42, &c);
  auto r1 = solve_lp(p, 1e-9);
  ConicProblem q(5);
  for (int i = 0; i < 5; ++i) q.objective_coeff(i, 3.0 * c[i]);
  // replicate rows
  auto copy_rows = [&](const ConicProblem& src, ConicProblem& dst) {
    const auto& rp = src.ineq_rowptr();
    for (int rr = 0; rr < src.ineq_rows(); ++rr) {
      std::vector<std::pair<int, double>> terms;
      for (int k = rp[static_cast<std::size_t>(rr)]; k < rp[static_cast<std::size_t>(rr) + 1]; ++k)
        terms.push_back({src.ineq_cols()[static_cast<std::size_t>(k)],
                         src.ineq_vals()[static_cast<std::size_t>(k)]});
      dst.add_inequality(terms, src.ineq_rhs()[static_cast<std::size_t>(rr)]);
    }
  };
  copy_rows(p, q);
  auto r2 = solve_lp(q, 1e-9);
  REQUIRE(r1.status == SolveStatus::optimal);
  REQUIRE(r2.status == SolveStatus::optimal);
  CHECK(r2.objective_value == doctest::Approx(3.0 * r1.objective_value).epsilon(1e-6));
  CHECK((r1.primal - r2.primal).lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("determinism: identical problems give identical reports") {
  auto p = random_lp(7, 5, 7, nullptr);
  auto r1 = solve_lp(p, 1e-8);
  auto r2 = solve_lp(p, 1e-8);
  REQUIRE(r1.status == r2.status);
  CHECK(r1.iterations == r2.iterations);
  CHECK(std::abs(r1.objective_value - r2.objective_value) <= 1e-9);
  CHECK((r1.primal - r2.primal).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("soc feasibility of the replayed primal") {
  // min sum u  s.t. ||u - g|| <= t, t <= 1 with random g: projects g onto the ball.
  std::mt19937 rng(3);
  std::normal_distribution<double> dist;
  for (int rep = 0; rep < 5; ++rep) {
    const int k = 4;
    ConicProblem p(1 + 2 * k);  // t, u(k), w(k) with w = u - g
    Eigen::VectorXd gvec(k);
    for (int i = 0; i < k; ++i) gvec[i] = dist(rng);
    for (int i = 0; i < k; ++i) p.objective_coeff(1 + i, 1.0);
    for (int i = 0; i < k; ++i)
      p.add_equality({{1 + k + i, 1.0}, {1 + i, -1.0}}, -gvec[i]);
    std::vector<int> tail(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) tail[static_cast<std::size_t>(i)] = 1 + k + i;
    p.add_soc_block(0, tail);
    p.add_inequality({{0, 1.0}}, 1.0);
    auto r = solve_socp(p, 1e-8);
    REQUIRE(r.status == SolveStatus::optimal);
    CHECK(replay_violation(p, r.primal) <= 1e-7);
  }
}

TEST_CASE("triplet dump lists every section") {
  ConicProblem p(2);
  p.objective_coeff(0, 1.5);
  p.add_equality({{0, 1.0}, {1, 2.0}}, 3.0);
  p.add_inequality({{1, -1.0}}, 0.0);
  p.add_soc_block(0, {1});
  std::ostringstream out;
  p.dump(out);
  const auto text = out.str();
  CHECK(text.find("conic-problem v1") != std::string::npos);
  CHECK(text.find("equalities 1") != std::string::npos);
  CHECK(text.find("inequalities 1") != std::string::npos);
  CHECK(text.find("soc 1") != std::string::npos);
}
