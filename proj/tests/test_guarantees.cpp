#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "wadiro/guarantees.hpp"

using namespace wadiro;

namespace {

ScnnModel random_model(Eigen::Index p, Eigen::Index d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> dist;
  ScnnModel model;
  model.raw.nu.resize(p, d);
  model.raw.omega.resize(p, d);
  model.sampling.vectors.resize(p, d);
  for (Eigen::Index i = 0; i < p; ++i)
    for (Eigen::Index k = 0; k < d; ++k) {
      model.raw.nu(i, k) = dist(rng);
      model.raw.omega(i, k) = dist(rng);
      model.sampling.vectors(i, k) = dist(rng);
    }
  model.scaler.means = Eigen::VectorXd::Zero(d + 1);
  model.scaler.stdevs = Eigen::VectorXd::Ones(d + 1);
  return model;
}

StabilityDomain unit_domain(Eigen::Index d, double eps) {
  StabilityDomain domain;
  domain.lo = Eigen::VectorXd::Constant(d, -1.0);
  domain.hi = Eigen::VectorXd::Constant(d, 1.0);
  domain.eps = eps;
  return domain;
}

}  // namespace

TEST_CASE("lifted-sample bound matches long-double evaluation") {
  BoundInputs in;
  in.train_error = 0.0;
  in.b_star = 1.0;
  in.r_hat = 1.0;
  in.n = 100;
  in.delta = 0.1;
  in.p = 1;
  const long double reference =
      0.2L + sqrtl(8.0L * logl(20.0L) / 100.0L);  // 0.2 + sqrt(8 ln 20 / 100)
  CHECK(std::abs(rademacher_bound_lifted(in) - static_cast<double>(reference)) <= 1e-10);
  CHECK(rademacher_bound_lifted(in) == doctest::Approx(0.6895493662).epsilon(1e-8));

  // Slack terms vanish as N grows.
  in.train_error = 0.37;
  in.n = 1'000'000'000'000ll;
  CHECK(std::abs(rademacher_bound_lifted(in) - 0.37) <= 1e-5);

  // Doubling B* doubles the additive slack exactly.
  in.n = 100;
  in.train_error = 0.0;
  const double base = rademacher_bound_lifted(in);
  in.b_star = 2.0;
  CHECK(rademacher_bound_lifted(in) == doctest::Approx(2.0 * base).epsilon(1e-14));
}

TEST_CASE("original-space bound uses the psi capacity terms") {
  BoundInputs in;
  in.train_error = 0.0;
  in.b_star = 1.0;
  in.r = 1.0;
  in.r_hat = 1.0;
  in.n = 4;
  in.delta = 0.5;
  in.p = 2;
  in.norm_variant = WassersteinNorm::l2;
  // psi_2 = sqrt(2P) R = 2, middle term 2*psi/sqrt(N) = 2.
  const double tail = std::sqrt(8.0 * std::log(4.0) / 4.0);
  CHECK(rademacher_bound_original(in) == doctest::Approx(2.0 + tail).epsilon(1e-12));
  in.norm_variant = WassersteinNorm::l1;  // psi_1 = 2P R = 4 >= psi_2
  CHECK(rademacher_bound_original(in) == doctest::Approx(4.0 + tail).epsilon(1e-12));

  in.p = 0;
  CHECK_THROWS_AS(rademacher_bound_original(in), std::invalid_argument);
}

TEST_CASE("probabilistic tail ratio") {
  BoundInputs in;
  in.train_error = 0.5;
  in.b_star = 1.0;
  in.r_hat = 1.0;
  in.n = 100;
  in.delta = 0.1;
  const double slack = 0.2 + std::sqrt(8.0 * std::log(20.0) / 100.0);
  CHECK(probabilistic_tail(in, 1.0) ==
        doctest::Approx((0.5 + slack) / 1.5).epsilon(1e-12));
  CHECK(probabilistic_tail(in, 1e9) <= 1e-8);
  CHECK(probabilistic_tail(in, slack * 1.0000001) <= 1.0);
  CHECK(probabilistic_tail(in, slack * 1.0000001) >= 0.999);
  CHECK_THROWS_AS(probabilistic_tail(in, slack * 0.5), std::invalid_argument);
}

TEST_CASE("zero model certifies zero deviation") {
  auto model = random_model(3, 2, 1);
  model.raw.nu.setZero();
  model.raw.omega.setZero();
  for (CertifyMode mode : {CertifyMode::branch_and_bound, CertifyMode::exhaustive}) {
    auto cert = certify_stability(model, unit_domain(2, 0.25), mode);
    CHECK(cert.l_eps <= 1e-9);
  }
}

TEST_CASE("always-active gate reduces to the analytic linear bound") {
  // Xi inside the positive orthant, s in the positive orthant, and eps
  // small enough that x + eps keeps the gate open: the model is linear
  // with slope u on the whole region, so L = eps * ||u||_1.
  ScnnModel model;
  model.raw.nu.resize(1, 2);
  model.raw.nu << 1.5, -0.7;
  model.raw.omega.resize(1, 2);
  model.raw.omega << 0.2, 0.4;
  model.sampling.vectors.resize(1, 2);
  model.sampling.vectors << 1.0, 1.0;
  model.scaler.means = Eigen::VectorXd::Zero(3);
  model.scaler.stdevs = Eigen::VectorXd::Ones(3);

  StabilityDomain domain;
  domain.lo = Eigen::VectorXd::Constant(2, 1.0);
  domain.hi = Eigen::VectorXd::Constant(2, 2.0);
  domain.eps = 0.1;
  const Eigen::VectorXd u = (model.raw.nu - model.raw.omega).row(0).transpose();
  const double expected = domain.eps * u.lpNorm<1>();
  for (CertifyMode mode : {CertifyMode::branch_and_bound, CertifyMode::exhaustive}) {
    auto cert = certify_stability(model, domain, mode, 1e-9);
    CHECK(std::abs(cert.l_eps - expected) <= 1e-6);
  }
}

TEST_CASE("branch and bound agrees with exhaustive enumeration") {
  for (unsigned seed = 0; seed < 6; ++seed) {
    auto model = random_model(3, 2, seed + 10);
    const auto domain = unit_domain(2, 0.2);
    auto bnb = certify_stability(model, domain, CertifyMode::branch_and_bound, 1e-9);
    auto exact = certify_stability(model, domain, CertifyMode::exhaustive);
    CHECK(std::abs(bnb.l_eps - exact.l_eps) <= 1e-6);
    CHECK(bnb.bound_gap <= 1e-6);

    // Grid scan stays below the certificate.
    const double scan = empirical_deviation_scan(model, domain, 25);
    CHECK(scan <= bnb.l_eps + 1e-6);
    CHECK(empirical_deviation_scan_serial(model, domain, 25) == scan);

    // Certificate replay in standardized units.
    const double replayed =
        std::abs(predict_standardized(model, bnb.argmax_x) -
                 predict_standardized(model, Eigen::VectorXd(bnb.argmax_x + bnb.argmax_eps)));
    CHECK(std::abs(replayed - bnb.l_eps) <= 1e-6);

    // Gate assignments are slack-consistent at the reported argmax.
    for (Eigen::Index i = 0; i < model.pattern_count(); ++i) {
      const double inner = bnb.argmax_x.dot(model.sampling.vectors.row(i));
      if (bnb.gamma_bits[static_cast<std::size_t>(i)] == 1)
        CHECK(inner >= -1e-9);
      else
        CHECK(inner <= 1e-9);
    }
  }
}

TEST_CASE("scan tightens toward the linear-region bound") {
  ScnnModel model;
  model.raw.nu.resize(1, 2);
  model.raw.nu << 2.0, 1.0;
  model.raw.omega = Eigen::MatrixXd::Zero(1, 2);
  model.sampling.vectors.resize(1, 2);
  model.sampling.vectors << 1.0, 1.0;
  model.scaler.means = Eigen::VectorXd::Zero(3);
  model.scaler.stdevs = Eigen::VectorXd::Ones(3);
  StabilityDomain domain;
  domain.lo = Eigen::VectorXd::Constant(2, 1.0);
  domain.hi = Eigen::VectorXd::Constant(2, 2.0);
  domain.eps = 0.05;
  const double expected = domain.eps * 3.0;
  CHECK(std::abs(empirical_deviation_scan(model, domain, 9) - expected) <= 1e-9);
}

TEST_CASE("domain validation") {
  auto model = random_model(2, 2, 3);
  StabilityDomain domain = unit_domain(2, 0.1);
  domain.eps = 0.0;
  CHECK_THROWS_AS(certify_stability(model, domain, CertifyMode::exhaustive),
                  std::invalid_argument);
  domain = unit_domain(2, 0.1);
  domain.hi[0] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(certify_stability(model, domain, CertifyMode::exhaustive),
                  std::invalid_argument);
  domain = unit_domain(3, 0.1);  // wrong dimension
  CHECK_THROWS_AS(certify_stability(model, domain, CertifyMode::exhaustive),
                  std::invalid_argument);
  CHECK_THROWS_AS(empirical_deviation_scan(model, unit_domain(2, 0.1), 1),
                  std::invalid_argument);
}
