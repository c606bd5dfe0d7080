#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "wadiro/model.hpp"
#include "wadiro/train.hpp"

namespace wadiro {

/// Inputs of the out-of-sample bound calculators. All norm bounds must
/// be positive and finite.
struct BoundInputs {
  double train_error = 0.0;  // (1/N) sum |beta' zhat_j|
  double b_star = 1.0;       // dual-norm weight bound
  double r_hat = 1.0;        // lifted-sample norm bound
  double r = 1.0;            // original sample norm bound
  double s_bound = 1.0;      // feature norm bound
  double t = 1.0;            // label norm bound
  long long n = 1;           // training-set size
  double delta = 0.1;        // confidence level, in (0,1)
  int p = 1;                 // pattern count
  WassersteinNorm norm_variant = WassersteinNorm::l1;

  void validate() const;
};

/// train_error + 2 B* Rhat / sqrt(N) + B* Rhat sqrt(8 ln(2/delta) / N).
double rademacher_bound_lifted(const BoundInputs& in);

/// Same tail term, with the middle term 2 psi / sqrt(N) where
/// psi_1 = B* 2P R and psi_2 = B* sqrt(2P) R.
double rademacher_bound_original(const BoundInputs& in);

/// Markov-style tail ratio (train_error + slack) / (train_error + zeta);
/// requires zeta above the slack.
double probabilistic_tail(const BoundInputs& in, double zeta_threshold);

// --- epsilon-stability certification ---------------------------------

/// Certification region: box Xi for the input and the inf-ball radius
/// for the perturbation, both in standardized units.
struct StabilityDomain {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;
  double eps = 0.1;

  void validate(Eigen::Index dim) const;
};

enum class CertifyMode { branch_and_bound, exhaustive };

struct StabilityCertificate {
  double l_eps = 0.0;           // standardized units
  double l_eps_original = 0.0;  // l_eps times the label stdev
  Eigen::VectorXd argmax_x;     // standardized
  Eigen::VectorXd argmax_eps;
  std::vector<int> gamma_bits;
  std::vector<int> eta_bits;
  int zeta = 0;
  double bound_gap = 0.0;
  long long nodes_explored = 0;
  std::vector<double> big_m_values;
};

/// Maximizes |f(x) - f(x + eps)| over the domain by the big-M
/// mixed-integer convex program; exact up to LP tolerance in exhaustive
/// mode, within bound_gap for branch and bound.
StabilityCertificate certify_stability(const ScnnModel& model, const StabilityDomain& domain,
                                       CertifyMode mode, double gap_target = 1e-9);

/// Grid x eps-corner lower bound on the certificate; never exceeds
/// l_eps beyond tolerance.
double empirical_deviation_scan(const ScnnModel& model, const StabilityDomain& domain,
                                int grid_density);
double empirical_deviation_scan_serial(const ScnnModel& model, const StabilityDomain& domain,
                                       int grid_density);

}  // namespace wadiro
