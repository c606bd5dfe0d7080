#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace wadiro {

/// ||x[u]||_2 <= x[t] over problem variables.
struct SocBlock {
  int t = -1;
  std::vector<int> u;
};

/// Standard-form conic instance:
///   minimize    c'v
///   subject to  A_eq v = b_eq
///               A_in v <= b_in
///               ||v[u]||_2 <= v[t]   for every SOC block.
/// Rows are assembled incrementally and stored in CSR form.
class ConicProblem {
 public:
  explicit ConicProblem(int var_count);

  int var_count() const { return var_count_; }
  int add_var(const std::string& name = {});

  void objective_coeff(int var, double value);  // accumulates

  // Rows take (variable, coefficient) pairs; repeated variables accumulate.
  void add_equality(const std::vector<std::pair<int, double>>& terms, double rhs);
  void add_inequality(const std::vector<std::pair<int, double>>& terms, double rhs);
  void add_soc_block(int t, std::vector<int> u);

  // Bulk row append used by hot builders (no pair packing).
  void add_inequality(const int* vars, const double* coeffs, int nnz, double rhs);

  void reserve_inequalities(std::size_t rows, std::size_t nnz);

  int eq_rows() const { return static_cast<int>(eq_rhs_.size()); }
  int ineq_rows() const { return static_cast<int>(in_rhs_.size()); }
  const std::vector<SocBlock>& soc_blocks() const { return soc_; }

  const Eigen::VectorXd& objective() const { return obj_; }
  const std::vector<int>& eq_rowptr() const { return eq_rowptr_; }
  const std::vector<int>& eq_cols() const { return eq_cols_; }
  const std::vector<double>& eq_vals() const { return eq_vals_; }
  const std::vector<double>& eq_rhs() const { return eq_rhs_; }
  const std::vector<int>& ineq_rowptr() const { return in_rowptr_; }
  const std::vector<int>& ineq_cols() const { return in_cols_; }
  const std::vector<double>& ineq_vals() const { return in_vals_; }
  const std::vector<double>& ineq_rhs() const { return in_rhs_; }

  std::vector<std::string>& var_names() { return names_; }
  const std::vector<std::string>& var_names() const { return names_; }

  // Throws std::invalid_argument when indices are out of range, a
  // coefficient is non-finite or an SOC block is empty.
  void validate() const;

  /// Plain-text sparse-triplet dump for cross-checking against external
  /// solvers.
  void dump(std::ostream& out) const;

 private:
  void append_row(std::vector<int>& rowptr, std::vector<int>& cols,
                  std::vector<double>& vals, std::vector<double>& rhs,
                  const std::vector<std::pair<int, double>>& terms, double rhs_value);

  int var_count_ = 0;
  Eigen::VectorXd obj_;
  std::vector<int> eq_rowptr_{0}, eq_cols_;
  std::vector<double> eq_vals_, eq_rhs_;
  std::vector<int> in_rowptr_{0}, in_cols_;
  std::vector<double> in_vals_, in_rhs_;
  std::vector<SocBlock> soc_;
  std::vector<std::string> names_;
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter, numerical_error };

std::string to_string(SolveStatus status);

struct SolveReport {
  SolveStatus status = SolveStatus::numerical_error;
  Eigen::VectorXd primal;  // nonempty iff status is optimal or max_iter
  double objective_value = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  double wall_time = 0.0;  // seconds
};

struct SolverOptions {
  double tol = 1e-8;
  int max_iterations = 200;
  bool verbose = false;
};

/// Primal-dual interior-point solve of the full problem (LP rows plus
/// SOC blocks) via a homogeneous self-dual embedding.
SolveReport solve_conic(const ConicProblem& problem, const SolverOptions& options = {});

/// LP-only entry point; rejects problems carrying SOC blocks.
SolveReport solve_lp(const ConicProblem& problem, double tol = 1e-8);

SolveReport solve_socp(const ConicProblem& problem, double tol = 1e-8);

/// Max constraint violation of a candidate primal point (equalities as
/// |residual|, inequalities as positive part, SOC as ||u|| - t).
double replay_violation(const ConicProblem& problem, const Eigen::VectorXd& v);

}  // namespace wadiro
