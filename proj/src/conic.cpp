#include "wadiro/conic.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace wadiro {

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::numerical_error: return "numerical_error";
  }
  return "numerical_error";
}

ConicProblem::ConicProblem(int var_count) : var_count_(var_count) {
  if (var_count < 0) throw std::invalid_argument("negative variable count");
  obj_ = Eigen::VectorXd::Zero(var_count);
}

int ConicProblem::add_var(const std::string& name) {
  obj_.conservativeResize(var_count_ + 1);
  obj_[var_count_] = 0.0;
  if (!name.empty()) {
    names_.resize(static_cast<std::size_t>(var_count_) + 1);
    names_.back() = name;
  } else if (!names_.empty()) {
    names_.resize(static_cast<std::size_t>(var_count_) + 1);
  }
  return var_count_++;
}

void ConicProblem::objective_coeff(int var, double value) {
  if (var < 0 || var >= var_count_) throw std::invalid_argument("objective: bad variable index");
  obj_[var] += value;
}

void ConicProblem::append_row(std::vector<int>& rowptr, std::vector<int>& cols,
                              std::vector<double>& vals, std::vector<double>& rhs,
                              const std::vector<std::pair<int, double>>& terms,
                              double rhs_value) {
  for (const auto& [var, coeff] : terms) {
    if (var < 0 || var >= var_count_) throw std::invalid_argument("row: bad variable index");
    cols.push_back(var);
    vals.push_back(coeff);
  }
  rhs.push_back(rhs_value);
  rowptr.push_back(static_cast<int>(cols.size()));
}

void ConicProblem::add_equality(const std::vector<std::pair<int, double>>& terms, double rhs) {
  append_row(eq_rowptr_, eq_cols_, eq_vals_, eq_rhs_, terms, rhs);
}

void ConicProblem::add_inequality(const std::vector<std::pair<int, double>>& terms,
                                  double rhs) {
  append_row(in_rowptr_, in_cols_, in_vals_, in_rhs_, terms, rhs);
}

void ConicProblem::add_inequality(const int* vars, const double* coeffs, int nnz, double rhs) {
  for (int k = 0; k < nnz; ++k) {
    in_cols_.push_back(vars[k]);
    in_vals_.push_back(coeffs[k]);
  }
  in_rhs_.push_back(rhs);
  in_rowptr_.push_back(static_cast<int>(in_cols_.size()));
}

void ConicProblem::reserve_inequalities(std::size_t rows, std::size_t nnz) {
  in_rowptr_.reserve(rows + 1);
  in_rhs_.reserve(rows);
  in_cols_.reserve(nnz);
  in_vals_.reserve(nnz);
}

void ConicProblem::add_soc_block(int t, std::vector<int> u) {
  SocBlock block;
  block.t = t;
  block.u = std::move(u);
  soc_.push_back(std::move(block));
}

void ConicProblem::validate() const {
  auto check_var = [&](int v) {
    if (v < 0 || v >= var_count_) throw std::invalid_argument("conic: variable index out of range");
  };
  for (int v : eq_cols_) check_var(v);
  for (int v : in_cols_) check_var(v);
  for (double x : eq_vals_)
    if (!std::isfinite(x)) throw std::invalid_argument("conic: non-finite equality coefficient");
  for (double x : in_vals_)
    if (!std::isfinite(x)) throw std::invalid_argument("conic: non-finite inequality coefficient");
  for (double x : eq_rhs_)
    if (!std::isfinite(x)) throw std::invalid_argument("conic: non-finite rhs");
  for (double x : in_rhs_)
    if (!std::isfinite(x)) throw std::invalid_argument("conic: non-finite rhs");
  if (!obj_.allFinite()) throw std::invalid_argument("conic: non-finite objective");
  for (const auto& block : soc_) {
    check_var(block.t);
    if (block.u.empty()) throw std::invalid_argument("conic: empty SOC block");
    for (int v : block.u) check_var(v);
  }
}

void ConicProblem::dump(std::ostream& out) const {
  out.precision(17);
  out << "conic-problem v1\n";
  out << "vars " << var_count_ << "\n";
  out << "objective";
  for (int v = 0; v < var_count_; ++v)
    if (obj_[v] != 0.0) out << " " << v << ":" << obj_[v];
  out << "\n";
  auto dump_rows = [&](const char* tag, const std::vector<int>& rowptr,
                       const std::vector<int>& cols, const std::vector<double>& vals,
                       const std::vector<double>& rhs) {
    out << tag << " " << rhs.size() << "\n";
    for (std::size_t r = 0; r < rhs.size(); ++r) {
      for (int k = rowptr[r]; k < rowptr[r + 1]; ++k)
        out << r << " " << cols[static_cast<std::size_t>(k)] << " "
            << vals[static_cast<std::size_t>(k)] << "\n";
      out << r << " rhs " << rhs[r] << "\n";
    }
  };
  dump_rows("equalities", eq_rowptr_, eq_cols_, eq_vals_, eq_rhs_);
  dump_rows("inequalities", in_rowptr_, in_cols_, in_vals_, in_rhs_);
  out << "soc " << soc_.size() << "\n";
  for (const auto& block : soc_) {
    out << block.t;
    for (int v : block.u) out << " " << v;
    out << "\n";
  }
}

double replay_violation(const ConicProblem& problem, const Eigen::VectorXd& v) {
  double worst = 0.0;
  const auto& erp = problem.eq_rowptr();
  const auto& ecl = problem.eq_cols();
  const auto& evl = problem.eq_vals();
  for (int r = 0; r < problem.eq_rows(); ++r) {
    double acc = 0.0;
    for (int k = erp[static_cast<std::size_t>(r)]; k < erp[static_cast<std::size_t>(r) + 1]; ++k)
      acc += evl[static_cast<std::size_t>(k)] * v[ecl[static_cast<std::size_t>(k)]];
    worst = std::max(worst, std::abs(acc - problem.eq_rhs()[static_cast<std::size_t>(r)]));
  }
  const auto& irp = problem.ineq_rowptr();
  const auto& icl = problem.ineq_cols();
  const auto& ivl = problem.ineq_vals();
  for (int r = 0; r < problem.ineq_rows(); ++r) {
    double acc = 0.0;
    for (int k = irp[static_cast<std::size_t>(r)]; k < irp[static_cast<std::size_t>(r) + 1]; ++k)
      acc += ivl[static_cast<std::size_t>(k)] * v[icl[static_cast<std::size_t>(k)]];
    worst = std::max(worst, acc - problem.ineq_rhs()[static_cast<std::size_t>(r)]);
  }
  for (const auto& block : problem.soc_blocks()) {
    double norm2 = 0.0;
    for (int u : block.u) norm2 += v[u] * v[u];
    worst = std::max(worst, std::sqrt(norm2) - v[block.t]);
  }
  return worst;
}

}  // namespace wadiro
