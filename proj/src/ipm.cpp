#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wadiro/conic.hpp"

// Homogeneous self-dual primal-dual interior-point method with
// Nesterov-Todd scaling and Mehrotra predictor-corrector steps, over
// the cone R+^l x Q_{q_1} x ... x Q_{q_k}. The KKT system is reduced to
// normal equations G' W^-2 G (dense Cholesky); equality rows are folded
// in through a Schur complement.

namespace wadiro {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Csr {
  int rows = 0;
  int cols = 0;
  std::vector<int> rowptr{0};
  std::vector<int> colidx;
  std::vector<double> values;

  void mult(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    out.resize(rows);
    for (int r = 0; r < rows; ++r) {
      double acc = 0.0;
      for (int k = rowptr[static_cast<std::size_t>(r)];
           k < rowptr[static_cast<std::size_t>(r) + 1]; ++k)
        acc += values[static_cast<std::size_t>(k)] * x[colidx[static_cast<std::size_t>(k)]];
      out[r] = acc;
    }
  }

  void mult_transpose(const Eigen::VectorXd& v, Eigen::VectorXd& out) const {
    out.setZero(cols);
    for (int r = 0; r < rows; ++r) {
      const double vr = v[r];
      if (vr == 0.0) continue;
      for (int k = rowptr[static_cast<std::size_t>(r)];
           k < rowptr[static_cast<std::size_t>(r) + 1]; ++k)
        out[colidx[static_cast<std::size_t>(k)]] += values[static_cast<std::size_t>(k)] * vr;
    }
  }
};

// Sorts the column entries of each row ascending and sums duplicates;
// the normal-equation accumulation below requires unique sorted columns.
void normalize_rows(Csr& m) {
  std::vector<int> new_rowptr{0};
  std::vector<int> new_cols;
  std::vector<double> new_vals;
  new_rowptr.reserve(m.rowptr.size());
  new_cols.reserve(m.colidx.size());
  new_vals.reserve(m.values.size());
  std::vector<std::pair<int, double>> buffer;
  for (int r = 0; r < m.rows; ++r) {
    const int lo = m.rowptr[static_cast<std::size_t>(r)];
    const int hi = m.rowptr[static_cast<std::size_t>(r) + 1];
    buffer.clear();
    for (int k = lo; k < hi; ++k)
      buffer.emplace_back(m.colidx[static_cast<std::size_t>(k)],
                          m.values[static_cast<std::size_t>(k)]);
    std::sort(buffer.begin(), buffer.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 0; k < buffer.size(); ++k) {
      if (k > 0 && buffer[k].first == new_cols.back() &&
          static_cast<int>(new_cols.size()) > new_rowptr.back()) {
        new_vals.back() += buffer[k].second;
      } else {
        new_cols.push_back(buffer[k].first);
        new_vals.push_back(buffer[k].second);
      }
    }
    new_rowptr.push_back(static_cast<int>(new_cols.size()));
  }
  m.rowptr = std::move(new_rowptr);
  m.colidx = std::move(new_cols);
  m.values = std::move(new_vals);
}

struct ConeLayout {
  int lp = 0;                  // leading nonnegative coordinates
  std::vector<int> soc;        // sizes of the SOC blocks that follow
  std::vector<int> soc_start;  // offsets into the cone vector
  int total = 0;
  int degree = 0;

  void finalize() {
    soc_start.resize(soc.size());
    int off = lp;
    for (std::size_t b = 0; b < soc.size(); ++b) {
      soc_start[b] = off;
      off += soc[b];
    }
    total = off;
    degree = lp + static_cast<int>(soc.size());
  }
};

// Unit element of the cone.
Eigen::VectorXd cone_identity(const ConeLayout& cone) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(cone.total);
  e.head(cone.lp).setOnes();
  for (std::size_t b = 0; b < cone.soc.size(); ++b) e[cone.soc_start[b]] = 1.0;
  return e;
}

bool in_interior(const ConeLayout& cone, const Eigen::VectorXd& v) {
  for (int i = 0; i < cone.lp; ++i)
    if (v[i] <= 0.0) return false;
  for (std::size_t b = 0; b < cone.soc.size(); ++b) {
    const int s = cone.soc_start[b];
    const int q = cone.soc[b];
    if (v[s] <= 0.0 || v[s] * v[s] <= v.segment(s + 1, q - 1).squaredNorm()) return false;
  }
  return true;
}

// Shifts v along the identity until it is comfortably interior.
void interiorize(const ConeLayout& cone, Eigen::VectorXd& v) {
  double need = 0.0;
  for (int i = 0; i < cone.lp; ++i) need = std::max(need, -v[i]);
  for (std::size_t b = 0; b < cone.soc.size(); ++b) {
    const int s = cone.soc_start[b];
    const int q = cone.soc[b];
    need = std::max(need, v.segment(s + 1, q - 1).norm() - v[s]);
  }
  if (need > 0.0 || !in_interior(cone, v)) {
    const double shift = need + 1.0;
    for (int i = 0; i < cone.lp; ++i) v[i] += shift;
    for (std::size_t b = 0; b < cone.soc.size(); ++b) v[cone.soc_start[b]] += shift;
  }
}

// Largest step alpha with v + alpha * dv staying in the cone.
double max_step(const ConeLayout& cone, const Eigen::VectorXd& v, const Eigen::VectorXd& dv) {
  double alpha = kInf;
  for (int i = 0; i < cone.lp; ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  for (std::size_t b = 0; b < cone.soc.size(); ++b) {
    const int s = cone.soc_start[b];
    const int q = cone.soc[b];
    const double v0 = v[s], d0 = dv[s];
    const auto vb = v.segment(s + 1, q - 1);
    const auto db = dv.segment(s + 1, q - 1);
    const double a = d0 * d0 - db.squaredNorm();
    const double bq = 2.0 * (v0 * d0 - vb.dot(db));
    const double c = v0 * v0 - vb.squaredNorm();
    // c > 0 at an interior point; the boundary is hit at the first
    // positive root of a t^2 + b t + c.
    double root = kInf;
    if (std::abs(a) < 1e-300) {
      if (bq < 0.0) root = -c / bq;
    } else {
      const double disc = bq * bq - 4.0 * a * c;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double r1 = (-bq - sq) / (2.0 * a);
        const double r2 = (-bq + sq) / (2.0 * a);
        const double lo = std::min(r1, r2), hi = std::max(r1, r2);
        if (lo > 0.0)
          root = lo;
        else if (hi > 0.0 && a < 0.0)
          root = hi;
      }
    }
    if (d0 < 0.0) root = std::min(root, -v0 / d0);
    alpha = std::min(alpha, root);
  }
  return alpha;
}

// Nesterov-Todd scaling state. W is symmetric; lambda = W z = W^-1 s.
struct Scaling {
  const ConeLayout* cone = nullptr;
  Eigen::VectorXd w_lp;  // sqrt(s_i / z_i)
  std::vector<double> eta;
  std::vector<Eigen::VectorXd> wbar;
  Eigen::VectorXd lambda;

  bool compute(const Eigen::VectorXd& s, const Eigen::VectorXd& z) {
    const auto& c = *cone;
    w_lp.resize(c.lp);
    lambda.resize(c.total);
    for (int i = 0; i < c.lp; ++i) {
      if (s[i] <= 0.0 || z[i] <= 0.0) return false;
      w_lp[i] = std::sqrt(s[i] / z[i]);
      lambda[i] = std::sqrt(s[i] * z[i]);
    }
    eta.assign(c.soc.size(), 0.0);
    wbar.assign(c.soc.size(), {});
    for (std::size_t b = 0; b < c.soc.size(); ++b) {
      const int st = c.soc_start[b];
      const int q = c.soc[b];
      const auto sb = s.segment(st, q);
      const auto zb = z.segment(st, q);
      const double rs = sb[0] * sb[0] - sb.tail(q - 1).squaredNorm();
      const double rz = zb[0] * zb[0] - zb.tail(q - 1).squaredNorm();
      if (rs <= 0.0 || rz <= 0.0 || sb[0] <= 0.0 || zb[0] <= 0.0) return false;
      const Eigen::VectorXd sn = sb / std::sqrt(rs);
      const Eigen::VectorXd zn = zb / std::sqrt(rz);
      const double gamma = std::sqrt((1.0 + sn.dot(zn)) / 2.0);
      Eigen::VectorXd w(q);
      w[0] = (sn[0] + zn[0]) / (2.0 * gamma);
      w.tail(q - 1) = (sn.tail(q - 1) - zn.tail(q - 1)) / (2.0 * gamma);
      eta[b] = std::pow(rs / rz, 0.25);
      wbar[b] = w;
      // lambda_b = W z_b = eta * Wbar(zn * sqrt(rz))
      Eigen::VectorXd lz(q);
      apply_wbar(w, zb, lz);
      lambda.segment(st, q) = eta[b] * lz;
    }
    return true;
  }

  static void apply_wbar(const Eigen::VectorXd& w, const Eigen::Ref<const Eigen::VectorXd>& u,
                         Eigen::VectorXd& out) {
    const int q = static_cast<int>(w.size());
    const double dot_tail = w.tail(q - 1).dot(u.tail(q - 1));
    out.resize(q);
    out[0] = w[0] * u[0] + dot_tail;
    out.tail(q - 1) =
        u.tail(q - 1) + (u[0] + dot_tail / (1.0 + w[0])) * w.tail(q - 1);
  }

  static void apply_wbar_inv(const Eigen::VectorXd& w,
                             const Eigen::Ref<const Eigen::VectorXd>& u,
                             Eigen::VectorXd& out) {
    const int q = static_cast<int>(w.size());
    const double dot_tail = w.tail(q - 1).dot(u.tail(q - 1));
    out.resize(q);
    out[0] = w[0] * u[0] - dot_tail;
    out.tail(q - 1) =
        u.tail(q - 1) + (-u[0] + dot_tail / (1.0 + w[0])) * w.tail(q - 1);
  }

  Eigen::VectorXd apply_w(const Eigen::VectorXd& u) const {
    const auto& c = *cone;
    Eigen::VectorXd out(c.total);
    out.head(c.lp) = w_lp.cwiseProduct(u.head(c.lp));
    Eigen::VectorXd tmp;
    for (std::size_t b = 0; b < c.soc.size(); ++b) {
      const int st = c.soc_start[b];
      const int q = c.soc[b];
      apply_wbar(wbar[b], u.segment(st, q), tmp);
      out.segment(st, q) = eta[b] * tmp;
    }
    return out;
  }

  Eigen::VectorXd apply_w_inv(const Eigen::VectorXd& u) const {
    const auto& c = *cone;
    Eigen::VectorXd out(c.total);
    out.head(c.lp) = u.head(c.lp).cwiseQuotient(w_lp);
    Eigen::VectorXd tmp;
    for (std::size_t b = 0; b < c.soc.size(); ++b) {
      const int st = c.soc_start[b];
      const int q = c.soc[b];
      apply_wbar_inv(wbar[b], u.segment(st, q), tmp);
      out.segment(st, q) = tmp / eta[b];
    }
    return out;
  }

  // W^-2 u  (identity scaling when the state is empty).
  Eigen::VectorXd apply_w_inv2(const Eigen::VectorXd& u) const {
    return apply_w_inv(apply_w_inv(u));
  }
};

// Jordan product u o v.
Eigen::VectorXd jordan_product(const ConeLayout& cone, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v) {
  Eigen::VectorXd out(cone.total);
  out.head(cone.lp) = u.head(cone.lp).cwiseProduct(v.head(cone.lp));
  for (std::size_t b = 0; b < cone.soc.size(); ++b) {
    const int s = cone.soc_start[b];
    const int q = cone.soc[b];
    const auto ub = u.segment(s, q);
    const auto vb = v.segment(s, q);
    out[s] = ub.dot(vb);
    out.segment(s + 1, q - 1) = ub[0] * vb.tail(q - 1) + vb[0] * ub.tail(q - 1);
  }
  return out;
}

// Solves lambda o v = u for v.
Eigen::VectorXd jordan_solve(const ConeLayout& cone, const Eigen::VectorXd& lambda,
                             const Eigen::VectorXd& u) {
  Eigen::VectorXd out(cone.total);
  out.head(cone.lp) = u.head(cone.lp).cwiseQuotient(lambda.head(cone.lp));
  for (std::size_t b = 0; b < cone.soc.size(); ++b) {
    const int s = cone.soc_start[b];
    const int q = cone.soc[b];
    const auto lb = lambda.segment(s, q);
    const auto ub = u.segment(s, q);
    const double det = lb[0] * lb[0] - lb.tail(q - 1).squaredNorm();
    const double v0 = (lb[0] * ub[0] - lb.tail(q - 1).dot(ub.tail(q - 1))) / det;
    out[s] = v0;
    out.segment(s + 1, q - 1) = (ub.tail(q - 1) - v0 * lb.tail(q - 1)) / lb[0];
  }
  return out;
}

// Accumulates sum_r weight[r] * g_r g_r' over the LP rows of G into the
// lower triangle of M. Column entries of each row must be sorted.
void accumulate_lp_normal_serial(const Csr& g, int lp_rows, const Eigen::VectorXd& weight,
                                 Eigen::MatrixXd& m) {
  for (int r = 0; r < lp_rows; ++r) {
    const double w = weight[r];
    const int lo = g.rowptr[static_cast<std::size_t>(r)];
    const int hi = g.rowptr[static_cast<std::size_t>(r) + 1];
    for (int kb = lo; kb < hi; ++kb) {
      const int cb = g.colidx[static_cast<std::size_t>(kb)];
      const double vb = w * g.values[static_cast<std::size_t>(kb)];
      for (int ka = kb; ka < hi; ++ka)
        m(g.colidx[static_cast<std::size_t>(ka)], cb) +=
            vb * g.values[static_cast<std::size_t>(ka)];
    }
  }
}

// OpenMP variant: each thread owns a contiguous column range, so every
// entry of M is written by exactly one thread and summed in row order.
// Bit-identical to the serial kernel for any thread count.
void accumulate_lp_normal(const Csr& g, int lp_rows, const Eigen::VectorXd& weight,
                          Eigen::MatrixXd& m) {
#ifdef _OPENMP
  // Thread startup costs more than the work on small instances.
  if (lp_rows == 0 || g.rowptr[static_cast<std::size_t>(lp_rows)] < 16384) {
    accumulate_lp_normal_serial(g, lp_rows, weight, m);
    return;
  }
  const int n = static_cast<int>(m.cols());
#pragma omp parallel
  {
    int nt = 1, tid = 0;
#ifdef _OPENMP
    nt = omp_get_num_threads();
    tid = omp_get_thread_num();
#endif
    const int chunk = (n + nt - 1) / nt;
    const int col_lo = std::min(n, tid * chunk);
    const int col_hi = std::min(n, col_lo + chunk);
    if (col_lo < col_hi) {
      for (int r = 0; r < lp_rows; ++r) {
        const double w = weight[r];
        const int lo = g.rowptr[static_cast<std::size_t>(r)];
        const int hi = g.rowptr[static_cast<std::size_t>(r) + 1];
        const int* cols = g.colidx.data();
        int kb = static_cast<int>(std::lower_bound(cols + lo, cols + hi, col_lo) - cols);
        for (; kb < hi && cols[kb] < col_hi; ++kb) {
          const int cb = cols[kb];
          const double vb = w * g.values[static_cast<std::size_t>(kb)];
          for (int ka = kb; ka < hi; ++ka)
            m(cols[ka], cb) += vb * g.values[static_cast<std::size_t>(ka)];
        }
      }
    }
  }
#else
  accumulate_lp_normal_serial(g, lp_rows, weight, m);
#endif
}

struct KktSolver {
  const Csr* g = nullptr;
  const Csr* a = nullptr;
  const ConeLayout* cone = nullptr;
  const Scaling* scaling = nullptr;  // nullptr means W = I
  Eigen::MatrixXd m;                 // G' W^-2 G + delta I (lower triangle)
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd minv_at;  // M^-1 A' (n x p)
  Eigen::LDLT<Eigen::MatrixXd> schur;
  double delta = 0.0;

  bool factor(double base_delta) {
    const int n = g->cols;
    const int p = a->rows;
    m.setZero(n, n);

    // LP part: weights z_i/s_i = 1/w_i^2 (1 under identity scaling).
    Eigen::VectorXd weight(cone->lp);
    if (scaling)
      weight = scaling->w_lp.array().square().inverse();
    else
      weight.setOnes();
    accumulate_lp_normal(*g, cone->lp, weight, m);

    // SOC part: eta^-2 (2 v v' - G_b' J G_b) with v = G_b' J wbar.
    for (std::size_t b = 0; b < cone->soc.size(); ++b) {
      const int st = cone->soc_start[b];
      const int q = cone->soc[b];
      Eigen::VectorXd jw(q);
      if (scaling) {
        jw[0] = scaling->wbar[b][0];
        jw.tail(q - 1) = -scaling->wbar[b].tail(q - 1);
      } else {
        jw.setZero();
        jw[0] = 1.0;
      }
      const double inv_eta2 = scaling ? 1.0 / (scaling->eta[b] * scaling->eta[b]) : 1.0;
      // Dense v over the variables touched by this block.
      std::vector<int> vars;
      std::vector<double> vvals;
      for (int rr = st; rr < st + q; ++rr) {
        for (int k = g->rowptr[static_cast<std::size_t>(rr)];
             k < g->rowptr[static_cast<std::size_t>(rr) + 1]; ++k) {
          vars.push_back(g->colidx[static_cast<std::size_t>(k)]);
          vvals.push_back(g->values[static_cast<std::size_t>(k)] * jw[rr - st]);
        }
      }
      for (std::size_t i = 0; i < vars.size(); ++i)
        for (std::size_t jj = 0; jj < vars.size(); ++jj)
          if (vars[i] >= vars[jj]) m(vars[i], vars[jj]) += inv_eta2 * 2.0 * vvals[i] * vvals[jj];
      // -G' J G: +1 on the t row (J=+1, sign squared), -1 on tails.
      for (int rr = st; rr < st + q; ++rr) {
        const double jsign = (rr == st) ? -1.0 : 1.0;
        for (int k = g->rowptr[static_cast<std::size_t>(rr)];
             k < g->rowptr[static_cast<std::size_t>(rr) + 1]; ++k) {
          const int cc = g->colidx[static_cast<std::size_t>(k)];
          const double vv = g->values[static_cast<std::size_t>(k)];
          m(cc, cc) += inv_eta2 * jsign * vv * vv;
        }
      }
    }

    double maxdiag = 1.0;
    for (int i = 0; i < n; ++i) maxdiag = std::max(maxdiag, std::abs(m(i, i)));
    // Regularize only when the factorization actually fails; a shift
    // proportional to the (possibly huge) diagonal would poison the
    // first KKT row as the barrier degenerates.
    delta = 0.0;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::MatrixXd mr = m;
      mr.diagonal().array() += delta;
      llt.compute(mr);
      if (llt.info() == Eigen::Success) {
        if (p > 0) {
          minv_at.resize(n, p);
          Eigen::VectorXd col(n);
          for (int r = 0; r < p; ++r) {
            col.setZero();
            for (int k = a->rowptr[static_cast<std::size_t>(r)];
                 k < a->rowptr[static_cast<std::size_t>(r) + 1]; ++k)
              col[a->colidx[static_cast<std::size_t>(k)]] +=
                  a->values[static_cast<std::size_t>(k)];
            minv_at.col(r) = llt.solve(col);
          }
          Eigen::MatrixXd s(p, p);
          Eigen::VectorXd arow;
          for (int r = 0; r < p; ++r) {
            a->mult(minv_at.col(r), arow);
            s.col(r) = arow;
          }
          s.diagonal().array() += delta;
          schur.compute(s);
          if (schur.info() != Eigen::Success) {
            delta = std::max(delta * 1e3, base_delta * maxdiag);
            continue;
          }
        }
        return true;
      }
      delta = std::max(delta * 1e3, base_delta * maxdiag);
    }
    return false;
  }

  // Solves [0 A' G'; A 0 0; G 0 -W^2] (x,y,z) = (bx,by,bz) with
  // adaptive iterative refinement against the unregularized system.
  void solve(const Eigen::VectorXd& bx, const Eigen::VectorXd& by, const Eigen::VectorXd& bz,
             Eigen::VectorXd& ux, Eigen::VectorXd& uy, Eigen::VectorXd& uz) const {
    solve_once(bx, by, bz, ux, uy, uz);
    const double rhs_scale =
        std::max({bx.lpNorm<Eigen::Infinity>(), by.size() ? by.lpNorm<Eigen::Infinity>() : 0.0,
                  bz.lpNorm<Eigen::Infinity>(), 1e-300});
    double prev = kInf;
    for (int round = 0; round < 5; ++round) {
      Eigen::VectorXd gt_uz, at_uy, g_ux, a_ux;
      g->mult_transpose(uz, gt_uz);
      a->mult_transpose(uy, at_uy);
      g->mult(ux, g_ux);
      a->mult(ux, a_ux);
      const Eigen::VectorXd w2uz =
          scaling ? scaling->apply_w(scaling->apply_w(uz)) : uz;
      const Eigen::VectorXd r1 = bx - (at_uy + gt_uz);
      const Eigen::VectorXd r2 = by - a_ux;
      const Eigen::VectorXd r3 = bz - (g_ux - w2uz);
      const double rnorm =
          std::max({r1.lpNorm<Eigen::Infinity>(), r2.size() ? r2.lpNorm<Eigen::Infinity>() : 0.0,
                    r3.lpNorm<Eigen::Infinity>()});
      if (rnorm <= 1e-14 * rhs_scale || rnorm >= 0.5 * prev) break;
      prev = rnorm;
      Eigen::VectorXd cx, cy, cz;
      solve_once(r1, r2, r3, cx, cy, cz);
      ux += cx;
      uy += cy;
      uz += cz;
    }
  }

  void solve_once(const Eigen::VectorXd& bx, const Eigen::VectorXd& by,
                  const Eigen::VectorXd& bz, Eigen::VectorXd& ux, Eigen::VectorXd& uy,
                  Eigen::VectorXd& uz) const {
    const Eigen::VectorXd winv2_bz = scaling ? scaling->apply_w_inv2(bz) : bz;
    Eigen::VectorXd rhs1;
    g->mult_transpose(winv2_bz, rhs1);
    rhs1 += bx;
    const Eigen::VectorXd t1 = llt.solve(rhs1);
    if (a->rows > 0) {
      Eigen::VectorXd at1;
      a->mult(t1, at1);
      uy = schur.solve(at1 - by);
      ux = t1 - minv_at * uy;
    } else {
      uy.resize(0);
      ux = t1;
    }
    Eigen::VectorXd g_ux;
    g->mult(ux, g_ux);
    uz = scaling ? scaling->apply_w_inv2(Eigen::VectorXd(g_ux - bz)) : Eigen::VectorXd(g_ux - bz);
  }
};

struct Residuals {
  double pres = kInf;
  double dres = kInf;
  double gap_rel = kInf;
  double pobj = 0.0;
  double dobj = 0.0;
};

// Ruiz equilibration of the stacked constraint matrix plus objective
// scaling. Rows of one SOC block share a scale (the cone is only
// invariant under uniform positive scaling); LP and equality rows scale
// freely. Columns are a plain variable substitution.
struct Equilibration {
  Eigen::VectorXd col;    // x = col .* x_scaled
  Eigen::VectorXd row_g;  // m
  Eigen::VectorXd row_a;  // p
  double obj_scale = 1.0;
};

Equilibration equilibrate(Csr& g, Csr& a, Eigen::VectorXd& h, Eigen::VectorXd& b,
                          Eigen::VectorXd& c, const ConeLayout& cone) {
  const int n = g.cols;
  const int m = g.rows;
  const int p = a.rows;
  Equilibration eq;
  eq.col = Eigen::VectorXd::Ones(n);
  eq.row_g = Eigen::VectorXd::Ones(m);
  eq.row_a = Eigen::VectorXd::Ones(p);

  Eigen::VectorXd row_norm_g(m), row_norm_a(p), col_norm(n);
  for (int pass = 0; pass < 10; ++pass) {
    row_norm_g.setZero();
    row_norm_a.setZero();
    // The cost vector joins the column norms like a stacked row, so
    // objective-only variables get balanced as well.
    col_norm = c.cwiseAbs();
    for (int r = 0; r < m; ++r)
      for (int k = g.rowptr[static_cast<std::size_t>(r)];
           k < g.rowptr[static_cast<std::size_t>(r) + 1]; ++k) {
        const double v = std::abs(g.values[static_cast<std::size_t>(k)]);
        row_norm_g[r] = std::max(row_norm_g[r], v);
        col_norm[g.colidx[static_cast<std::size_t>(k)]] =
            std::max(col_norm[g.colidx[static_cast<std::size_t>(k)]], v);
      }
    for (int r = 0; r < p; ++r)
      for (int k = a.rowptr[static_cast<std::size_t>(r)];
           k < a.rowptr[static_cast<std::size_t>(r) + 1]; ++k) {
        const double v = std::abs(a.values[static_cast<std::size_t>(k)]);
        row_norm_a[r] = std::max(row_norm_a[r], v);
        col_norm[a.colidx[static_cast<std::size_t>(k)]] =
            std::max(col_norm[a.colidx[static_cast<std::size_t>(k)]], v);
      }
    // One scale per SOC block.
    for (std::size_t bk = 0; bk < cone.soc.size(); ++bk) {
      double block = 0.0;
      for (int r = cone.soc_start[bk]; r < cone.soc_start[bk] + cone.soc[bk]; ++r)
        block = std::max(block, row_norm_g[r]);
      for (int r = cone.soc_start[bk]; r < cone.soc_start[bk] + cone.soc[bk]; ++r)
        row_norm_g[r] = block;
    }
    auto scale_of = [](double norm) { return norm > 0.0 ? 1.0 / std::sqrt(norm) : 1.0; };
    for (int r = 0; r < m; ++r) {
      const double s = scale_of(row_norm_g[r]);
      eq.row_g[r] *= s;
      for (int k = g.rowptr[static_cast<std::size_t>(r)];
           k < g.rowptr[static_cast<std::size_t>(r) + 1]; ++k)
        g.values[static_cast<std::size_t>(k)] *= s;
    }
    for (int r = 0; r < p; ++r) {
      const double s = scale_of(row_norm_a[r]);
      eq.row_a[r] *= s;
      for (int k = a.rowptr[static_cast<std::size_t>(r)];
           k < a.rowptr[static_cast<std::size_t>(r) + 1]; ++k)
        a.values[static_cast<std::size_t>(k)] *= s;
    }
    Eigen::VectorXd col_scale(n);
    for (int j = 0; j < n; ++j) col_scale[j] = scale_of(col_norm[j]);
    eq.col.array() *= col_scale.array();
    c.array() *= col_scale.array();
    for (std::size_t k = 0; k < g.values.size(); ++k)
      g.values[k] *= col_scale[g.colidx[k]];
    for (std::size_t k = 0; k < a.values.size(); ++k)
      a.values[k] *= col_scale[a.colidx[k]];
  }
  h.array() *= eq.row_g.array();
  if (p > 0) b.array() *= eq.row_a.array();
  eq.obj_scale = std::max(1.0, c.lpNorm<Eigen::Infinity>());
  c /= eq.obj_scale;
  return eq;
}

SolveReport solve_eq_only(const Csr& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                          double tol) {
  // No cone constraints at all: either the objective is orthogonal to
  // the feasible affine set (optimal) or the problem is unbounded.
  SolveReport report;
  const int n = static_cast<int>(c.size());
  Eigen::MatrixXd ad = Eigen::MatrixXd::Zero(a.rows, n);
  for (int r = 0; r < a.rows; ++r)
    for (int k = a.rowptr[static_cast<std::size_t>(r)];
         k < a.rowptr[static_cast<std::size_t>(r) + 1]; ++k)
      ad(r, a.colidx[static_cast<std::size_t>(k)]) += a.values[static_cast<std::size_t>(k)];
  if (a.rows == 0) {
    if (c.lpNorm<Eigen::Infinity>() <= tol) {
      report.status = SolveStatus::optimal;
      report.primal = Eigen::VectorXd::Zero(n);
      report.objective_value = 0.0;
    } else {
      report.status = SolveStatus::unbounded;
    }
    return report;
  }
  const auto qr = ad.colPivHouseholderQr();
  const Eigen::VectorXd x = qr.solve(b);
  if ((ad * x - b).lpNorm<Eigen::Infinity>() > tol * (1.0 + b.lpNorm<Eigen::Infinity>())) {
    report.status = SolveStatus::infeasible;
    return report;
  }
  const Eigen::VectorXd y = ad.transpose().colPivHouseholderQr().solve(-c);
  if ((ad.transpose() * y + c).lpNorm<Eigen::Infinity>() >
      tol * (1.0 + c.lpNorm<Eigen::Infinity>())) {
    report.status = SolveStatus::unbounded;
    return report;
  }
  report.status = SolveStatus::optimal;
  report.primal = x;
  report.objective_value = c.dot(x);
  report.primal_residual = (ad * x - b).lpNorm<Eigen::Infinity>();
  report.dual_residual = (ad.transpose() * y + c).lpNorm<Eigen::Infinity>();
  report.gap = 0.0;
  return report;
}

}  // namespace

SolveReport solve_conic(const ConicProblem& problem, const SolverOptions& options) {
  const auto t_start = std::chrono::steady_clock::now();
  problem.validate();
  if (!(options.tol > 0.0 && options.tol <= 1e-2))
    throw std::invalid_argument("solver tolerance must lie in (0, 1e-2]");

  const int n = problem.var_count();
  const int m_lp = problem.ineq_rows();
  const int p = problem.eq_rows();

  ConeLayout cone;
  cone.lp = m_lp;
  for (const auto& block : problem.soc_blocks())
    cone.soc.push_back(1 + static_cast<int>(block.u.size()));
  cone.finalize();
  const int m = cone.total;

  // G, h: LP rows first, then -identity rows of every SOC block.
  Csr g;
  g.rows = m;
  g.cols = n;
  g.rowptr = problem.ineq_rowptr();
  g.colidx = problem.ineq_cols();
  g.values = problem.ineq_vals();
  Eigen::VectorXd h(m);
  for (int r = 0; r < m_lp; ++r) h[r] = problem.ineq_rhs()[static_cast<std::size_t>(r)];
  for (const auto& block : problem.soc_blocks()) {
    g.colidx.push_back(block.t);
    g.values.push_back(-1.0);
    g.rowptr.push_back(static_cast<int>(g.colidx.size()));
    for (int u : block.u) {
      g.colidx.push_back(u);
      g.values.push_back(-1.0);
      g.rowptr.push_back(static_cast<int>(g.colidx.size()));
    }
  }
  h.tail(m - m_lp).setZero();
  normalize_rows(g);

  Csr a;
  a.rows = p;
  a.cols = n;
  a.rowptr = problem.eq_rowptr();
  a.colidx = problem.eq_cols();
  a.values = problem.eq_vals();
  Eigen::VectorXd b(p);
  for (int r = 0; r < p; ++r) b[r] = problem.eq_rhs()[static_cast<std::size_t>(r)];
  Eigen::VectorXd c = problem.objective();

  SolveReport report;
  if (m == 0) {
    report = solve_eq_only(a, b, c, options.tol);
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
  }

  const Equilibration eq = equilibrate(g, a, h, b, c, cone);

  const double norm_b = p > 0 ? b.lpNorm<Eigen::Infinity>() : 0.0;
  const double norm_h = h.lpNorm<Eigen::Infinity>();
  const double norm_c = c.lpNorm<Eigen::Infinity>();

  KktSolver kkt;
  kkt.g = &g;
  kkt.a = &a;
  kkt.cone = &cone;
  kkt.scaling = nullptr;

  auto fail = [&](SolveStatus status) {
    report.status = status;
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
  };

  if (!kkt.factor(1e-12)) return fail(SolveStatus::numerical_error);

  // ECOS-style initialization from two identity-scaled solves.
  Eigen::VectorXd x(n), y(p), z(m), s(m);
  {
    Eigen::VectorXd ux, uy, uz;
    kkt.solve(Eigen::VectorXd::Zero(n), b, h, ux, uy, uz);
    x = ux;
    s = -uz;
    interiorize(cone, s);
    kkt.solve(-c, Eigen::VectorXd::Zero(p), Eigen::VectorXd::Zero(m), ux, uy, uz);
    y = uy;
    z = uz;
    interiorize(cone, z);
  }
  double tau = 1.0, kappa = 1.0;

  Scaling scaling;
  scaling.cone = &cone;

  const Eigen::VectorXd e = cone_identity(cone);
  const double degree = cone.degree + 1;

  Residuals res;
  auto eval_residuals = [&]() {
    Eigen::VectorXd ax, gx, aty, gtz;
    a.mult(x, ax);
    g.mult(x, gx);
    a.mult_transpose(y, aty);
    g.mult_transpose(z, gtz);
    const double inv_tau = 1.0 / tau;
    double pr = 0.0;
    if (p > 0) pr = (ax * inv_tau - b).lpNorm<Eigen::Infinity>() / (1.0 + norm_b);
    pr = std::max(pr, ((gx + s) * inv_tau - h).lpNorm<Eigen::Infinity>() / (1.0 + norm_h));
    res.pres = pr;
    res.dres = ((aty + gtz) * inv_tau + c).lpNorm<Eigen::Infinity>() / (1.0 + norm_c);
    // Objectives in original units, so the gap criterion is not diluted
    // by the objective scaling.
    res.pobj = c.dot(x) * inv_tau * eq.obj_scale;
    res.dobj = -(b.dot(y) + h.dot(z)) * inv_tau * eq.obj_scale;
    res.gap_rel = std::abs(res.pobj - res.dobj) /
                  (1.0 + std::max(std::abs(res.pobj), std::abs(res.dobj)));
  };

  auto finish_optimal = [&](SolveStatus status) {
    report.status = status;
    report.primal = eq.col.cwiseProduct(x / tau);
    report.objective_value = problem.objective().dot(report.primal);
    report.primal_residual = replay_violation(problem, report.primal);
    report.dual_residual = res.dres;
    report.gap = res.gap_rel;
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
  };

  int iter = 0;
  double best_score = kInf;
  Eigen::VectorXd best_x = x;
  double best_tau = tau;
  Residuals best_res;
  int stall_count = 0;
  for (; iter < options.max_iterations; ++iter) {
    report.iterations = iter;
    eval_residuals();
    const double score = std::max({res.pres, res.dres, res.gap_rel});
    if (score < best_score) {
      best_score = score;
      best_x = x;
      best_tau = tau;
      best_res = res;
      stall_count = 0;
    } else if (++stall_count >= 60) {
      // No residual progress for ten iterations: return the best
      // iterate instead of polishing a degenerate barrier.
      x = best_x;
      tau = best_tau;
      res = best_res;
      return finish_optimal(best_score <= options.tol ? SolveStatus::optimal
                                                      : SolveStatus::max_iter);
    }
    if (options.verbose) {
      // One line per iteration: pres dres gap tau kappa.
      std::fprintf(stderr, "iter %3d  pres %9.2e  dres %9.2e  gap %9.2e  tau %9.2e  kappa %9.2e\n",
                   iter, res.pres, res.dres, res.gap_rel, tau, kappa);
    }
    if (res.pres <= options.tol && res.dres <= options.tol && res.gap_rel <= options.tol)
      return finish_optimal(SolveStatus::optimal);

    // Infeasibility / unboundedness certificates.
    {
      const double by_hz = b.dot(y) + h.dot(z);
      if (by_hz < 0.0) {
        Eigen::VectorXd aty, gtz;
        a.mult_transpose(y, aty);
        g.mult_transpose(z, gtz);
        const double cert = (aty + gtz).lpNorm<Eigen::Infinity>() *
                            std::max(1.0, std::max(norm_b, norm_h)) / (-by_hz);
        if (cert <= options.tol * std::max(1.0, norm_c)) {
          report.status = SolveStatus::infeasible;
          report.iterations = iter;
          report.wall_time =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                  .count();
          return report;
        }
      }
      const double ctx = c.dot(x);
      if (ctx < 0.0) {
        Eigen::VectorXd ax, gx;
        a.mult(x, ax);
        g.mult(x, gx);
        const double viol = std::max(p > 0 ? ax.lpNorm<Eigen::Infinity>() : 0.0,
                                     (gx + s).lpNorm<Eigen::Infinity>());
        const double cert = viol * std::max(1.0, norm_c) / (-ctx);
        if (cert <= options.tol * std::max(1.0, std::max(norm_b, norm_h))) {
          report.status = SolveStatus::unbounded;
          report.iterations = iter;
          report.wall_time =
              std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                  .count();
          return report;
        }
      }
    }

    if (!scaling.compute(s, z)) return fail(SolveStatus::numerical_error);
    kkt.scaling = &scaling;
    if (!kkt.factor(1e-12)) return fail(SolveStatus::numerical_error);

    const double mu = (s.dot(z) + tau * kappa) / degree;

    // Residual vectors (F = 0 at a solution).
    Eigen::VectorXd aty, gtz, ax, gx;
    a.mult_transpose(y, aty);
    g.mult_transpose(z, gtz);
    a.mult(x, ax);
    g.mult(x, gx);
    const Eigen::VectorXd f1 = aty + gtz + c * tau;
    const Eigen::VectorXd f2 = ax - b * tau;
    const Eigen::VectorXd f3 = gx + s - h * tau;
    const double f4 = c.dot(x) + b.dot(y) + h.dot(z) + kappa;

    Eigen::VectorXd x1, y1, z1;
    kkt.solve(-c, b, h, x1, y1, z1);
    const double denom = c.dot(x1) + b.dot(y1) + h.dot(z1) - kappa / tau;

    auto directions = [&](const Eigen::VectorXd& ds_scaled, double dkappa_rhs,
                          double res_weight, Eigen::VectorXd& dx, Eigen::VectorXd& dy,
                          Eigen::VectorXd& dz, Eigen::VectorXd& ds, double& dtau,
                          double& dkappa) {
      const Eigen::VectorXd bz = -res_weight * f3 - scaling.apply_w(ds_scaled);
      Eigen::VectorXd x2, y2, z2;
      kkt.solve(-res_weight * f1, -res_weight * f2, bz, x2, y2, z2);
      const double numer = -res_weight * f4 - dkappa_rhs / tau -
                           (c.dot(x2) + b.dot(y2) + h.dot(z2));
      dtau = numer / denom;
      dx = x2 + dtau * x1;
      dy = y2 + dtau * y1;
      dz = z2 + dtau * z1;
      ds = scaling.apply_w(Eigen::VectorXd(ds_scaled - scaling.apply_w(dz)));
      dkappa = (dkappa_rhs - kappa * dtau) / tau;
    };

    // Predictor (affine) direction.
    Eigen::VectorXd dxa, dya, dza, dsa;
    double dtaua, dkappaa;
    directions(Eigen::VectorXd(-scaling.lambda), -tau * kappa, 1.0, dxa, dya, dza, dsa, dtaua,
               dkappaa);

    double alpha_aff = std::min(max_step(cone, s, dsa), max_step(cone, z, dza));
    if (dtaua < 0.0) alpha_aff = std::min(alpha_aff, -tau / dtaua);
    if (dkappaa < 0.0) alpha_aff = std::min(alpha_aff, -kappa / dkappaa);
    alpha_aff = std::min(alpha_aff, 1.0);
    // Cap the centering weight so every step keeps reducing residuals.
    const double sigma = std::min(0.99, std::pow(1.0 - alpha_aff, 3.0));

    // Corrector.
    const Eigen::VectorXd ws_aff = scaling.apply_w_inv(dsa);
    const Eigen::VectorXd wz_aff = scaling.apply_w(dza);
    Eigen::VectorXd d_compl = -jordan_product(cone, scaling.lambda, scaling.lambda) -
                              jordan_product(cone, ws_aff, wz_aff) + sigma * mu * e;
    const Eigen::VectorXd ds_scaled = jordan_solve(cone, scaling.lambda, d_compl);
    const double dkappa_rhs = -tau * kappa - dtaua * dkappaa + sigma * mu;

    Eigen::VectorXd dx, dy, dz, ds;
    double dtau, dkappa;
    directions(ds_scaled, dkappa_rhs, 1.0 - sigma, dx, dy, dz, ds, dtau, dkappa);

    double alpha = std::min(max_step(cone, s, ds), max_step(cone, z, dz));
    if (dtau < 0.0) alpha = std::min(alpha, -tau / dtau);
    if (dkappa < 0.0) alpha = std::min(alpha, -kappa / dkappa);
    alpha = std::min(0.99 * alpha, 1.0);
    if (!std::isfinite(alpha) || alpha <= 1e-13) return fail(SolveStatus::numerical_error);

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * ds;
    tau += alpha * dtau;
    kappa += alpha * dkappa;
    if (!(tau > 0.0) || !(kappa > 0.0) || !x.allFinite() || !s.allFinite())
      return fail(SolveStatus::numerical_error);
  }

  report.iterations = iter;
  eval_residuals();
  return finish_optimal(SolveStatus::max_iter);
}

SolveReport solve_lp(const ConicProblem& problem, double tol) {
  if (!problem.soc_blocks().empty())
    throw std::invalid_argument("solve_lp: problem carries SOC blocks");
  SolverOptions options;
  options.tol = tol;
  return solve_conic(problem, options);
}

SolveReport solve_socp(const ConicProblem& problem, double tol) {
  SolverOptions options;
  options.tol = tol;
  return solve_conic(problem, options);
}

}  // namespace wadiro
