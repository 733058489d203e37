#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "sdfsc/common.hpp"

namespace sdfsc {

/// min 1/2 x^T Q x + c^T x
///   s.t. E x = d,  A x <= b,  lb <= x <= ub  (infinite bounds allowed)
struct QpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd E;
  Eigen::VectorXd d;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd lb, ub;

  int vars() const { return static_cast<int>(Q.rows()); }

  void validate() const {
    const int n = vars();
    if (Q.cols() != n || c.size() != n) throw ModelError("QpProblem: Q/c dimension mismatch");
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + Q.cwiseAbs().maxCoeff()))
      throw ModelError("QpProblem: Q must be symmetric");
    if (E.rows() != d.size() || (E.rows() > 0 && E.cols() != n))
      throw ModelError("QpProblem: E/d dimension mismatch");
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != n))
      throw ModelError("QpProblem: A/b dimension mismatch");
    if (lb.size() != n || ub.size() != n) throw ModelError("QpProblem: bounds dimension mismatch");
  }
};

struct KktReport {
  double stationarity = 0.0;      // ||Qx + c - E^T lam - N^T mu||_inf
  double primal_violation = 0.0;  // max constraint violation
  double complementarity = 0.0;   // max |mu_k * slack_k|
  double dual_violation = 0.0;    // most negative inequality multiplier
  double residual() const {
    return std::max(std::max(stationarity, primal_violation),
                    std::max(complementarity, dual_violation));
  }
};

struct QpSolution {
  Eigen::VectorXd x;
  KktReport kkt;
  int iterations = 0;
};

class QpInfeasible : public SolveError {
public:
  QpInfeasible(const std::string& msg, int row) : SolveError(msg), most_violated_row(row) {}
  int most_violated_row;  // original A row index, or -1 for a variable bound
};

namespace detail {

// All inequality rows in n_k^T x >= r_k form: A/b rows negated, then finite
// lower bounds, then negated finite upper bounds.
struct StackedIneq {
  Eigen::MatrixXd N;
  Eigen::VectorXd r;
  std::vector<int> source_row;  // original A row, or -1 for bounds
};

inline StackedIneq stack_inequalities(const QpProblem& p) {
  const int n = p.vars();
  StackedIneq out;
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  for (int i = 0; i < p.A.rows(); ++i) {
    rows.push_back(-p.A.row(i));
    rhs.push_back(-p.b[i]);
    out.source_row.push_back(i);
  }
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(p.lb[i])) {
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n);
      e[i] = 1.0;
      rows.push_back(e);
      rhs.push_back(p.lb[i]);
      out.source_row.push_back(-1);
    }
    if (std::isfinite(p.ub[i])) {
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(n);
      e[i] = -1.0;
      rows.push_back(e);
      rhs.push_back(-p.ub[i]);
      out.source_row.push_back(-1);
    }
  }
  out.N.resize(static_cast<Eigen::Index>(rows.size()), n);
  out.r.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.N.row(static_cast<Eigen::Index>(k)) = rows[k];
    out.r[static_cast<Eigen::Index>(k)] = rhs[k];
  }
  return out;
}

// Dual active-set loop for min 1/2 v^T Q v + c^T v s.t. N v >= r with Q
// positive definite and no equality rows. Returns v and the multipliers of
// the final active set.
struct ReducedResult {
  Eigen::VectorXd v;
  std::vector<int> active;
  Eigen::VectorXd u;
  int iterations = 0;
};

inline ReducedResult dual_active_set(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                                     const Eigen::MatrixXd& N, const Eigen::VectorXd& r,
                                     const std::vector<int>& source_row, double tol) {
  const int n = static_cast<int>(Q.rows());
  const int m = static_cast<int>(N.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(Q);
  if (llt.info() != Eigen::Success)
    throw SolveError("solve_qp: Q is not positive definite on the feasible subspace");

  ReducedResult res;
  res.v = -llt.solve(c);
  const int max_iter = 120 * (m + 1) + 100;

  for (;;) {
    if (++res.iterations > max_iter)
      throw SolveError("solve_qp: iteration limit reached (possible cycling)");

    int p = -1;
    double worst = -std::max(tol, 1e-12);
    for (int k = 0; k < m; ++k) {
      bool is_active = false;
      for (int a : res.active)
        if (a == k) {
          is_active = true;
          break;
        }
      if (is_active) continue;
      const double s = N.row(k).dot(res.v) - r[k];
      if (s < worst) {
        worst = s;
        p = k;
      }
    }
    if (p < 0) return res;

    const Eigen::VectorXd np = N.row(p).transpose();
    double u_p = 0.0;
    for (int guard = 0; guard <= 2 * m + 4; ++guard) {
      ++res.iterations;
      // step directions for the candidate row against the active set
      const int k = static_cast<int>(res.active.size());
      const Eigen::VectorXd Qn = llt.solve(np);
      Eigen::VectorXd z, rr;
      if (k == 0) {
        z = Qn;
        rr.resize(0);
      } else {
        Eigen::MatrixXd Na(n, k);
        for (int s2 = 0; s2 < k; ++s2) Na.col(s2) = N.row(res.active[s2]).transpose();
        const Eigen::MatrixXd QinvNa = llt.solve(Na);
        // rank-revealing solve: when np is dependent on the active normals,
        // the least-squares multipliers make z vanish exactly instead of
        // amplifying the singular system into a junk step direction
        const Eigen::MatrixXd M = Na.transpose() * QinvNa;
        rr = M.completeOrthogonalDecomposition().solve(Na.transpose() * Qn);
        z = Qn - QinvNa * rr;
      }

      double t1 = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (int s2 = 0; s2 < k; ++s2) {
        if (rr[s2] > 1e-12) {
          const double cand = res.u[s2] / rr[s2];
          if (cand < t1) {
            t1 = cand;
            drop = s2;
          }
        }
      }
      const double s_p = np.dot(res.v) - r[p];
      const double ztn = z.dot(np);  // = np^T H np >= 0
      const double ztn_floor = 1e-12 * (1.0 + np.squaredNorm());
      const double t2 =
          (ztn < ztn_floor) ? std::numeric_limits<double>::infinity() : -s_p / ztn;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        const int src = source_row[p];
        throw QpInfeasible("solve_qp: infeasible problem (most violated row " +
                               std::to_string(src) + (src < 0 ? ", a variable bound" : "") + ")",
                           src);
      }

      if (std::isinf(t2)) {  // dual-only step
        for (int s2 = 0; s2 < k; ++s2) res.u[s2] -= t * rr[s2];
        u_p += t;
        res.active.erase(res.active.begin() + drop);
        Eigen::VectorXd u2(k - 1);
        int w = 0;
        for (int s2 = 0; s2 < k; ++s2)
          if (s2 != drop) u2[w++] = res.u[s2];
        res.u = u2;
        continue;
      }

      res.v += t * z;
      for (int s2 = 0; s2 < k; ++s2) res.u[s2] -= t * rr[s2];
      u_p += t;

      if (t >= t2) {  // full step: p joins the active set
        res.active.push_back(p);
        Eigen::VectorXd u2(k + 1);
        if (k > 0) u2.head(k) = res.u;
        u2[k] = u_p;
        res.u = u2;
        break;
      }
      // partial step: drop the blocker and keep driving row p
      res.active.erase(res.active.begin() + drop);
      Eigen::VectorXd u2(k - 1);
      int w = 0;
      for (int s2 = 0; s2 < k; ++s2)
        if (s2 != drop) u2[w++] = res.u[s2];
      res.u = u2;
    }
  }
}

}  // namespace detail

// Dense dual active-set solve. Equality rows are eliminated through a
// null-space parameterization first, so the active-set loop only ever deals
// with inequalities; KKT quantities are audited in the full space afterward.
inline QpSolution solve_qp(const QpProblem& prob, double tol = 1e-10) {
  prob.validate();
  const int n = prob.vars();
  const detail::StackedIneq ineq = detail::stack_inequalities(prob);
  const int me = static_cast<int>(prob.E.rows());

  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(n, n);
  if (me > 0) {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(prob.E);
    x0 = cod.solve(prob.d);
    if ((prob.E * x0 - prob.d).cwiseAbs().maxCoeff() > 1e-8)
      throw SolveError("solve_qp: inconsistent equality constraints");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(prob.E);
    Z = lu.kernel();  // n x (n - rank)
    if (Z.cols() == 0) {
      // fully determined x; only feasibility and multipliers remain
      QpSolution sol;
      sol.x = x0;
      for (Eigen::Index k = 0; k < ineq.N.rows(); ++k) {
        const double s = ineq.N.row(k).dot(x0) - ineq.r[k];
        if (s < -1e-8) {
          const int src = ineq.source_row[static_cast<int>(k)];
          throw QpInfeasible("solve_qp: equalities pin an infeasible point (row " +
                                 std::to_string(src) + ")",
                             src);
        }
      }
      const Eigen::VectorXd grad = prob.Q * x0 + prob.c;
      const Eigen::VectorXd lam =
          prob.E.transpose().colPivHouseholderQr().solve(grad);
      sol.kkt.stationarity = (grad - prob.E.transpose() * lam).cwiseAbs().maxCoeff();
      sol.kkt.primal_violation = (prob.E * x0 - prob.d).cwiseAbs().maxCoeff();
      return sol;
    }
  }

  const Eigen::MatrixXd Qr = Z.transpose() * prob.Q * Z;
  const Eigen::VectorXd cr = Z.transpose() * (prob.c + prob.Q * x0);
  const Eigen::MatrixXd Nr = ineq.N * Z;
  const Eigen::VectorXd rr = ineq.r - ineq.N * x0;

  const detail::ReducedResult red =
      detail::dual_active_set(Qr, cr, Nr, rr, ineq.source_row, tol);

  QpSolution sol;
  sol.x = x0 + Z * red.v;
  sol.iterations = red.iterations;

  // full-space KKT audit
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(ineq.N.rows());
  for (std::size_t s2 = 0; s2 < red.active.size(); ++s2) mu[red.active[s2]] = red.u[s2];
  Eigen::VectorXd grad = prob.Q * sol.x + prob.c - ineq.N.transpose() * mu;
  if (me > 0) {
    const Eigen::VectorXd lam = prob.E.transpose().colPivHouseholderQr().solve(grad);
    grad -= prob.E.transpose() * lam;
  }
  sol.kkt.stationarity = grad.cwiseAbs().maxCoeff();
  double viol = 0.0;
  if (me > 0) viol = (prob.E * sol.x - prob.d).cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < ineq.N.rows(); ++k)
    viol = std::max(viol, std::max(0.0, ineq.r[k] - ineq.N.row(k).dot(sol.x)));
  sol.kkt.primal_violation = viol;
  double comp = 0.0, dualv = 0.0;
  for (Eigen::Index k = 0; k < ineq.N.rows(); ++k) {
    comp = std::max(comp, std::abs(mu[k] * (ineq.N.row(k).dot(sol.x) - ineq.r[k])));
    dualv = std::max(dualv, -mu[k]);
  }
  sol.kkt.complementarity = comp;
  sol.kkt.dual_violation = dualv;
  return sol;
}

}  // namespace sdfsc
