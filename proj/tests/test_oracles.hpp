// Test-only reference implementations. These deliberately avoid the library's
// own code paths: plain 4x4 array math, elementary-matrix products, dense
// enumeration. They exist so the production implementations have something
// independent to be checked against.
#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sdfsc/robot.hpp"

namespace testoracle {

using Mat4 = std::array<std::array<double, 4>, 4>;

inline Mat4 identity4() {
  Mat4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

inline Mat4 mul4(const Mat4& a, const Mat4& b) {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a[i][k] * b[k][j];
      c[i][j] = acc;
    }
  return c;
}

inline Mat4 rot_z(double t) {
  Mat4 m = identity4();
  m[0][0] = std::cos(t); m[0][1] = -std::sin(t);
  m[1][0] = std::sin(t); m[1][1] = std::cos(t);
  return m;
}

inline Mat4 rot_x(double t) {
  Mat4 m = identity4();
  m[1][1] = std::cos(t); m[1][2] = -std::sin(t);
  m[2][1] = std::sin(t); m[2][2] = std::cos(t);
  return m;
}

inline Mat4 trans(double x, double y, double z) {
  Mat4 m = identity4();
  m[0][3] = x; m[1][3] = y; m[2][3] = z;
  return m;
}

// Forward kinematics as an explicit product of elementary matrices, one
// factor per DH operation.
inline std::vector<Mat4> naive_fk(const sdfsc::RobotModel& model, const Eigen::VectorXd& q) {
  std::vector<Mat4> out;
  Mat4 T = identity4();
  int j = 0;
  for (const auto& row : model.chain) {
    const double qe = row.type == sdfsc::JointType::Fixed ? 0.0 : q[j++];
    const double theta = row.theta_offset + (row.type == sdfsc::JointType::Revolute ? qe : 0.0);
    const double d = row.d + (row.type == sdfsc::JointType::Prismatic ? qe : 0.0);
    Mat4 A;
    if (model.convention == sdfsc::DhConvention::Standard) {
      A = mul4(mul4(rot_z(theta), trans(0, 0, d)), mul4(trans(row.a, 0, 0), rot_x(row.alpha)));
    } else {
      A = mul4(mul4(rot_x(row.alpha), trans(row.a, 0, 0)), mul4(rot_z(theta), trans(0, 0, d)));
    }
    T = mul4(T, A);
    out.push_back(T);
  }
  return out;
}

inline double max_abs_diff(const Mat4& a, const Eigen::Matrix4d& b) {
  double m = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m = std::max(m, std::abs(a[i][j] - b(i, j)));
  return m;
}

// Central finite difference of a scalar function of a vector.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xe = x;
  for (int i = 0; i < x.size(); ++i) {
    xe[i] = x[i] + h;
    const double fp = f(xe);
    xe[i] = x[i] - h;
    const double fm = f(xe);
    xe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline sdfsc::RobotModel random_chain_model(std::mt19937_64& rng, int max_dof = 5) {
  std::uniform_int_distribution<int> ndist(1, max_dof);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> coin(0, 1);
  sdfsc::RobotModel m;
  m.name = "random";
  m.convention = coin(rng) ? sdfsc::DhConvention::Modified : sdfsc::DhConvention::Standard;
  const int n = ndist(rng);
  std::vector<double> lo, hi, vel;
  for (int i = 0; i < n; ++i) {
    sdfsc::DhRow row;
    row.a = 0.5 * u(rng);
    row.alpha = 1.5 * u(rng);
    row.d = 0.5 * u(rng);
    row.theta_offset = 1.5 * u(rng);
    row.type = coin(rng) ? sdfsc::JointType::Revolute : sdfsc::JointType::Prismatic;
    m.chain.push_back(row);
    lo.push_back(-2.5);
    hi.push_back(2.5);
    vel.push_back(2.0);
    sdfsc::LinkShape shape;
    shape.primitives.push_back(sdfsc::Primitive::sphere(0.05));
    m.links.push_back(shape);
  }
  m.q_lower = Eigen::Map<Eigen::VectorXd>(lo.data(), n);
  m.q_upper = Eigen::Map<Eigen::VectorXd>(hi.data(), n);
  m.vel_limit = Eigen::Map<Eigen::VectorXd>(vel.data(), n);
  return m;
}

inline Eigen::VectorXd random_config(const sdfsc::RobotModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd qn(m.dof());
  for (int i = 0; i < m.dof(); ++i) qn[i] = u(rng);
  return m.denormalize_config(qn);
}

// Dense solve of the SVM dual by projected gradient descent:
//   min 1/2 a^T Q a - 1^T a   s.t. 0 <= a <= C, y^T a = 0
// The projection onto box-intersect-hyperplane is computed exactly by
// bisection on the hyperplane multiplier. Independent of the SMO path.
struct DenseDualSolution {
  Eigen::VectorXd alpha;
  double bias = 0.0;
};

inline DenseDualSolution dense_svm_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y,
                                        double C, int iters = 200000) {
  const long n = y.size();
  const Eigen::MatrixXd Q = K.cwiseProduct(y * y.transpose());
  const double L = Q.operatorNorm();  // dense eigen bound is fine at this size
  const double step = 1.0 / std::max(L, 1e-9);

  auto project = [&](Eigen::VectorXd v) {
    double lo = -1e6, hi = 1e6;
    auto resid = [&](double lam) {
      double s = 0.0;
      for (long i = 0; i < n; ++i) s += y[i] * std::clamp(v[i] - lam * y[i], 0.0, C);
      return s;
    };
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (resid(mid) > 0.0 ? lo : hi) = mid;
    }
    const double lam = 0.5 * (lo + hi);
    for (long i = 0; i < n; ++i) v[i] = std::clamp(v[i] - lam * y[i], 0.0, C);
    return v;
  };

  Eigen::VectorXd a = project(Eigen::VectorXd::Constant(n, 0.0));
  for (int it = 0; it < iters; ++it)
    a = project(a - step * (Q * a - Eigen::VectorXd::Ones(n)));

  DenseDualSolution sol;
  sol.alpha = a;
  const Eigen::VectorXd f = K * a.cwiseProduct(y);
  double b = 0.0;
  long cnt = 0;
  for (long i = 0; i < n; ++i)
    if (a[i] > 1e-6 * C && a[i] < C * (1 - 1e-6)) {
      b += y[i] - f[i];
      ++cnt;
    }
  sol.bias = cnt ? b / cnt : 0.0;
  return sol;
}

// Brute-force QP oracle: enumerate every subset of the inequality rows
// (N x >= r form) as a candidate active set, solve the resulting equality
// KKT system, and keep the best candidate that is primal feasible with
// nonnegative inequality multipliers. Convexity makes that the optimum.
struct EnumQpResult {
  bool feasible = false;
  Eigen::VectorXd x;
  double objective = std::numeric_limits<double>::infinity();
};

inline EnumQpResult enumerate_qp(const Eigen::MatrixXd& Q, const Eigen::VectorXd& c,
                                 const Eigen::MatrixXd& E, const Eigen::VectorXd& d,
                                 const Eigen::MatrixXd& N, const Eigen::VectorXd& r) {
  const int n = static_cast<int>(Q.rows());
  const int m = static_cast<int>(N.rows());
  const int me = static_cast<int>(E.rows());
  EnumQpResult best;
  for (int mask = 0; mask < (1 << m); ++mask) {
    std::vector<int> act;
    for (int k = 0; k < m; ++k)
      if (mask & (1 << k)) act.push_back(k);
    const int ma = me + static_cast<int>(act.size());
    Eigen::MatrixXd K(n + ma, n + ma);
    K.setZero();
    K.topLeftCorner(n, n) = Q;
    Eigen::VectorXd rhs(n + ma);
    rhs.head(n) = -c;
    for (int e = 0; e < me; ++e) {
      K.block(n + e, 0, 1, n) = E.row(e);
      K.block(0, n + e, n, 1) = E.row(e).transpose();
      rhs[n + e] = d[e];
    }
    for (std::size_t s = 0; s < act.size(); ++s) {
      K.block(n + me + s, 0, 1, n) = N.row(act[s]);
      K.block(0, n + me + s, n, 1) = N.row(act[s]).transpose();
      rhs[n + me + s] = r[act[s]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
    if (!lu.isInvertible()) continue;
    const Eigen::VectorXd sol = lu.solve(rhs);
    const Eigen::VectorXd x = sol.head(n);
    bool ok = true;
    for (int k = 0; k < m && ok; ++k)
      if (N.row(k).dot(x) < r[k] - 1e-9) ok = false;
    for (std::size_t s = 0; s < act.size() && ok; ++s)
      if (sol[n + me + s] > 1e-9) ok = false;  // block solves Qx + c = -A^T nu, so mu = -nu >= 0
    if (!ok) continue;
    const double obj = 0.5 * x.dot(Q * x) + c.dot(x);
    if (obj < best.objective) {
      best.objective = obj;
      best.x = x;
      best.feasible = true;
    }
  }
  return best;
}

}  // namespace testoracle
