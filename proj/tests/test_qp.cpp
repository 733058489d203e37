#include <gtest/gtest.h>

#include "sdfsc/qp.hpp"
#include "test_oracles.hpp"

using namespace sdfsc;

namespace {

QpProblem blank(int n) {
  QpProblem p;
  p.Q = Eigen::MatrixXd::Identity(n, n);
  p.c = Eigen::VectorXd::Zero(n);
  p.E.resize(0, n);
  p.d.resize(0);
  p.A.resize(0, n);
  p.b.resize(0);
  p.lb = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  p.ub = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  return p;
}

}  // namespace

TEST(SolveQp, UnconstrainedIdentityWithBox) {
  QpProblem p = blank(3);
  p.c = Eigen::VectorXd::Constant(3, -1.0);
  const QpSolution s = solve_qp(p);
  EXPECT_TRUE(s.x.isApprox(Eigen::VectorXd::Ones(3), 1e-12));

  p.ub = Eigen::VectorXd::Constant(3, 0.4);  // clip at the box
  const QpSolution s2 = solve_qp(p);
  EXPECT_TRUE(s2.x.isApprox(Eigen::VectorXd::Constant(3, 0.4), 1e-9));
  EXPECT_LE(s2.kkt.residual(), 1e-6);
}

TEST(SolveQp, OneActiveInequalityAnalytic) {
  QpProblem p = blank(1);
  p.c = Eigen::VectorXd::Constant(1, -1.0);  // unconstrained optimum x = 1
  p.A = Eigen::MatrixXd::Constant(1, 1, 1.0);
  p.b = Eigen::VectorXd::Constant(1, 0.3);  // x <= 0.3
  const QpSolution s = solve_qp(p);
  EXPECT_NEAR(s.x[0], 0.3, 1e-9);
  EXPECT_LE(s.kkt.residual(), 1e-6);
}

TEST(SolveQp, EqualityProjection) {
  QpProblem p = blank(2);
  p.E = Eigen::MatrixXd::Ones(1, 2);
  p.d = Eigen::VectorXd::Ones(1);  // x1 + x2 = 1, min ||x||^2
  const QpSolution s = solve_qp(p);
  EXPECT_NEAR(s.x[0], 0.5, 1e-10);
  EXPECT_NEAR(s.x[1], 0.5, 1e-10);
  EXPECT_LE(s.kkt.residual(), 1e-6);
}

TEST(SolveQp, EqualityPlusActiveInequality) {
  // min 1/2 (x^2 + y^2 + z^2) s.t. x + y + z = 3, x <= 0.5
  QpProblem p = blank(3);
  p.E = Eigen::MatrixXd::Ones(1, 3);
  p.d = Eigen::VectorXd::Constant(1, 3.0);
  p.A.resize(1, 3);
  p.A << 1, 0, 0;
  p.b = Eigen::VectorXd::Constant(1, 0.5);
  const QpSolution s = solve_qp(p);
  EXPECT_NEAR(s.x[0], 0.5, 1e-9);
  EXPECT_NEAR(s.x[1], 1.25, 1e-9);
  EXPECT_NEAR(s.x[2], 1.25, 1e-9);
  EXPECT_LE(s.kkt.residual(), 1e-6);
}

TEST(SolveQp, DetectsInfeasibility) {
  QpProblem p = blank(1);
  p.A.resize(2, 1);
  p.A << 1, -1;
  p.b.resize(2);
  p.b << -1.0, -1.0;  // x <= -1 and x >= 1
  try {
    solve_qp(p);
    FAIL() << "expected QpInfeasible";
  } catch (const QpInfeasible& e) {
    EXPECT_GE(e.most_violated_row, -1);
  }
}

TEST(SolveQp, MatchesEnumerationOracleOnRandomProblems) {
  auto rng = make_rng(2027);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int solved = 0, infeasible = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(trial % 3);
    QpProblem p = blank(n);
    Eigen::MatrixXd Arand(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Arand(i, j) = u(rng);
    p.Q = Arand.transpose() * Arand + 0.2 * Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i) p.c[i] = u(rng);

    const int m = 2 + static_cast<int>(trial % 5);  // up to 6 inequality rows
    p.A.resize(m, n);
    p.b.resize(m);
    for (int k = 0; k < m; ++k) {
      for (int j = 0; j < n; ++j) p.A(k, j) = u(rng);
      p.b[k] = u(rng);
    }
    if (trial % 4 == 0) {
      p.E.resize(1, n);
      p.d.resize(1);
      for (int j = 0; j < n; ++j) p.E(0, j) = u(rng);
      p.d[0] = 0.3 * u(rng);
    }

    // oracle works on the >= stacked form
    const Eigen::MatrixXd N = -p.A;
    const Eigen::VectorXd r = -p.b;
    const auto oracle = testoracle::enumerate_qp(p.Q, p.c, p.E, p.d, N, r);
    if (!oracle.feasible) {
      EXPECT_THROW(solve_qp(p), SolveError);
      ++infeasible;
      continue;
    }
    const QpSolution s = solve_qp(p);
    ++solved;
    EXPECT_LT((s.x - oracle.x).cwiseAbs().maxCoeff(), 1e-6)
        << "trial " << trial << " obj " << oracle.objective;
    EXPECT_LE(s.kkt.residual(), 1e-6);
    EXPECT_LE(s.kkt.complementarity, 1e-6);
  }
  EXPECT_GT(solved, 150);
  EXPECT_GT(infeasible, 5);
}

TEST(SolveQp, ControllerShapedProblem) {
  // velocity-controller shape: blkdiag weights, 6 equality rows, damper rows,
  // box on the joint block
  auto rng = make_rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const int nq = 7, nx = nq + 6;
  QpProblem p = blank(nx);
  p.Q.setZero();
  p.Q.topLeftCorner(nq, nq) = 0.01 * Eigen::MatrixXd::Identity(nq, nq);
  p.Q.bottomRightCorner(6, 6) = Eigen::MatrixXd::Identity(6, 6);
  for (int i = 0; i < nq; ++i) p.c[i] = 0.1 * u(rng);

  Eigen::MatrixXd J(6, nq);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < nq; ++j) J(i, j) = u(rng);
  p.E.resize(6, nx);
  p.E << J, -Eigen::MatrixXd::Identity(6, 6);
  p.d.resize(6);
  for (int i = 0; i < 6; ++i) p.d[i] = 0.2 * u(rng);

  p.A.resize(3, nx);
  p.A.setZero();
  p.b.resize(3);
  for (int k = 0; k < 3; ++k) {
    for (int j = 0; j < nq; ++j) p.A(k, j) = u(rng);
    p.b[k] = 0.5 + 0.1 * u(rng);
  }
  for (int i = 0; i < nq; ++i) {
    p.lb[i] = -2.0;
    p.ub[i] = 2.0;
  }
  const QpSolution s = solve_qp(p);
  EXPECT_LE(s.kkt.residual(), 1e-6);
  EXPECT_LE((p.E * s.x - p.d).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveQp, RejectsIndefiniteQ) {
  QpProblem p = blank(2);
  p.Q << 1, 0, 0, -1;
  EXPECT_THROW(solve_qp(p), SolveError);
}
