#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sdfsc/model_io.hpp"
#include "sdfsc/robot.hpp"
#include "test_oracles.hpp"

using namespace sdfsc;

namespace {

RobotModel single_revolute(DhConvention conv, double a = 0.0) {
  RobotModel m;
  m.name = "single";
  m.convention = conv;
  DhRow row;
  row.a = a;
  m.chain.push_back(row);
  m.q_lower = Eigen::VectorXd::Constant(1, -3.0);
  m.q_upper = Eigen::VectorXd::Constant(1, 3.0);
  m.vel_limit = Eigen::VectorXd::Constant(1, 2.0);
  LinkShape shape;
  shape.primitives.push_back(Primitive::sphere(0.1));
  m.links.push_back(shape);
  return m;
}

// Planar 2R arm in standard DH: both joints about world z, links along x.
RobotModel planar_two_link(double l1 = 1.0, double l2 = 1.0) {
  RobotModel m;
  m.name = "planar2";
  m.convention = DhConvention::Standard;
  DhRow r1, r2;
  r1.a = l1;
  r2.a = l2;
  m.chain = {r1, r2};
  m.q_lower = Eigen::VectorXd::Constant(2, -3.1);
  m.q_upper = Eigen::VectorXd::Constant(2, 3.1);
  m.vel_limit = Eigen::VectorXd::Constant(2, 2.0);
  for (double l : {l1, l2}) {
    LinkShape shape;
    Primitive cap = Primitive::capsule(0.05, l / 2.0);
    cap.pose.linear() =
        Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX())
            .toRotationMatrix();
    cap.pose.translation() = Eigen::Vector3d(-l / 2.0, 0, 0);
    shape.primitives.push_back(cap);
    m.links.push_back(shape);
  }
  return m;
}

std::filesystem::path models_dir() { return SDFSC_MODELS_DIR; }

}  // namespace

TEST(RobotModelIO, MinimalSingleJointFile) {
  const auto path = std::filesystem::temp_directory_path() / "sdfsc_single.json";
  {
    std::ofstream os(path);
    os << R"({"name":"mini","convention":"dh",
        "joints":[{"a":1.0,"alpha":0,"d":0,"theta_offset":0,"type":"revolute",
                   "limits":[-3,3],"vel_limit":2.0}],
        "links":[{"frame":1,"shapes":[{"kind":"sphere","radius":0.1}]}]})";
  }
  const RobotModel m = load_robot_model(path);
  EXPECT_EQ(m.dof(), 1);
  EXPECT_EQ(m.link_count(), 1);
  EXPECT_EQ(m.convention, DhConvention::Standard);
}

TEST(RobotModelIO, ShippedPandaModel) {
  const RobotModel m = load_robot_model(models_dir() / "panda7.json");
  EXPECT_EQ(m.dof(), 7);
  EXPECT_EQ(m.link_count(), 8);  // fixed flange link included
  EXPECT_EQ(m.convention, DhConvention::Modified);
}

TEST(RobotModelIO, RejectsInvertedLimits) {
  const auto path = std::filesystem::temp_directory_path() / "sdfsc_bad_limits.json";
  {
    std::ofstream os(path);
    os << R"({"name":"bad","convention":"dh",
        "joints":[{"a":1.0,"type":"revolute","limits":[1.0,-1.0],"vel_limit":2.0}],
        "links":[{"frame":1,"shapes":[{"kind":"sphere","radius":0.1}]}]})";
  }
  try {
    load_robot_model(path);
    FAIL() << "expected ModelError";
  } catch (const ModelError& e) {
    EXPECT_NE(std::string(e.what()).find("joint_limits"), std::string::npos);
  }
}

TEST(RobotModelIO, MissingFileIsCleanError) {
  EXPECT_THROW(load_robot_model("/nonexistent/robot.json"), ModelError);
}

TEST(ForwardFrames, SingleJointZeroConfigIsIdentity) {
  const RobotModel m = single_revolute(DhConvention::Standard);
  const FrameSet f = forward_frames(m, Eigen::VectorXd::Zero(1));
  EXPECT_TRUE(f.link(1).matrix().isApprox(Eigen::Matrix4d::Identity(), 1e-15));
}

TEST(ForwardFrames, SingleJointQuarterTurn) {
  const RobotModel m = single_revolute(DhConvention::Standard, 1.0);
  Eigen::VectorXd q(1);
  q << std::numbers::pi / 2;
  const FrameSet f = forward_frames(m, q);
  EXPECT_NEAR(f.link(1).translation().x(), 0.0, 1e-12);
  EXPECT_NEAR(f.link(1).translation().y(), 1.0, 1e-12);
  EXPECT_NEAR(f.link(1).translation().z(), 0.0, 1e-12);
  const Eigen::Matrix3d expected =
      Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  EXPECT_TRUE(f.link(1).linear().isApprox(expected, 1e-12));
}

TEST(ForwardFrames, MatchesNaiveElementaryProductOnPanda) {
  const RobotModel m = load_robot_model(models_dir() / "panda7.json");
  auto rng = make_rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd q = testoracle::random_config(m, rng);
    const FrameSet f = forward_frames(m, q);
    const auto naive = testoracle::naive_fk(m, q);
    for (int k = 1; k <= m.link_count(); ++k)
      EXPECT_LT(testoracle::max_abs_diff(naive[k - 1], f.link(k).matrix()), 1e-10);
  }
}

TEST(ForwardFrames, RotationBlocksStayOrthonormal) {
  auto rng = make_rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const RobotModel m = testoracle::random_chain_model(rng);
    const Eigen::VectorXd q = testoracle::random_config(m, rng);
    const FrameSet f = forward_frames(m, q);
    for (int k = 1; k <= m.link_count(); ++k) {
      const Eigen::Matrix3d R = f.link(k).linear();
      EXPECT_LT((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff(), 1e-9);
    }
  }
}

TEST(ForwardFrames, OutOfLimitConfigIsComputedButFlagged) {
  const RobotModel m = single_revolute(DhConvention::Standard, 1.0);
  Eigen::VectorXd q(1);
  q << 10.0;
  const FrameSet f = forward_frames(m, q);
  EXPECT_FALSE(f.within_limits);
  EXPECT_TRUE(f.link(1).translation().allFinite());
}

TEST(ToLinkFrame, IdentityAndPureTranslation) {
  FrameSet f;
  f.transforms.push_back(Eigen::Isometry3d::Identity());
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translation() = Eigen::Vector3d(0.3, -0.2, 0.7);
  f.transforms.push_back(t);

  const Eigen::Vector3d p(1.0, 2.0, 3.0);
  EXPECT_TRUE(to_link_frame(f, p, 1).isApprox(p, 1e-15));
  EXPECT_TRUE(to_link_frame(f, p, 2).isApprox(p - t.translation(), 1e-15));
}

TEST(ToLinkFrame, RoundTripWithinTolerance) {
  auto rng = make_rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const RobotModel m = testoracle::random_chain_model(rng);
    const Eigen::VectorXd q = testoracle::random_config(m, rng);
    const FrameSet f = forward_frames(m, q);
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    for (int k = 1; k <= m.link_count(); ++k) {
      const Eigen::Vector3d back = from_link_frame(f, to_link_frame(f, p, k), k);
      EXPECT_LT((back - p).norm(), 1e-12);
    }
  }
}

TEST(FrameDerivatives, ZeroPastTheJoint) {
  const RobotModel m = planar_two_link();
  Eigen::VectorXd q(2);
  q << 0.4, -0.9;
  const FrameDerivatives d = frame_derivatives(m, q);
  EXPECT_TRUE(d.of(1, 1).isZero(0.0));  // joint 2 cannot move frame 1
}

TEST(FrameDerivatives, SingleRevoluteMatchesSkewIdentity) {
  const RobotModel m = single_revolute(DhConvention::Standard, 0.7);
  Eigen::VectorXd q(1);
  q << 0.3;
  const FrameSet f = forward_frames(m, q);
  const FrameDerivatives d = frame_derivatives(m, q);
  Eigen::Matrix4d sz = Eigen::Matrix4d::Zero();
  sz(0, 1) = -1.0;
  sz(1, 0) = 1.0;  // skew(z)
  const Eigen::Matrix4d expected = sz * f.link(1).matrix();
  EXPECT_LT((d.of(1, 0) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FrameDerivatives, MatchesCentralDifferencesOnRandomChains) {
  auto rng = make_rng(31);
  constexpr double kH = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const RobotModel m = testoracle::random_chain_model(rng);
    const Eigen::VectorXd q = testoracle::random_config(m, rng);
    const FrameDerivatives d = frame_derivatives(m, q);
    for (int j = 0; j < m.dof(); ++j) {
      Eigen::VectorXd qp = q, qm = q;
      qp[j] += kH;
      qm[j] -= kH;
      const FrameSet fp = forward_frames(m, qp);
      const FrameSet fm = forward_frames(m, qm);
      for (int k = 1; k <= m.link_count(); ++k) {
        const Eigen::Matrix4d fd = (fp.link(k).matrix() - fm.link(k).matrix()) / (2.0 * kH);
        EXPECT_LT((d.of(k, j) - fd).cwiseAbs().maxCoeff(), 1e-6);
      }
    }
  }
}

TEST(GeometricJacobian, ZeroLengthChainHasZeroTranslationalRows) {
  const RobotModel m = single_revolute(DhConvention::Standard, 0.0);
  Eigen::VectorXd q(1);
  q << 0.8;
  const auto J = geometric_jacobian(m, q, 1);
  EXPECT_TRUE(J.topRows(3).isZero(1e-15));
  EXPECT_TRUE(J.bottomRows(3).col(0).isApprox(Eigen::Vector3d::UnitZ(), 1e-12));
}

TEST(GeometricJacobian, PlanarTwoLinkHandComputed) {
  const RobotModel m = planar_two_link(1.0, 1.0);
  const auto J = geometric_jacobian(m, Eigen::VectorXd::Zero(2), 2);
  // ee at (2,0,0); J1v = z x (2,0,0) = (0,2,0); J2v = z x (1,0,0) = (0,1,0)
  EXPECT_TRUE(J.col(0).head<3>().isApprox(Eigen::Vector3d(0, 2, 0), 1e-12));
  EXPECT_TRUE(J.col(1).head<3>().isApprox(Eigen::Vector3d(0, 1, 0), 1e-12));
  EXPECT_TRUE(J.col(0).tail<3>().isApprox(Eigen::Vector3d::UnitZ(), 1e-12));
}

TEST(GeometricJacobian, PositionRowsMatchFiniteDifferences) {
  auto rng = make_rng(41);
  constexpr double kH = 1e-6;
  for (int trial = 0; trial < 50; ++trial) {
    const RobotModel m = testoracle::random_chain_model(rng);
    const Eigen::VectorXd q = testoracle::random_config(m, rng);
    const int K = m.link_count();
    const auto J = geometric_jacobian(m, q, K);
    for (int j = 0; j < m.dof(); ++j) {
      Eigen::VectorXd qp = q, qm = q;
      qp[j] += kH;
      qm[j] -= kH;
      const Eigen::Vector3d fd = (forward_frames(m, qp).link(K).translation() -
                                  forward_frames(m, qm).link(K).translation()) /
                                 (2.0 * kH);
      EXPECT_LT((J.col(j).head<3>() - fd).norm(), 1e-6);
    }
  }
}

TEST(GeometricJacobian, ColumnsPastTheFrameAreExactlyZero) {
  const RobotModel m = load_robot_model(models_dir() / "panda7.json");
  auto rng = make_rng(43);
  const Eigen::VectorXd q = testoracle::random_config(m, rng);
  for (int frame = 1; frame <= m.link_count(); ++frame) {
    const auto J = geometric_jacobian(m, q, frame);
    for (int j = frame; j < m.dof(); ++j) EXPECT_TRUE(J.col(j).isZero(0.0));
  }
}

TEST(Manipulability, StretchedPlanarArmIsSingular) {
  const RobotModel m = planar_two_link();
  const auto res = manipulability(m, Eigen::VectorXd::Zero(2));
  EXPECT_NEAR(res.m, 0.0, 1e-12);
  EXPECT_TRUE(res.singular);
}

TEST(Manipulability, PlanarClosedForm) {
  const RobotModel m = planar_two_link(1.0, 1.0);
  Eigen::VectorXd q(2);
  q << 0.3, std::numbers::pi / 2;
  const auto res = manipulability(m, q);
  EXPECT_NEAR(res.m, 1.0, 1e-9);  // |l1 l2 sin q2|
  q << 0.3, 0.7;
  EXPECT_NEAR(manipulability(m, q).m, std::abs(std::sin(0.7)), 1e-9);
}

TEST(Manipulability, GradientConsistentWithCoarseFiniteDifferences) {
  const RobotModel m = load_robot_model(models_dir() / "panda7.json");
  auto rng = make_rng(47);
  constexpr double kH = 1e-4;
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd q = testoracle::random_config(m, rng);
    const auto res = manipulability(m, q);
    if (res.singular) continue;
    const Eigen::VectorXd fd = testoracle::fd_gradient(
        [&](const Eigen::VectorXd& x) { return manipulability(m, x).m; }, q, kH);
    EXPECT_LT((res.gradient - fd).norm() / std::max(1.0, fd.norm()), 1e-3);
  }
}
