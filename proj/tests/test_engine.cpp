#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sdfsc/engine.hpp"
#include "test_oracles.hpp"

using namespace sdfsc;

namespace {

// 3-link folding arm (2 dof): has genuine self-collisions, small enough to
// train quickly.
RobotModel folding_arm() {
  RobotModel m;
  m.name = "fold";
  m.convention = DhConvention::Standard;
  DhRow r1, r2, r3;
  r1.a = 1.0;
  r2.a = 0.55;
  r3.a = 0.55;
  r3.type = JointType::Fixed;
  m.chain = {r1, r2, r3};
  m.q_lower = Eigen::VectorXd::Constant(2, -3.1415);
  m.q_upper = Eigen::VectorXd::Constant(2, 3.1415);
  m.vel_limit = Eigen::VectorXd::Constant(2, 2.0);
  for (double l : {1.0, 0.55, 0.55}) {
    LinkShape shape;
    Primitive cap = Primitive::capsule(0.06, l / 2.0);
    cap.pose.linear() =
        Eigen::Quaterniond::FromTwoVectors(Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX())
            .toRotationMatrix();
    cap.pose.translation() = Eigen::Vector3d(-l / 2.0, 0, 0);
    shape.primitives.push_back(cap);
    m.links.push_back(shape);
  }
  return m;
}

Engine toy_engine() {
  Engine e;
  e.robot = folding_arm();
  SdfDatasetConfig cfg;
  cfg.per_link_count = 8000;
  cfg.near_fraction = 0.6;
  cfg.far_radius = 2.2;
  const auto data = sample_sdf_dataset(e.robot, cfg, 11, 2);
  TrainHyper hyper;
  hyper.epochs = 15;
  hyper.seed = 7;
  hyper.arch.hidden_nodes = 48;
  e.ensemble = train_ensemble(e.robot, data, hyper, 2);

  SelfCollisionCounts counts{3000, 800, 800};
  const auto ds = sample_selfcollision_dataset(e.robot, counts, 13, 2);
  ds.require_both_classes();
  SvmTrainOptions svm_opts;
  const SvmModel svm_model = train_svm(ds.train, svm_opts);
  e.svm = svm_model;
  e.stats = fit_score_stats(e.svm, ds.val);
  e.pparams = fit_processing_params(e.stats);
  e.validate();
  return e;
}

// single revolute joint carrying one sphere, with a hand-built boundary model
Engine single_joint_engine() {
  Engine e;
  RobotModel m;
  m.name = "one";
  m.convention = DhConvention::Standard;
  DhRow row;
  row.a = 0.4;
  m.chain.push_back(row);
  m.q_lower = Eigen::VectorXd::Constant(1, -2.0);
  m.q_upper = Eigen::VectorXd::Constant(1, 2.0);
  m.vel_limit = Eigen::VectorXd::Constant(1, 2.0);
  LinkShape shape;
  shape.primitives.push_back(Primitive::sphere(0.25));
  m.links.push_back(shape);
  e.robot = m;

  SdfDatasetConfig cfg;
  cfg.per_link_count = 15000;
  cfg.near_fraction = 0.6;
  cfg.far_radius = 1.5;
  const auto data = sample_sdf_dataset(e.robot, cfg, 3, 2);
  TrainHyper hyper;
  hyper.epochs = 70;
  hyper.seed = 3;
  hyper.arch.hidden_nodes = 48;
  e.ensemble = train_ensemble(e.robot, data, hyper, 2);

  // one support vector, mild slope: S varies smoothly with q
  e.svm.n = 1;
  e.svm.support_vectors = Eigen::MatrixXd::Constant(1, 1, 0.5);
  e.svm.coeffs = Eigen::VectorXd::Constant(1, 1.0);
  e.svm.bias = 0.2;
  e.svm.gamma = 1.0;
  e.stats = ScoreStats{0.5, 0.3};
  e.pparams = fit_processing_params(e.stats);
  e.validate();
  return e;
}

const Engine& shared_toy_engine() {
  static const Engine e = toy_engine();
  return e;
}

}  // namespace

TEST(CollisionDistance, EmptyPointSetCarriesScoreOnly) {
  const Engine& e = shared_toy_engine();
  Eigen::VectorXd q(2);
  q << 0.2, 0.5;
  const QueryResult r = collision_distance(e, q, {});
  EXPECT_EQ(r.D.size(), 0);
  EXPECT_EQ(r.argmin_point, -1);
  EXPECT_TRUE(std::isfinite(r.S));
  EXPECT_TRUE(std::isfinite(r.P));
  EXPECT_LE(r.P, 0.0);
  EXPECT_GT(r.P, -1.0);
}

TEST(CollisionDistance, AdditivityIsExactPerPoint) {
  const Engine& e = shared_toy_engine();
  auto rng = make_rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int t = 0; t < 20; ++t) {
    const Eigen::VectorXd q = testoracle::random_config(e.robot, rng);
    std::vector<Eigen::Vector3d> pts(64);
    for (auto& p : pts) p = Eigen::Vector3d(u(rng), u(rng), u(rng));
    const QueryResult r = collision_distance(e, q, pts);
    for (Eigen::Index i = 0; i < r.D.size(); ++i)
      EXPECT_EQ(r.D[i], r.gamma[i] + r.P);  // bitwise: D is defined as this sum
    EXPECT_EQ(r.min_D, r.D.minCoeff());
  }
}

TEST(CollisionDistance, DeepFreeConfigKeepsDNearGamma) {
  const Engine& e = shared_toy_engine();
  auto rng = make_rng(5);
  // hunt for a configuration scored well past mu+sigma
  Eigen::VectorXd q_deep;
  for (int t = 0; t < 4000; ++t) {
    const Eigen::VectorXd q = testoracle::random_config(e.robot, rng);
    if (svm_score_raw(e.svm, e.robot, q) > e.stats.mu + 2.0 * e.stats.sigma) {
      q_deep = q;
      break;
    }
  }
  ASSERT_GT(q_deep.size(), 0) << "no deep-free configuration found";
  std::vector<Eigen::Vector3d> far{Eigen::Vector3d(1.6, 1.6, 0.8)};
  const QueryResult r = collision_distance(e, q_deep, far);
  EXPECT_LE(std::abs(r.D[0] - r.gamma[0]), 0.001);
  EXPECT_EQ(r.region, BoundaryRegion::Distant);
}

TEST(CollisionDistance, TransgressingConfigIsPenalizedBelowGamma) {
  const Engine& e = shared_toy_engine();
  auto rng = make_rng(7);
  Eigen::VectorXd q_bad;
  for (int t = 0; t < 8000; ++t) {
    const Eigen::VectorXd q = testoracle::random_config(e.robot, rng);
    if (svm_score_raw(e.svm, e.robot, q) < e.stats.mu - e.stats.sigma) {
      q_bad = q;
      break;
    }
  }
  ASSERT_GT(q_bad.size(), 0) << "no transgressing configuration found";
  std::vector<Eigen::Vector3d> pts{Eigen::Vector3d(0.5, 0.5, 0.0)};
  const QueryResult r = collision_distance(e, q_bad, pts);
  EXPECT_LE(r.D[0], r.gamma[0] - 0.95);
  EXPECT_EQ(r.region, BoundaryRegion::Transgressing);
}

TEST(CollisionDistance, PenaltyTermIsMonotoneInScore) {
  const Engine& e = shared_toy_engine();
  auto rng = make_rng(11);
  const Eigen::Vector3d p(0.8, -0.4, 0.2);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd q1 = testoracle::random_config(e.robot, rng);
    const Eigen::VectorXd q2 = testoracle::random_config(e.robot, rng);
    std::vector<Eigen::Vector3d> pts{p};
    const QueryResult r1 = collision_distance(e, q1, pts);
    const QueryResult r2 = collision_distance(e, q2, pts);
    if (r1.S == r2.S) continue;
    // strict ordering is only resolvable inside the operating band of the
    // logistic; beyond ~4 sigma the correction saturates in double precision
    auto in_band = [&](double S) {
      return std::abs(S - e.stats.mu) <= 4.0 * e.stats.sigma;
    };
    if (!in_band(r1.S) || !in_band(r2.S)) continue;
    // the additive correction D - Gamma must order exactly as the scores
    EXPECT_EQ(r1.S < r2.S, (r1.D[0] - r1.gamma[0]) < (r2.D[0] - r2.gamma[0]));
  }
}

TEST(CollisionGradient, SaturatedBoundaryTermVanishes) {
  Engine e = shared_toy_engine();
  // push the calibration so |k S + b0| is huge at every configuration
  e.pparams.k = 12.0;
  e.pparams.b0 = 300.0;
  auto rng = make_rng(13);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd q = testoracle::random_config(e.robot, rng);
    const Eigen::Vector3d p(0.9, 0.3, -0.1);
    const Eigen::VectorXd g = collision_gradient(e, q, p);
    const GammaGradient gg = gamma_gradient(e.ensemble, e.robot, q, p);
    EXPECT_LT((g - gg.dq).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(CollisionGradient, SingleJointFiniteDifferenceAgreement) {
  const Engine e = single_joint_engine();
  auto rng = make_rng(17);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  constexpr double kH = 1e-5;
  int checked = 0;
  for (int t = 0; t < 500 && checked < 60; ++t) {
    const Eigen::VectorXd q = testoracle::random_config(e.robot, rng);
    const Eigen::Vector3d p(u(rng), u(rng), 0.4 * u(rng));
    const FrameSet f = forward_frames(e.robot, q);
    if (e.ensemble.nets[0].preactivation_margin(to_link_frame(f, p, 1)) < 1e-3) continue;
    ++checked;
    const Eigen::VectorXd g = collision_gradient(e, q, p);
    auto D_at = [&](const Eigen::VectorXd& qq) {
      std::vector<Eigen::Vector3d> one{p};
      return collision_distance(e, qq, one).D[0];
    };
    const Eigen::VectorXd fd = testoracle::fd_gradient(D_at, q, kH);
    EXPECT_NEAR(g[0], fd[0], 1e-3);
  }
  EXPECT_GE(checked, 50);
}

TEST(CollisionGradient, FiniteEverywhereOnSweep) {
  const Engine& e = shared_toy_engine();
  auto rng = make_rng(19);
  std::uniform_real_distribution<double> u(-1.8, 1.8);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::VectorXd q = testoracle::random_config(e.robot, rng);
    const Eigen::Vector3d p(u(rng), u(rng), u(rng));
    const Eigen::VectorXd g = collision_gradient(e, q, p);
    EXPECT_TRUE(g.allFinite());
  }
}

TEST(EngineIO, RoundTripReproducesDistancesBitwise) {
  const Engine& e = shared_toy_engine();
  const auto dir = std::filesystem::temp_directory_path() / "sdfsc_engine";
  save_engine(dir, e);
  const Engine loaded = load_engine(dir);
  auto rng = make_rng(23);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd q = testoracle::random_config(e.robot, rng);
    std::vector<Eigen::Vector3d> pts(8);
    for (auto& p : pts) p = Eigen::Vector3d(u(rng), u(rng), u(rng));
    const QueryResult a = collision_distance(e, q, pts);
    const QueryResult b = collision_distance(loaded, q, pts);
    for (Eigen::Index i = 0; i < a.D.size(); ++i) EXPECT_EQ(a.D[i], b.D[i]);
    EXPECT_EQ(a.S, b.S);
  }
}

TEST(Isosurface, LevelBeyondWorkspaceIsEmpty) {
  const Engine e = single_joint_engine();
  IsosurfaceGrid grid;
  grid.lower = Eigen::Vector3d(-1, -1, -1);
  grid.upper = Eigen::Vector3d(1, 1, 1);
  grid.resolution = 16;
  const auto cloud = reconstruct_isosurface(e, Eigen::VectorXd::Zero(1), 5.0, grid);
  EXPECT_TRUE(cloud.empty());
}

TEST(Isosurface, SphereShellSitsOnSurface) {
  Engine e = single_joint_engine();
  // make the boundary correction negligible so D tracks the sphere SDF
  e.pparams.b0 = 60.0;
  e.pparams.k = 1.0;
  IsosurfaceGrid grid;
  grid.lower = Eigen::Vector3d(-0.3, -0.3, -0.7);
  grid.upper = Eigen::Vector3d(1.1, 0.7, 0.7);
  grid.resolution = 96;
  const Eigen::VectorXd q = Eigen::VectorXd::Zero(1);
  const auto shell0 = reconstruct_isosurface(e, q, 0.0, grid, 2);
  ASSERT_GT(shell0.size(), 100u);
  const Eigen::Vector3d center(0.4, 0, 0);  // link origin at q=0
  const double step_diag = ((grid.upper - grid.lower) / 95.0).norm();
  for (const auto& v : shell0)
    EXPECT_NEAR((v.p - center).norm(), 0.25, 0.5 * step_diag + 0.01);

  const auto shell5 = reconstruct_isosurface(e, q, 0.05, grid, 2);
  ASSERT_GT(shell5.size(), 100u);
  double max0 = 0.0, min5 = std::numeric_limits<double>::infinity();
  for (const auto& v : shell0) max0 = std::max(max0, (v.p - center).norm());
  for (const auto& v : shell5) min5 = std::min(min5, (v.p - center).norm());
  EXPECT_LT(max0, min5);  // outer shell strictly encloses the zero shell
}

TEST(EngineValidate, MismatchedComponentsAreRejected) {
  Engine e = shared_toy_engine();
  e.svm.n = 5;
  EXPECT_THROW(e.validate(), ModelError);
}
