#include <gtest/gtest.h>

#include <filesystem>

#include "sdfsc/model_io.hpp"
#include "sdfsc/svm.hpp"
#include "test_oracles.hpp"

using namespace sdfsc;

namespace {

SelfCollisionSample sample1d(float x, int label) {
  SelfCollisionSample s;
  s.q = Eigen::VectorXf::Constant(1, x);
  s.label = static_cast<std::int8_t>(label);
  return s;
}

std::vector<SelfCollisionSample> separable_toy() {
  std::vector<SelfCollisionSample> out;
  for (float x : {0.05f, 0.1f, 0.15f, 0.2f, 0.25f}) out.push_back(sample1d(x, +1));
  for (float x : {0.75f, 0.8f, 0.85f, 0.9f, 0.95f}) out.push_back(sample1d(x, -1));
  return out;
}

}  // namespace

TEST(TrainSvm, SeparableToyIsPerfectlyClassified) {
  const auto data = separable_toy();
  SvmTrainOptions opts;
  opts.C = 50.0;
  opts.gamma = 1.0;
  const SvmModel model = train_svm(data, opts);
  const ClassifierMetrics m = evaluate_classifier(model, data);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_LE(model.sv_count(), 6);  // wide margin keeps the expansion small
}

TEST(TrainSvm, RequiresBothClasses) {
  std::vector<SelfCollisionSample> one_class;
  for (float x : {0.1f, 0.2f, 0.3f}) one_class.push_back(sample1d(x, +1));
  EXPECT_THROW(train_svm(one_class), ModelError);
}

TEST(TrainSvm, NonConvergenceReportsGap) {
  const auto data = separable_toy();
  SvmTrainOptions opts;
  opts.max_iter = 1;  // force the budget to run out
  opts.tol = 1e-9;
  try {
    train_svm(data, opts);
    FAIL() << "expected SolveError";
  } catch (const SolveError& e) {
    EXPECT_NE(std::string(e.what()).find("gap"), std::string::npos);
  }
}

TEST(TrainSvm, DecisionValuesMatchDenseDualOracle) {
  // 2-D ring data, 160 samples, produces a genuinely nonlinear boundary
  auto rng = make_rng(71);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SelfCollisionSample> data;
  for (int i = 0; i < 160; ++i) {
    SelfCollisionSample s;
    s.q.resize(2);
    s.q << static_cast<float>(u(rng)), static_cast<float>(u(rng));
    const double r = (s.q.cast<double>() - Eigen::Vector2d(0.5, 0.5)).norm();
    s.label = r < 0.3 ? +1 : -1;
    data.push_back(s);
  }
  SvmTrainOptions opts;
  opts.C = 10.0;
  opts.gamma = 5.0;
  opts.tol = 1e-4;
  const SvmModel model = train_svm(data, opts);

  const long N = static_cast<long>(data.size());
  Eigen::MatrixXd X(N, 2);
  Eigen::VectorXd y(N);
  for (long i = 0; i < N; ++i) {
    X.row(i) = data[i].q.cast<double>().transpose();
    y[i] = data[i].label;
  }
  Eigen::MatrixXd K(N, N);
  for (long i = 0; i < N; ++i)
    for (long j = 0; j < N; ++j)
      K(i, j) = std::exp(-opts.gamma * (X.row(i) - X.row(j)).squaredNorm());
  const auto oracle = testoracle::dense_svm_dual(K, y, opts.C);

  const Eigen::VectorXd f_oracle = K * oracle.alpha.cwiseProduct(y);
  for (long i = 0; i < N; ++i) {
    const double s_oracle = f_oracle[i] + oracle.bias;
    const double s_smo = svm_score(model, X.row(i).transpose());
    EXPECT_NEAR(s_smo, s_oracle, 1e-3);
  }
}

TEST(SvmScore, ZeroCoefficientsGiveBias) {
  SvmModel m;
  m.n = 2;
  m.support_vectors = Eigen::MatrixXd::Zero(1, 2);
  m.coeffs = Eigen::VectorXd::Zero(1);
  m.bias = 0.37;
  m.gamma = 1.0;
  EXPECT_DOUBLE_EQ(svm_score(m, Eigen::Vector2d(0.3, 0.8)), 0.37);
}

TEST(SvmScore, PositiveAtStronglyFreeSupportVector) {
  const auto data = separable_toy();
  const SvmModel model = train_svm(data);
  EXPECT_GT(svm_score(model, Eigen::VectorXd::Constant(1, 0.05)), 0.0);
  EXPECT_LT(svm_score(model, Eigen::VectorXd::Constant(1, 0.95)), 0.0);
}

TEST(SvmScore, AgreesWithNaiveDoubleLoop) {
  const auto data = separable_toy();
  const SvmModel model = train_svm(data);
  auto rng = make_rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, u(rng));
    double naive = model.bias;
    for (int i = 0; i < model.sv_count(); ++i) {
      double d2 = 0.0;
      for (int c = 0; c < model.n; ++c) {
        const double diff = q[c] - model.support_vectors(i, c);
        d2 += diff * diff;
      }
      naive += model.coeffs[i] * std::exp(-model.gamma * d2);
    }
    EXPECT_NEAR(svm_score(model, q), naive, 1e-12);
  }
}

TEST(SvmGradient, ZeroAtLoneSupportVector) {
  SvmModel m;
  m.n = 2;
  m.support_vectors.resize(1, 2);
  m.support_vectors << 0.4, 0.6;
  m.coeffs = Eigen::VectorXd::Constant(1, 2.0);
  m.bias = -0.1;
  m.gamma = 1.5;
  const Eigen::VectorXd g = svm_score_gradient_normalized(m, Eigen::Vector2d(0.4, 0.6));
  EXPECT_LT(g.norm(), 1e-15);
}

TEST(SvmGradient, SingleSupportVectorClosedForm) {
  SvmModel m;
  m.n = 1;
  m.support_vectors = Eigen::MatrixXd::Constant(1, 1, 0.25);
  m.coeffs = Eigen::VectorXd::Constant(1, 1.5);
  m.bias = 0.0;
  m.gamma = 2.0;
  const double q = 0.7;
  const double diff = q - 0.25;
  const double expected = -2.0 * m.gamma * 1.5 * std::exp(-m.gamma * diff * diff) * diff;
  const Eigen::VectorXd g = svm_score_gradient_normalized(m, Eigen::VectorXd::Constant(1, q));
  EXPECT_NEAR(g[0], expected, 1e-14);
}

TEST(SvmGradient, RawGradientMatchesFiniteDifferences) {
  const RobotModel robot = load_robot_model(std::filesystem::path(SDFSC_MODELS_DIR) / "panda7.json");
  SelfCollisionCounts counts{600, 100, 100};
  const auto ds = sample_selfcollision_dataset(robot, counts, 17, 2);
  SvmTrainOptions opts;
  opts.tol = 1e-2;  // rough model is fine, the gradient identity is exact
  const SvmModel model = train_svm(ds.train, opts);

  auto rng = make_rng(29);
  constexpr double kH = 1e-6;
  for (int t = 0; t < 50; ++t) {
    const Eigen::VectorXd q = testoracle::random_config(robot, rng);
    const Eigen::VectorXd g = svm_score_gradient(model, robot, q);
    const Eigen::VectorXd fd = testoracle::fd_gradient(
        [&](const Eigen::VectorXd& x) { return svm_score_raw(model, robot, x); }, q, kH);
    EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(SvmIO, RoundTripReproducesScoresBitwise) {
  const auto data = separable_toy();
  const SvmModel model = train_svm(data);
  const ScoreStats stats{0.1, 0.8};
  const ProcessingParams pp = fit_processing_params(stats);
  const auto path = std::filesystem::temp_directory_path() / "sdfsc_svm.bin";
  save_svm(path, model, stats, pp);
  const LoadedSvm loaded = load_svm(path);
  EXPECT_EQ(loaded.stats.mu, stats.mu);
  EXPECT_EQ(loaded.pparams.k, pp.k);
  auto rng = make_rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const Eigen::VectorXd q = Eigen::VectorXd::Constant(1, u(rng));
    EXPECT_EQ(svm_score(model, q), svm_score(loaded.model, q));
  }
}
