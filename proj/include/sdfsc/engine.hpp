#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "sdfsc/calibration.hpp"
#include "sdfsc/ensemble.hpp"
#include "sdfsc/model_io.hpp"
#include "sdfsc/svm.hpp"

namespace sdfsc {

/// The assembled collision-distance engine: fused distance
/// D(q, p) = Gamma(q, p) + P(S(q)), differentiable in q.
struct Engine {
  RobotModel robot;
  SdfEnsemble ensemble;
  SvmModel svm;
  ScoreStats stats;
  ProcessingParams pparams;

  void validate() const {
    robot.validate();
    ensemble.check_matches(robot);
    if (svm.n != robot.dof())
      throw ModelError("engine: svm input dim " + std::to_string(svm.n) +
                       " != robot dof " + std::to_string(robot.dof()));
    svm.validate();
    if (!(stats.sigma > 0.0)) throw ModelError("engine: score sigma must be positive");
    if (!(pparams.k > 0.0)) throw ModelError("engine: processing slope k must be positive");
  }

  double self_collision_threshold() const { return stats.mu - stats.sigma; }
};

struct QueryResult {
  Eigen::VectorXd D;          // fused distance per point
  Eigen::VectorXd gamma;      // learned link distance per point (D = gamma + P)
  std::vector<int> link;      // argmin link per point (1-based)
  double S = 0.0;             // configuration score, computed once per query
  double P = 0.0;             // P(S)
  BoundaryRegion region = BoundaryRegion::Distant;
  double min_D = std::numeric_limits<double>::infinity();
  int argmin_point = -1;      // -1 when the point set is empty
  std::optional<Eigen::VectorXd> gradient;  // dD/dq at the argmin point, on request
};

struct QueryOptions {
  bool with_gradient = false;  // gradient at the argmin point
  int threads = 0;
};

// Batched fused distance. S(q) is evaluated once per query; Gamma is batched
// over the points with per-point arithmetic identical to a single-point call.
inline QueryResult collision_distance(const Engine& engine, const Eigen::VectorXd& q,
                                      std::span<const Eigen::Vector3d> points,
                                      const QueryOptions& opts = {}) {
  QueryResult res;
  res.S = svm_score_raw(engine.svm, engine.robot, q);
  res.P = processing(engine.pparams, res.S).value;
  res.region = classify_region(engine.stats, res.S);

  const GammaResult g = infer_gamma(engine.ensemble, engine.robot, q, points, opts.threads);
  res.gamma = g.gamma;
  res.link = g.argmin;
  res.D.resize(g.gamma.size());
  for (Eigen::Index i = 0; i < g.gamma.size(); ++i) {
    res.D[i] = g.gamma[i] + res.P;
    if (res.D[i] < res.min_D) {
      res.min_D = res.D[i];
      res.argmin_point = static_cast<int>(i);
    }
  }
  if (opts.with_gradient && res.argmin_point >= 0) {
    const GammaGradient gg =
        gamma_gradient(engine.ensemble, engine.robot, q, points[res.argmin_point]);
    const double dP = processing(engine.pparams, res.S).slope;
    res.gradient =
        gg.dq + dP * svm_score_gradient(engine.svm, engine.robot, q);
  }
  return res;
}

// dD/dq at one point: the argmin-branch Gamma gradient plus the chained
// boundary-score term dP/dS * dS/dq.
inline Eigen::VectorXd collision_gradient(const Engine& engine, const Eigen::VectorXd& q,
                                          const Eigen::Vector3d& p, double* D_out = nullptr,
                                          int* link_out = nullptr) {
  const GammaGradient gg = gamma_gradient(engine.ensemble, engine.robot, q, p);
  const double S = svm_score_raw(engine.svm, engine.robot, q);
  const ProcessingValue pv = processing(engine.pparams, S);
  if (D_out) *D_out = gg.gamma + pv.value;
  if (link_out) *link_out = gg.link;
  return gg.dq + pv.slope * svm_score_gradient(engine.svm, engine.robot, q);
}

struct GradientBatch {
  double S = 0.0;
  double P = 0.0;
  Eigen::VectorXd dS_dq;               // chained to raw radians
  Eigen::VectorXd D;                   // fused distance per point
  std::vector<Eigen::VectorXd> dD_dq;  // per point
  std::vector<Eigen::Vector3d> dD_dp;  // per point (the Gamma part; P carries no p term)
  std::vector<int> link;
};

// Gradients of D at several points of one configuration. The per-config
// work (forward frames, frame derivatives, boundary score and its gradient)
// is shared across the batch, which is what the optimizer and the controller
// hot loops need.
inline GradientBatch collision_gradient_batch(const Engine& engine, const Eigen::VectorXd& q,
                                              std::span<const Eigen::Vector3d> points) {
  const RobotModel& model = engine.robot;
  GradientBatch out;
  out.S = svm_score_raw(engine.svm, model, q);
  const ProcessingValue pv = processing(engine.pparams, out.S);
  out.P = pv.value;
  out.dS_dq = svm_score_gradient(engine.svm, model, q);

  const FrameSet frames = forward_frames(model, q);
  const FrameDerivatives derivs = frame_derivatives(model, q);
  const int n = model.dof();
  const Eigen::VectorXd dP_dq = pv.slope * out.dS_dq;

  out.D.resize(points.size());
  out.dD_dq.resize(points.size());
  out.dD_dp.resize(points.size());
  out.link.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    int k = 0;
    const double gamma = infer_gamma_single(engine.ensemble, model, frames, points[i], &k);
    Eigen::Vector3d g_pk;
    engine.ensemble.nets[k - 1].value_and_gradient(to_link_frame(frames, points[i], k), g_pk);
    const Eigen::Matrix3d R = frames.link(k).linear();
    const Eigen::Vector3d t = frames.link(k).translation();
    Eigen::VectorXd dq(n);
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector3d dpk = derivs.rotation(k, j).transpose() * (points[i] - t) -
                                  R.transpose() * derivs.translation(k, j);
      dq[j] = g_pk.dot(dpk);
    }
    out.D[i] = gamma + pv.value;
    out.dD_dq[i] = dq + dP_dq;
    out.dD_dp[i] = R * g_pk;
    out.link[i] = k;
  }
  return out;
}

struct IsosurfaceGrid {
  Eigen::Vector3d lower{-1.0, -1.0, 0.0};
  Eigen::Vector3d upper{1.0, 1.0, 1.5};
  int resolution = 48;  // cells per axis

  void validate() const {
    if (resolution < 2) throw ModelError("isosurface grid resolution must be >= 2 per axis");
    if (!((upper - lower).array() > 0.0).all())
      throw ModelError("isosurface grid bounds must have positive extent");
  }
};

struct IsosurfacePoint {
  Eigen::Vector3d p;
  double D;
  int link;
};

// Grid points whose fused distance lies within half a grid-diagonal of the
// level set; enough to regenerate shell clouds without any meshing.
inline std::vector<IsosurfacePoint> reconstruct_isosurface(const Engine& engine,
                                                           const Eigen::VectorXd& q, double level,
                                                           const IsosurfaceGrid& grid,
                                                           int threads = 0) {
  grid.validate();
  const int R = grid.resolution;
  const Eigen::Vector3d step = (grid.upper - grid.lower) / static_cast<double>(R - 1);
  const double tol = 0.5 * step.norm();

  std::vector<Eigen::Vector3d> pts;
  pts.reserve(static_cast<std::size_t>(R) * R * R);
  for (int i = 0; i < R; ++i)
    for (int j = 0; j < R; ++j)
      for (int k = 0; k < R; ++k)
        pts.emplace_back(grid.lower.x() + i * step.x(), grid.lower.y() + j * step.y(),
                         grid.lower.z() + k * step.z());

  QueryOptions opts;
  opts.threads = threads;
  const QueryResult res = collision_distance(engine, q, pts, opts);
  std::vector<IsosurfacePoint> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (std::abs(res.D[i] - level) <= tol) out.push_back({pts[i], res.D[i], res.link[i]});
  return out;
}

inline void write_ply(const std::filesystem::path& path, const std::vector<IsosurfacePoint>& cloud) {
  std::ofstream os(path);
  if (!os) throw ModelError("cannot write ply file: " + path.string());
  os << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
     << "\nproperty float x\nproperty float y\nproperty float z\nproperty uchar link\nend_header\n";
  for (const auto& v : cloud)
    os << static_cast<float>(v.p.x()) << " " << static_cast<float>(v.p.y()) << " "
       << static_cast<float>(v.p.z()) << " " << (v.link & 0xff) << "\n";
}

// ---------------------------------------------------------------------------
// Engine directory: manifest + robot/ensemble/svm files side by side.

inline void save_engine(const std::filesystem::path& dir, const Engine& engine) {
  std::filesystem::create_directories(dir);
  save_robot_model(dir / "robot.json", engine.robot);
  save_ensemble(dir / "sdf.bin", engine.ensemble);
  save_svm(dir / "svm.bin", engine.svm, engine.stats, engine.pparams);
  nlohmann::json manifest{{"robot", "robot.json"}, {"sdf", "sdf.bin"}, {"svm", "svm.bin"}};
  std::ofstream os(dir / "engine.json");
  if (!os) throw ModelError("cannot write engine manifest in " + dir.string());
  os << manifest.dump(2) << "\n";
}

inline Engine load_engine(const std::filesystem::path& manifest_or_dir) {
  std::filesystem::path dir = manifest_or_dir;
  std::filesystem::path manifest = manifest_or_dir;
  if (std::filesystem::is_directory(dir)) {
    manifest = dir / "engine.json";
  } else {
    dir = manifest.parent_path();
  }
  std::ifstream is(manifest);
  if (!is) throw ModelError("cannot open engine manifest: " + manifest.string());
  const nlohmann::json j = nlohmann::json::parse(is);
  Engine engine;
  engine.robot = load_robot_model(dir / j.at("robot").get<std::string>());
  engine.ensemble = load_ensemble(dir / j.at("sdf").get<std::string>());
  const LoadedSvm svm = load_svm(dir / j.at("svm").get<std::string>());
  engine.svm = svm.model;
  engine.stats = svm.stats;
  engine.pparams = svm.pparams;
  engine.validate();
  return engine;
}

}  // namespace sdfsc
