#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cstdint>
#include <numbers>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <json.hpp>

#include "sdfsc/engine.hpp"
#include "sdfsc/oracle.hpp"
#include "sdfsc/qp.hpp"

namespace sdfsc {

struct DamperParams {
  double d_i = 0.4;   // influence distance [m]
  double d_s = 0.02;  // stop distance [m]
  double xi = 1.0;    // damper gain [1/s]
  int k_rows = 5;     // obstacle points constrained per step

  void validate() const {
    if (!(d_i > d_s && d_s >= 0.0)) throw ModelError("DamperParams: need d_i > d_s >= 0");
    if (!(xi > 0.0)) throw ModelError("DamperParams: need xi > 0");
  }
};

/// Point-cloud obstacle state: positions plus velocities, matched lengths.
struct ObstacleState {
  std::vector<Eigen::Vector3d> points;
  std::vector<Eigen::Vector3d> velocities;

  void validate() const {
    if (points.size() != velocities.size())
      throw ModelError("ObstacleState: points/velocities length mismatch");
  }
};

struct SphereObstacle {
  Eigen::Vector3d center;
  double radius;
  Eigen::Vector3d velocity;
};

struct ControllerWeights {
  double lambda_q = 0.01;     // joint-velocity regularization
  double lambda_delta = 1.0;  // slack weighting (tracking dominates)
  double manip_gain = 0.001;  // manipulability ascent; strictly secondary to tracking
};

namespace detail {

// shared QP skeleton: x = (qdot; delta), equality J qdot - delta = nu,
// quadratic blkdiag(lambda_q I, lambda_delta I), linear term -J_m on the
// joint block, velocity-limit box on the joint block
inline QpProblem controller_qp_base(const RobotModel& model, const Eigen::VectorXd& q,
                                    const Eigen::Matrix<double, 6, Eigen::Dynamic>& J,
                                    const Eigen::VectorXd& nu, const ControllerWeights& w) {
  const int n = model.dof();
  const int nx = n + 6;
  QpProblem p;
  p.Q = Eigen::MatrixXd::Zero(nx, nx);
  p.Q.topLeftCorner(n, n) = w.lambda_q * Eigen::MatrixXd::Identity(n, n);
  p.Q.bottomRightCorner(6, 6) = w.lambda_delta * Eigen::MatrixXd::Identity(6, 6);
  p.c = Eigen::VectorXd::Zero(nx);
  p.c.head(n) = -w.manip_gain * manipulability(model, q).gradient;
  p.E.resize(6, nx);
  p.E << J, -Eigen::MatrixXd::Identity(6, 6);
  p.d = nu;
  p.A.resize(0, nx);
  p.b.resize(0);
  p.lb = Eigen::VectorXd::Constant(nx, -std::numeric_limits<double>::infinity());
  p.ub = Eigen::VectorXd::Constant(nx, std::numeric_limits<double>::infinity());
  p.lb.head(n) = -model.vel_limit;
  p.ub.head(n) = model.vel_limit;
  return p;
}

}  // namespace detail

// Velocity damper rows from the fused distance field over obstacle points:
// for each of the k nearest points within d_i,
//   -dD/dq . qdot <= xi (D - d_s)/(d_i - d_s) - pdot - s
// where pdot is the approach speed of the point (its velocity projected on
// the shrinking direction) and s tightens the row near the self-collision
// boundary: s = beta * max(0, (mu - sigma) - S).
inline QpProblem build_qp_neoss(const Engine& engine, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& nu, const ObstacleState& obstacles,
                                const DamperParams& params,
                                const ControllerWeights& weights = {},
                                double selfcol_beta = 1.0) {
  params.validate();
  obstacles.validate();
  const RobotModel& model = engine.robot;
  const int n = model.dof();
  const int K = model.link_count();
  const Eigen::Matrix<double, 6, Eigen::Dynamic> J = geometric_jacobian(model, q, K);
  QpProblem p = detail::controller_qp_base(model, q, J, nu, weights);

  if (obstacles.points.empty()) return p;
  const QueryResult res = collision_distance(engine, q, obstacles.points);

  // self-collision tightening, shared by every row at this configuration
  const double s_term =
      selfcol_beta * std::max(0.0, engine.self_collision_threshold() - res.S);

  std::vector<int> order;
  for (Eigen::Index i = 0; i < res.D.size(); ++i)
    if (res.D[i] < params.d_i) order.push_back(static_cast<int>(i));
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return res.D[a] < res.D[b] || (res.D[a] == res.D[b] && a < b);
  });
  const int rows = std::min<int>(params.k_rows, static_cast<int>(order.size()));

  std::vector<Eigen::Vector3d> selected;
  selected.reserve(rows);
  for (int r = 0; r < rows; ++r) selected.push_back(obstacles.points[order[r]]);
  const GradientBatch batch = collision_gradient_batch(engine, q, selected);

  p.A.resize(rows, n + 6);
  p.A.setZero();
  p.b.resize(rows);
  for (int r = 0; r < rows; ++r) {
    const int i = order[r];
    // obstacle approach speed: velocity projected on -dD/dp (unit for an SDF)
    const double norm = std::max(batch.dD_dp[r].norm(), 1e-9);
    const double approach = -(batch.dD_dp[r] / norm).dot(obstacles.velocities[i]);
    p.A.row(r).head(n) = -batch.dD_dq[r].transpose();
    p.b[r] = params.xi * (res.D[i] - params.d_s) / (params.d_i - params.d_s) - approach - s_term;
  }
  return p;
}

// Baseline damper rows from geometric sphere distances: one row per sphere
// within d_i, built on the closest robot point and its translational
// Jacobian.
inline QpProblem build_qp_neo(const RobotModel& model, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& nu,
                              const std::vector<SphereObstacle>& spheres,
                              const DamperParams& params,
                              const ControllerWeights& weights = {}) {
  params.validate();
  const int n = model.dof();
  const int K = model.link_count();
  const Eigen::Matrix<double, 6, Eigen::Dynamic> J = geometric_jacobian(model, q, K);
  QpProblem p = detail::controller_qp_base(model, q, J, nu, weights);
  const FrameSet frames = forward_frames(model, q);

  struct Row {
    double d;
    Eigen::VectorXd a;
    double rhs_vel;
  };
  std::vector<Row> rows;
  for (const auto& sphere : spheres) {
    // closest robot point to the sphere center, over links and primitives
    double best = std::numeric_limits<double>::infinity();
    int best_link = 1;
    for (int k = 1; k <= K; ++k) {
      const double dk = link_sdf(model.links[k - 1], to_link_frame(frames, sphere.center, k));
      if (dk < best) {
        best = dk;
        best_link = k;
      }
    }
    const double d = best - sphere.radius;
    if (d >= params.d_i) continue;
    // surface normal toward the obstacle from the closest link, via the SDF
    // gradient at the center (finite differences on the exact SDF)
    Eigen::Vector3d grad;
    constexpr double kH = 1e-6;
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Vector3d dp = Eigen::Vector3d::Zero();
      dp[axis] = kH;
      const double fp =
          link_sdf(model.links[best_link - 1], to_link_frame(frames, sphere.center + dp, best_link));
      const double fm =
          link_sdf(model.links[best_link - 1], to_link_frame(frames, sphere.center - dp, best_link));
      grad[axis] = (fp - fm) / (2.0 * kH);
    }
    const Eigen::Vector3d n_or = grad.normalized();  // robot -> obstacle direction
    const Eigen::Vector3d closest = sphere.center - best * n_or;
    const auto Jp = point_jacobian(model, frames, best_link, closest);
    Row row;
    row.d = d;
    row.a = Eigen::VectorXd::Zero(n + 6);
    row.a.head(n) = (n_or.transpose() * Jp).transpose();  // approach speed of the robot point
    row.rhs_vel = n_or.dot(sphere.velocity);              // obstacle closing speed
    rows.push_back(std::move(row));
  }

  p.A.resize(rows.size(), n + 6);
  p.b.resize(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    p.A.row(r) = rows[r].a.transpose();
    p.b[r] = params.xi * (rows[r].d - params.d_s) / (params.d_i - params.d_s) - rows[r].rhs_vel;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Scenario simulation

struct ReactiveScenario {
  RobotModel robot;
  Eigen::VectorXd q_start;
  Eigen::Vector3d target_position;
  Eigen::Quaterniond target_orientation = Eigen::Quaterniond::Identity();
  std::vector<SphereObstacle> spheres;
  struct RandomMotion {
    bool enabled = false;
    double speed_mean = 0.2;
    double jitter = 0.05;
  } random_motion;
  double dt = 0.01;
  double max_time = 10.0;
  DamperParams params;
  double position_tolerance = 0.005;
  std::uint64_t seed = 0;
  std::string name;
};

enum class SimOutcome { Success, Collision, Timeout };

inline const char* to_string(SimOutcome o) {
  switch (o) {
    case SimOutcome::Success: return "success";
    case SimOutcome::Collision: return "collision";
    case SimOutcome::Timeout: return "timeout";
  }
  return "?";
}

struct TraceRow {
  double t;
  Eigen::VectorXd q;
  double min_D;  // fused distance (NEO-SS) or geometric distance (NEO)
  double S;
  double qdot_norm;
};

struct SimResult {
  SimOutcome outcome = SimOutcome::Timeout;
  std::vector<TraceRow> trace;
  double min_oracle_clearance = std::numeric_limits<double>::infinity();
  double min_D = std::numeric_limits<double>::infinity();
  int steps = 0;
  int infeasible_solves = 0;
  double mean_solve_residual = 0.0;
  double final_position_error = std::numeric_limits<double>::infinity();
};

enum class ControllerKind { Neo, NeoSS };

namespace detail {

// proportional task-space controller (gain 1/s), capped
inline Eigen::VectorXd desired_twist(const RobotModel& model, const FrameSet& frames,
                                     const Eigen::Vector3d& target_pos,
                                     const Eigen::Quaterniond& target_rot, double gain = 1.0,
                                     double lin_cap = 0.5, double ang_cap = 1.0) {
  const int K = model.link_count();
  const Eigen::Isometry3d& ee = frames.link(K);
  Eigen::VectorXd nu(6);
  Eigen::Vector3d lin = gain * (target_pos - ee.translation());
  if (lin.norm() > lin_cap) lin *= lin_cap / lin.norm();
  const Eigen::Quaterniond qe(ee.linear());
  Eigen::Quaterniond err = target_rot * qe.conjugate();
  if (err.w() < 0) err.coeffs() *= -1.0;
  const Eigen::AngleAxisd aa(err);
  Eigen::Vector3d ang = gain * aa.angle() * aa.axis();
  if (ang.norm() > ang_cap) ang *= ang_cap / ang.norm();
  nu.head<3>() = lin;
  nu.tail<3>() = ang;
  return nu;
}

// deterministic point cloud on a sphere surface (fibonacci layout)
inline std::vector<Eigen::Vector3d> sphere_cloud(const Eigen::Vector3d& center, double radius,
                                                 int count) {
  std::vector<Eigen::Vector3d> out;
  out.reserve(count);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    out.push_back(center + radius * Eigen::Vector3d(r * std::cos(phi), r * std::sin(phi), z));
  }
  return out;
}

}  // namespace detail

// Fixed-step control loop: sense, build QP, solve, integrate, move obstacles.
// The outcome encodes failures; the oracle audits every step. Bitwise
// deterministic for a given (scenario, controller, seed).
inline SimResult simulate_scenario(const Engine& engine, const ReactiveScenario& scenario,
                                   ControllerKind controller, int cloud_points_per_sphere = 32) {
  SimResult result;
  const RobotModel& model = engine.robot;
  const int n = model.dof();
  Eigen::VectorXd q = scenario.q_start;
  Eigen::VectorXd qdot = Eigen::VectorXd::Zero(n);
  std::vector<SphereObstacle> spheres = scenario.spheres;
  auto rng = make_rng(scenario.seed, 0x5e0001ull);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int max_steps = static_cast<int>(std::ceil(scenario.max_time / scenario.dt));
  double residual_sum = 0.0;
  int residual_count = 0;

  for (int step = 0; step < max_steps; ++step) {
    const double t = step * scenario.dt;
    const FrameSet frames = forward_frames(model, q);

    // oracle audit: any true collision ends the run
    double oracle_clear = std::numeric_limits<double>::infinity();
    for (const auto& sphere : spheres)
      oracle_clear =
          std::min(oracle_clear, min_link_distance(model, frames, sphere.center) - sphere.radius);
    const SelfCollisionResult sc = self_collision_oracle(model, q);
    oracle_clear = std::min(oracle_clear, sc.clearance);
    result.min_oracle_clearance = std::min(result.min_oracle_clearance, oracle_clear);
    if (oracle_clear <= 0.0) {
      result.outcome = SimOutcome::Collision;
      result.steps = step;
      result.mean_solve_residual = residual_count ? residual_sum / residual_count : 0.0;
      return result;
    }

    const Eigen::VectorXd nu = detail::desired_twist(model, frames, scenario.target_position,
                                                     scenario.target_orientation);
    const Eigen::Vector3d ee = frames.link(model.link_count()).translation();
    result.final_position_error = (scenario.target_position - ee).norm();
    if (result.final_position_error <= scenario.position_tolerance) {
      result.outcome = SimOutcome::Success;
      result.steps = step;
      result.mean_solve_residual = residual_count ? residual_sum / residual_count : 0.0;
      return result;
    }

    // build the controller QP
    QpProblem qp;
    double min_D = std::numeric_limits<double>::infinity();
    double S = 0.0;
    if (controller == ControllerKind::NeoSS) {
      ObstacleState cloud;
      for (const auto& sphere : spheres) {
        const auto pts = detail::sphere_cloud(sphere.center, sphere.radius, cloud_points_per_sphere);
        for (const auto& p : pts) {
          cloud.points.push_back(p);
          cloud.velocities.push_back(sphere.velocity);
        }
      }
      const QueryResult res = collision_distance(engine, q, cloud.points);
      min_D = res.D.size() ? res.min_D : std::numeric_limits<double>::infinity();
      S = res.S;
      qp = build_qp_neoss(engine, q, nu, cloud, scenario.params);
    } else {
      for (const auto& sphere : spheres) {
        double best = std::numeric_limits<double>::infinity();
        for (int k = 1; k <= model.link_count(); ++k)
          best = std::min(best,
                          link_sdf(model.links[k - 1], to_link_frame(frames, sphere.center, k)));
        min_D = std::min(min_D, best - sphere.radius);
      }
      S = svm_score_raw(engine.svm, model, q);
      qp = build_qp_neo(model, q, nu, spheres, scenario.params);
    }

    // solve; infeasible dampers fall back to a braking stop
    try {
      const QpSolution sol = solve_qp(qp);
      qdot = sol.x.head(n);
      residual_sum += sol.kkt.residual();
      ++residual_count;
    } catch (const SolveError&) {
      ++result.infeasible_solves;
      qdot *= 0.5;
    }

    result.trace.push_back({t, q, min_D, S, qdot.norm()});
    result.min_D = std::min(result.min_D, min_D);

    q += scenario.dt * qdot;
    q = q.cwiseMax(model.q_lower).cwiseMin(model.q_upper);
    for (auto& sphere : spheres) {
      if (scenario.random_motion.enabled) {
        Eigen::Vector3d jitter(gauss(rng), gauss(rng), gauss(rng));
        const double target_speed =
            std::max(0.0, scenario.random_motion.speed_mean +
                              scenario.random_motion.jitter * gauss(rng));
        Eigen::Vector3d v = sphere.velocity + 0.5 * scenario.random_motion.jitter * jitter;
        if (v.norm() > 1e-9) v *= target_speed / v.norm();
        sphere.velocity = v;
      }
      sphere.center += scenario.dt * sphere.velocity;
    }
    result.steps = step + 1;
  }
  result.mean_solve_residual = residual_count ? residual_sum / residual_count : 0.0;
  result.outcome = SimOutcome::Timeout;
  return result;
}

// ---------------------------------------------------------------------------
// Scenario file and trace/summary writers

inline ReactiveScenario load_reactive_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ModelError("cannot open scenario file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("scenario JSON parse error in " + path.string() + ": " + e.what());
  }
  ReactiveScenario sc;
  sc.name = j.value("name", path.stem().string());
  const std::filesystem::path robot_path = j.at("robot").get<std::string>();
  sc.robot = load_robot_model(robot_path.is_absolute() ? robot_path
                                                       : path.parent_path() / robot_path);
  const auto& qs = j.at("start");
  sc.q_start.resize(qs.size());
  for (std::size_t i = 0; i < qs.size(); ++i) sc.q_start[i] = qs.at(i).get<double>();
  const auto& tp = j.at("target");
  sc.target_position =
      Eigen::Vector3d(tp.at("position").at(0), tp.at("position").at(1), tp.at("position").at(2));
  if (tp.contains("quaternion")) {
    const auto& tq = tp.at("quaternion");  // w x y z
    sc.target_orientation =
        Eigen::Quaterniond(tq.at(0), tq.at(1), tq.at(2), tq.at(3)).normalized();
  }
  for (const auto& ob : j.value("obstacles", nlohmann::json::array())) {
    SphereObstacle sphere;
    sphere.center =
        Eigen::Vector3d(ob.at("center").at(0), ob.at("center").at(1), ob.at("center").at(2));
    sphere.radius = ob.at("radius").get<double>();
    sphere.velocity.setZero();
    if (ob.contains("velocity"))
      sphere.velocity = Eigen::Vector3d(ob.at("velocity").at(0), ob.at("velocity").at(1),
                                        ob.at("velocity").at(2));
    sc.spheres.push_back(sphere);
  }
  if (j.contains("random")) {
    sc.random_motion.enabled = true;
    sc.random_motion.speed_mean = j.at("random").value("speed_mean", 0.2);
    sc.random_motion.jitter = j.at("random").value("jitter", 0.05);
  }
  sc.dt = j.value("dt", 0.01);
  sc.max_time = j.value("max_time", 10.0);
  sc.seed = j.value("seed", 0);
  if (j.contains("params")) {
    const auto& p = j.at("params");
    sc.params.d_i = p.value("d_i", 0.4);
    sc.params.d_s = p.value("d_s", 0.02);
    sc.params.xi = p.value("xi", 1.0);
    sc.params.k_rows = p.value("k_rows", 5);
  }
  return sc;
}

inline void write_trace_csv(const std::filesystem::path& path, const SimResult& result) {
  std::ofstream os(path);
  if (!os) throw ModelError("cannot write trace file: " + path.string());
  os << "t";
  if (!result.trace.empty())
    for (int j = 0; j < result.trace.front().q.size(); ++j) os << ",q" << (j + 1);
  os << ",D_min,S,qdot_norm\n";
  os.precision(10);
  for (const auto& row : result.trace) {
    os << row.t;
    for (int j = 0; j < row.q.size(); ++j) os << "," << row.q[j];
    os << "," << row.min_D << "," << row.S << "," << row.qdot_norm << "\n";
  }
}

inline nlohmann::json summary_json(const SimResult& result) {
  return nlohmann::json{{"outcome", to_string(result.outcome)},
                        {"min_D", result.min_D},
                        {"min_oracle_clearance", result.min_oracle_clearance},
                        {"steps", result.steps},
                        {"infeasible_solves", result.infeasible_solves},
                        {"mean_solve_residual", result.mean_solve_residual},
                        {"final_position_error", result.final_position_error}};
}

}  // namespace sdfsc
