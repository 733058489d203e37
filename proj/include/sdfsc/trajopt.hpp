#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <deque>
#include <map>
#include <filesystem>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "sdfsc/engine.hpp"
#include "sdfsc/oracle.hpp"
#include "sdfsc/rrt.hpp"

namespace sdfsc {

/// Joint-space trajectory, one column per waypoint (unit time steps).
struct Trajectory {
  Eigen::MatrixXd waypoints;  // n x T

  int length() const { return static_cast<int>(waypoints.cols()); }
  Eigen::VectorXd at(int t) const { return waypoints.col(t); }
};

struct ObstaclePoint {
  Eigen::Vector3d p;
  double margin = 0.0;  // inflation added to the safety margin (sphere radius)
};

struct TrajProblem {
  Eigen::VectorXd start, goal;
  int T = 30;
  double epsilon = 0.02;       // safety margin [m]
  Eigen::VectorXd w_max;       // per-joint step bound [rad/step]
  double v_max = 0.15;         // end-effector step bound [m/step]
  std::vector<ObstaclePoint> obstacles;
  double model_slack = 0.005;  // learned-model inflation on collision rows
  std::uint64_t seed = 0;
};

// Path cost: sum over steps of the squared displacement of every link-frame
// origin (the whole-arm sweep, not just the end effector).
inline double trajectory_cost(const RobotModel& model, const Trajectory& traj) {
  double cost = 0.0;
  const int T = traj.length();
  std::vector<Eigen::VectorXd> fk(T);
  for (int t = 0; t < T; ++t) {
    const FrameSet f = forward_frames(model, traj.at(t));
    Eigen::VectorXd o(3 * model.link_count());
    for (int k = 1; k <= model.link_count(); ++k) o.segment<3>(3 * (k - 1)) = f.link(k).translation();
    fk[t] = o;
  }
  for (int t = 0; t + 1 < T; ++t) cost += (fk[t + 1] - fk[t]).squaredNorm();
  return cost;
}

// Resamples a polyline of configurations to exactly T waypoints by arc length.
inline Trajectory resample_path(const std::vector<Eigen::VectorXd>& path, int T) {
  if (path.size() < 2) throw ModelError("resample_path: need at least 2 waypoints");
  if (T < 2) throw ModelError("resample_path: T must be >= 2");
  const int n = static_cast<int>(path[0].size());
  std::vector<double> cum{0.0};
  for (std::size_t i = 1; i < path.size(); ++i)
    cum.push_back(cum.back() + (path[i] - path[i - 1]).norm());
  const double total = cum.back();
  Trajectory out;
  out.waypoints.resize(n, T);
  for (int t = 0; t < T; ++t) {
    const double s = total * t / (T - 1);
    std::size_t seg = 1;
    while (seg + 1 < cum.size() && cum[seg] < s) ++seg;
    const double denom = std::max(cum[seg] - cum[seg - 1], 1e-12);
    const double a = std::clamp((s - cum[seg - 1]) / denom, 0.0, 1.0);
    out.waypoints.col(t) = path[seg - 1] + a * (path[seg] - path[seg - 1]);
  }
  out.waypoints.col(0) = path.front();
  out.waypoints.col(T - 1) = path.back();
  return out;
}

struct TrajReport {
  double cost = 0.0;
  double seed_cost = 0.0;
  double max_violation = 0.0;
  bool feasible = false;
  bool returned_seed = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  int smoothing_insertions = 0;
  double wall_time_s = 0.0;
};

struct OptimizedTrajectory {
  Trajectory trajectory;
  TrajReport report;
};

namespace detail {

// One collision row: keep D >= margin at a waypoint (even half_t = 2t) or an
// edge midpoint (odd half_t = 2t+1). The (half_t, obstacle) key makes the
// Lagrange multipliers stable across re-selection of the nearest points.
struct CollisionRow {
  int half_t;
  int obstacle;
  Eigen::Vector3d p;
  double margin;
};

struct AlWorkspace {
  const Engine* engine;
  const TrajProblem* prob;
  int n, T, free_vars;
  std::vector<CollisionRow> rows;  // refreshed per outer iteration
  double selfcol_threshold;

  Eigen::VectorXd pack(const Trajectory& traj) const {
    Eigen::VectorXd x(free_vars);
    for (int t = 1; t + 1 < T; ++t) x.segment((t - 1) * n, n) = traj.waypoints.col(t);
    return x;
  }
  Trajectory unpack(const Eigen::VectorXd& x) const {
    Trajectory traj;
    traj.waypoints.resize(n, T);
    traj.waypoints.col(0) = prob->start;
    traj.waypoints.col(T - 1) = prob->goal;
    for (int t = 1; t + 1 < T; ++t) traj.waypoints.col(t) = x.segment((t - 1) * n, n);
    return traj;
  }

  Eigen::VectorXd config_at_half(const Trajectory& traj, int half_t) const {
    if (half_t % 2 == 0) return traj.at(half_t / 2);
    return 0.5 * (traj.at(half_t / 2) + traj.at(half_t / 2 + 1));
  }
};

// Inequality residuals c(x) >= 0, stacked in a fixed order:
//   [collision rows][self-collision rows][step bounds][ee steps][box lo][box hi]
struct ConstraintEval {
  Eigen::VectorXd c;
  Eigen::MatrixXd jac;  // rows x free_vars (dense; problems are small)
  int collision_rows = 0;
};

inline ConstraintEval eval_constraints(const AlWorkspace& ws, const Trajectory& traj) {
  const int n = ws.n, T = ws.T;
  const auto& prob = *ws.prob;
  const auto& engine = *ws.engine;

  const int n_col = static_cast<int>(ws.rows.size());
  const int n_self = (T - 2) + (T - 1);  // interior waypoints plus edge midpoints
  const int n_step = (T - 1) * n * 2;
  const int n_ee = T - 1;
  const int n_box = (T - 2) * n * 2;
  const int total = n_col + n_self + n_step + n_ee + n_box;

  ConstraintEval out;
  out.collision_rows = n_col;
  out.c.resize(total);
  out.jac = Eigen::MatrixXd::Zero(total, ws.free_vars);
  int row = 0;

  auto var_col = [&](int t) { return (t - 1) * n; };  // interior waypoint offset
  auto interior = [&](int t) { return t >= 1 && t + 1 < T; };
  // scatter a gradient on the half-step config into the waypoint columns
  auto scatter = [&](int row_idx, int half_t, const Eigen::VectorXd& g) {
    if (half_t % 2 == 0) {
      const int t = half_t / 2;
      if (interior(t)) out.jac.block(row_idx, var_col(t), 1, n) = g.transpose();
    } else {
      const int t = half_t / 2;
      if (interior(t)) out.jac.block(row_idx, var_col(t), 1, n) = 0.5 * g.transpose();
      if (interior(t + 1)) out.jac.block(row_idx, var_col(t + 1), 1, n) = 0.5 * g.transpose();
    }
  };

  // per half-step config: one shared gradient batch covers its collision
  // rows and the self-collision row (the boundary terms dominate the cost)
  std::map<int, std::pair<int, int>> groups;  // half_t -> [begin, end) in ws.rows
  for (int i = 0; i < n_col; ++i) {
    auto [it, fresh] = groups.try_emplace(ws.rows[i].half_t, i, i + 1);
    if (!fresh) it->second.second = i + 1;
  }
  int self_row = n_col;
  for (int half_t = 1; half_t <= 2 * (T - 1) - 1; ++half_t) {
    if (half_t % 2 == 0 && !interior(half_t / 2)) continue;
    const Eigen::VectorXd q = ws.config_at_half(traj, half_t);
    const auto group = groups.find(half_t);
    if (group != groups.end()) {
      const auto [begin, end] = group->second;
      std::vector<Eigen::Vector3d> pts;
      pts.reserve(end - begin);
      for (int i = begin; i < end; ++i) pts.push_back(ws.rows[i].p);
      const GradientBatch batch = collision_gradient_batch(engine, q, pts);
      for (int i = begin; i < end; ++i) {
        out.c[i] = batch.D[i - begin] - ws.rows[i].margin;
        scatter(i, half_t, batch.dD_dq[i - begin]);
      }
      out.c[self_row] = batch.S - ws.selfcol_threshold;
      scatter(self_row, half_t, batch.dS_dq);
    } else {
      out.c[self_row] = svm_score_raw(engine.svm, engine.robot, q) - ws.selfcol_threshold;
      scatter(self_row, half_t, svm_score_gradient(engine.svm, engine.robot, q));
    }
    ++self_row;
  }
  row = self_row;
  for (int t = 0; t + 1 < T; ++t) {
    const Eigen::VectorXd delta = traj.at(t + 1) - traj.at(t);
    for (int j = 0; j < n; ++j) {
      out.c[row] = prob.w_max[j] - delta[j];
      if (interior(t + 1)) out.jac(row, var_col(t + 1) + j) = -1.0;
      if (interior(t)) out.jac(row, var_col(t) + j) = 1.0;
      ++row;
      out.c[row] = prob.w_max[j] + delta[j];
      if (interior(t + 1)) out.jac(row, var_col(t + 1) + j) = 1.0;
      if (interior(t)) out.jac(row, var_col(t) + j) = -1.0;
      ++row;
    }
  }
  const int K = engine.robot.link_count();
  std::vector<FrameSet> frames(T);
  for (int t = 0; t < T; ++t) frames[t] = forward_frames(engine.robot, traj.at(t));
  for (int t = 0; t + 1 < T; ++t) {
    const Eigen::Vector3d ee0 = frames[t].link(K).translation();
    const Eigen::Vector3d ee1 = frames[t + 1].link(K).translation();
    const Eigen::Vector3d diff = ee1 - ee0;
    const double dist = diff.norm();
    out.c[row] = prob.v_max - dist;
    if (dist > 1e-9) {
      const Eigen::Vector3d dir = diff / dist;
      if (interior(t + 1)) {
        const auto J = point_jacobian(engine.robot, frames[t + 1], K, ee1);
        out.jac.block(row, var_col(t + 1), 1, n) = -(dir.transpose() * J);
      }
      if (interior(t)) {
        const auto J = point_jacobian(engine.robot, frames[t], K, ee0);
        out.jac.block(row, var_col(t), 1, n) = dir.transpose() * J;
      }
    }
    ++row;
  }
  for (int t = 1; t + 1 < T; ++t) {
    for (int j = 0; j < n; ++j) {
      out.c[row] = traj.at(t)[j] - engine.robot.q_lower[j];
      out.jac(row, var_col(t) + j) = 1.0;
      ++row;
      out.c[row] = engine.robot.q_upper[j] - traj.at(t)[j];
      out.jac(row, var_col(t) + j) = -1.0;
      ++row;
    }
  }
  return out;
}

// cost and its gradient wrt the interior waypoints
inline double eval_cost(const AlWorkspace& ws, const Trajectory& traj, Eigen::VectorXd* grad) {
  const int n = ws.n, T = ws.T;
  const auto& model = ws.engine->robot;
  const int K = model.link_count();
  double cost = 0.0;
  if (grad) grad->setZero();

  std::vector<Eigen::VectorXd> origins(T);
  std::vector<FrameDerivatives> derivs(T);
  for (int t = 0; t < T; ++t) {
    const FrameSet f = forward_frames(model, traj.at(t));
    Eigen::VectorXd o(3 * K);
    for (int k = 1; k <= K; ++k) o.segment<3>(3 * (k - 1)) = f.link(k).translation();
    origins[t] = o;
    if (grad && t >= 1 && t + 1 < T) derivs[t] = frame_derivatives(model, traj.at(t));
  }
  for (int t = 0; t + 1 < T; ++t) {
    const Eigen::VectorXd diff = origins[t + 1] - origins[t];
    cost += diff.squaredNorm();
    if (!grad) continue;
    // d cost / d q_t gets -2 diff^T J_t, d/d q_{t+1} gets +2 diff^T J_{t+1}
    for (int side = 0; side < 2; ++side) {
      const int tt = t + side;
      if (tt < 1 || tt + 1 >= T) continue;
      const double sign = side == 0 ? -2.0 : 2.0;
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 1; k <= K; ++k)
          acc += diff.segment<3>(3 * (k - 1)).dot(derivs[tt].translation(k, j));
        (*grad)[(tt - 1) * n + j] += sign * acc;
      }
    }
  }
  return cost;
}

// collision rows for the current iterate: the top-k nearest obstacle points
// (by fused distance minus inflation) at every interior waypoint and every
// edge midpoint
inline std::vector<CollisionRow> select_rows(const AlWorkspace& ws, const Trajectory& traj,
                                             int per_waypoint) {
  std::vector<CollisionRow> rows;
  const auto& prob = *ws.prob;
  if (prob.obstacles.empty()) return rows;
  std::vector<Eigen::Vector3d> pts(prob.obstacles.size());
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = prob.obstacles[i].p;
  for (int half_t = 1; half_t <= 2 * (ws.T - 1) - 1; ++half_t) {
    if (half_t % 2 == 0 && (half_t / 2 < 1 || half_t / 2 + 1 >= ws.T)) continue;
    const QueryResult res = collision_distance(*ws.engine, ws.config_at_half(traj, half_t), pts);
    std::vector<int> order(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double da = res.D[a] - prob.obstacles[a].margin;
      const double db = res.D[b] - prob.obstacles[b].margin;
      return da < db || (da == db && a < b);
    });
    const int kk = std::min<int>(per_waypoint, static_cast<int>(order.size()));
    for (int i = 0; i < kk; ++i) {
      const int o = order[i];
      rows.push_back({half_t, o, prob.obstacles[o].p,
                      prob.epsilon + prob.obstacles[o].margin + prob.model_slack});
    }
  }
  return rows;
}

// L-BFGS two-loop recursion with Armijo backtracking on a callable
// f(x, grad) -> value.
template <typename F>
int lbfgs_minimize(F&& fn, Eigen::VectorXd& x, int max_iters, double gtol) {
  const int m = 8;
  std::deque<Eigen::VectorXd> svec, yvec;
  Eigen::VectorXd grad(x.size()), grad_new(x.size());
  double fx = fn(x, grad);
  int iters = 0;
  for (; iters < max_iters; ++iters) {
    if (grad.cwiseAbs().maxCoeff() <= gtol) break;
    // two-loop recursion
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(svec.size());
    for (int i = static_cast<int>(svec.size()) - 1; i >= 0; --i) {
      const double rho = 1.0 / yvec[i].dot(svec[i]);
      alpha[i] = rho * svec[i].dot(q);
      q -= alpha[i] * yvec[i];
    }
    if (!svec.empty()) {
      const double gamma = svec.back().dot(yvec.back()) / yvec.back().squaredNorm();
      q *= gamma;
    }
    for (std::size_t i = 0; i < svec.size(); ++i) {
      const double rho = 1.0 / yvec[i].dot(svec[i]);
      const double beta = rho * yvec[i].dot(q);
      q += (alpha[i] - beta) * svec[i];
    }
    Eigen::VectorXd dir = -q;
    if (dir.dot(grad) > -1e-14 * grad.norm() * dir.norm()) dir = -grad;  // safeguard

    // Armijo backtracking
    double step = 1.0;
    const double slope = grad.dot(dir);
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::VectorXd x_new = x + step * dir;
      const double f_new = fn(x_new, grad_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        const Eigen::VectorXd s = x_new - x;
        const Eigen::VectorXd yd = grad_new - grad;
        if (yd.dot(s) > 1e-12) {
          svec.push_back(s);
          yvec.push_back(yd);
          if (static_cast<int>(svec.size()) > m) {
            svec.pop_front();
            yvec.pop_front();
          }
        }
        x = x_new;
        fx = f_new;
        grad = grad_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // line search exhausted: converged or stuck
  }
  return iters;
}

}  // namespace detail

struct TrajOptOptions {
  int collision_rows_per_waypoint = 5;
  int max_outer = 12;
  int max_inner = 60;
  double constraint_tol = 1e-4;
  double rho0 = 10.0;
  double rho_growth = 2.0;
  double gtol = 1e-6;
};

// Augmented-Lagrangian trajectory optimization over the interior waypoints
// with a quasi-Newton inner loop. Endpoints stay frozen; the monotone
// acceptance rule returns the seed when optimization cannot beat a feasible
// seed's cost.
inline OptimizedTrajectory optimize_trajectory(const Engine& engine, const TrajProblem& prob,
                                               const std::vector<Eigen::VectorXd>& seed_path,
                                               const TrajOptOptions& opts = {}) {
  const auto t_start = std::chrono::steady_clock::now();
  const int n = engine.robot.dof();
  if (prob.w_max.size() != n) throw ModelError("optimize_trajectory: w_max size mismatch");

  detail::AlWorkspace ws;
  ws.engine = &engine;
  ws.prob = &prob;
  ws.n = n;
  ws.T = prob.T;
  ws.free_vars = (prob.T - 2) * n;
  ws.selfcol_threshold = engine.self_collision_threshold();

  const Trajectory seed = resample_path(seed_path, prob.T);
  OptimizedTrajectory out;
  out.report.seed_cost = trajectory_cost(engine.robot, seed);

  if (ws.free_vars == 0) {  // T = 2: endpoints only, nothing to optimize
    out.trajectory = seed;
    out.report.cost = out.report.seed_cost;
    out.report.feasible = true;
    return out;
  }

  Eigen::VectorXd x = ws.pack(seed);
  ws.rows = detail::select_rows(ws, seed, opts.collision_rows_per_waypoint);

  // seed feasibility for the monotone acceptance rule
  const detail::ConstraintEval seed_eval = detail::eval_constraints(ws, seed);
  const double seed_violation =
      seed_eval.c.size() ? std::max(0.0, -seed_eval.c.minCoeff()) : 0.0;
  const bool seed_feasible = seed_violation <= opts.constraint_tol;

  double rho = opts.rho0;
  // multipliers: collision rows are keyed by (half_t, obstacle) so they stay
  // attached to their constraint across row re-selection; the remaining
  // families have a fixed layout and use a flat vector
  std::map<std::pair<int, int>, double> lam_col;
  Eigen::VectorXd lam_rest;
  double prev_violation = std::numeric_limits<double>::infinity();

  Eigen::VectorXd best_x = x;
  double best_cost = std::numeric_limits<double>::infinity();
  bool best_feasible = false;
  double best_violation = std::numeric_limits<double>::infinity();

  for (int outer = 0; outer < opts.max_outer; ++outer) {
    out.report.outer_iterations = outer + 1;
    ws.rows = detail::select_rows(ws, ws.unpack(x), opts.collision_rows_per_waypoint);
    const int n_col = static_cast<int>(ws.rows.size());

    auto assemble_lambda = [&](int total_rows) {
      Eigen::VectorXd lambda = Eigen::VectorXd::Zero(total_rows);
      for (int i = 0; i < n_col; ++i) {
        const auto it = lam_col.find({ws.rows[i].half_t, ws.rows[i].obstacle});
        if (it != lam_col.end()) lambda[i] = it->second;
      }
      if (lam_rest.size() != total_rows - n_col)
        lam_rest = Eigen::VectorXd::Zero(total_rows - n_col);
      lambda.tail(total_rows - n_col) = lam_rest;
      return lambda;
    };

    Eigen::VectorXd lambda;
    {
      const detail::ConstraintEval ce = detail::eval_constraints(ws, ws.unpack(x));
      lambda = assemble_lambda(static_cast<int>(ce.c.size()));
    }

    auto al_objective = [&](const Eigen::VectorXd& xv, Eigen::VectorXd& grad) {
      const Trajectory traj = ws.unpack(xv);
      Eigen::VectorXd gcost(ws.free_vars);
      const double cost = detail::eval_cost(ws, traj, &gcost);
      const detail::ConstraintEval ce = detail::eval_constraints(ws, traj);
      double penalty = 0.0;
      Eigen::VectorXd w = Eigen::VectorXd::Zero(ce.c.size());
      for (Eigen::Index i = 0; i < ce.c.size(); ++i) {
        const double v = lambda[i] / rho - ce.c[i];
        if (v > 0.0) {
          penalty += 0.5 * rho * v * v - 0.5 * lambda[i] * lambda[i] / rho;
          w[i] = rho * v;  // dL/dc_i = -w_i
        } else {
          penalty -= 0.5 * lambda[i] * lambda[i] / rho;
        }
      }
      grad = gcost - ce.jac.transpose() * w;
      return cost + penalty;
    };

    out.report.inner_iterations +=
        detail::lbfgs_minimize(al_objective, x, opts.max_inner, opts.gtol);

    const Trajectory traj = ws.unpack(x);
    const detail::ConstraintEval ce = detail::eval_constraints(ws, traj);
    const double violation = ce.c.size() ? std::max(0.0, -ce.c.minCoeff()) : 0.0;
    const double cost = detail::eval_cost(ws, traj, nullptr);

    if (violation <= opts.constraint_tol) {
      if (!best_feasible || cost < best_cost) {
        best_feasible = true;
        best_cost = cost;
        best_x = x;
        best_violation = violation;
      }
      if (outer > 0 && violation <= opts.constraint_tol * 0.5) break;
    } else if (!best_feasible && violation < best_violation) {
      best_violation = violation;
      best_cost = cost;
      best_x = x;
    }

    // first-order multiplier update, written back to persistent storage
    for (int i = 0; i < n_col; ++i) {
      const double next = std::max(0.0, lambda[i] - rho * ce.c[i]);
      lam_col[{ws.rows[i].half_t, ws.rows[i].obstacle}] = next;
    }
    for (Eigen::Index i = n_col; i < ce.c.size(); ++i)
      lam_rest[i - n_col] = std::max(0.0, lambda[i] - rho * ce.c[i]);
    if (violation > 0.5 * prev_violation) rho *= opts.rho_growth;
    prev_violation = violation;
  }

  Trajectory result = ws.unpack(best_x);
  double result_cost = best_feasible ? best_cost : detail::eval_cost(ws, result, nullptr);

  // monotone acceptance: a feasible seed is never made worse
  if (seed_feasible && (!best_feasible || result_cost > out.report.seed_cost)) {
    result = seed;
    result_cost = out.report.seed_cost;
    best_feasible = true;
    best_violation = seed_violation;
    out.report.returned_seed = true;
  }

  // post-optimization smoothing after self-collision escapes: split any step
  // that jumped past half the step bound
  {
    std::vector<Eigen::VectorXd> smoothed;
    smoothed.push_back(result.at(0));
    for (int t = 0; t + 1 < result.length(); ++t) {
      const Eigen::VectorXd a = result.at(t), b = result.at(t + 1);
      if (((b - a).cwiseAbs().array() > 0.5 * prob.w_max.array()).any()) {
        smoothed.push_back(0.5 * (a + b));
        ++out.report.smoothing_insertions;
      }
      smoothed.push_back(b);
    }
    if (out.report.smoothing_insertions > 0) {
      result.waypoints.resize(n, static_cast<int>(smoothed.size()));
      for (std::size_t i = 0; i < smoothed.size(); ++i)
        result.waypoints.col(static_cast<int>(i)) = smoothed[i];
    }
  }

  out.trajectory = result;
  out.report.cost = result_cost;
  out.report.feasible = best_feasible;
  out.report.max_violation = best_feasible ? 0.0 : best_violation;
  out.report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

struct TrajViolation {
  double time;       // fractional waypoint index
  double clearance;  // offending clearance [m]
  std::string kind;  // "obstacle" | "self-collision"
};

struct ValidationReport {
  bool valid = true;
  std::vector<TrajViolation> violations;
  double min_obstacle_clearance = std::numeric_limits<double>::infinity();
  double min_self_clearance = std::numeric_limits<double>::infinity();
};

// Ground-truth audit with the analytic oracle only; the learned engine never
// participates. Interpolates densely (per-joint step <= interp_step).
inline ValidationReport validate_trajectory(const RobotModel& model, const Trajectory& traj,
                                            const std::vector<ObstaclePoint>& obstacles,
                                            double epsilon, double interp_step = 0.01) {
  ValidationReport rep;
  const int T = traj.length();
  for (int t = 0; t + 1 < T; ++t) {
    const Eigen::VectorXd a = traj.at(t), b = traj.at(t + 1);
    const double span = (b - a).cwiseAbs().maxCoeff();
    const int steps = std::max(1, static_cast<int>(std::ceil(span / interp_step)));
    for (int s = (t == 0 ? 0 : 1); s <= steps; ++s) {
      const double u = static_cast<double>(s) / steps;
      const Eigen::VectorXd q = a + u * (b - a);
      const double time = t + u;
      const FrameSet f = forward_frames(model, q);
      for (const auto& ob : obstacles) {
        const double clearance = min_link_distance(model, f, ob.p) - ob.margin;
        rep.min_obstacle_clearance = std::min(rep.min_obstacle_clearance, clearance);
        if (clearance < epsilon) {
          rep.valid = false;
          rep.violations.push_back({time, clearance, "obstacle"});
        }
      }
      const SelfCollisionResult sc = self_collision_oracle(model, q);
      rep.min_self_clearance = std::min(rep.min_self_clearance, sc.clearance);
      if (sc.colliding) {
        rep.valid = false;
        rep.violations.push_back({time, sc.clearance, "self-collision"});
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Scenario file: JSON with robot path, spherical obstacles (or a point-cloud
// CSV), endpoints, horizon, and bounds.

struct TrajScenario {
  RobotModel robot;
  TrajProblem problem;
  std::string name;
};

inline TrajScenario load_traj_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ModelError("cannot open scenario file: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ModelError("scenario JSON parse error in " + path.string() + ": " + e.what());
  }
  TrajScenario sc;
  sc.name = j.value("name", path.stem().string());
  const std::filesystem::path robot_path = j.at("robot").get<std::string>();
  sc.robot = load_robot_model(robot_path.is_absolute() ? robot_path
                                                       : path.parent_path() / robot_path);
  const int n = sc.robot.dof();
  auto vec = [&](const nlohmann::json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr.at(i).get<double>();
    return v;
  };
  sc.problem.start = vec(j.at("start"));
  sc.problem.goal = vec(j.at("goal"));
  if (sc.problem.start.size() != n || sc.problem.goal.size() != n)
    throw ModelError("scenario start/goal size mismatch with robot dof");
  sc.problem.T = j.value("T", 30);
  sc.problem.epsilon = j.value("epsilon", 0.02);
  sc.problem.v_max = j.value("v_max", 0.15);
  sc.problem.seed = j.value("seed", 0);
  if (j.at("w_max").is_array()) {
    sc.problem.w_max = vec(j.at("w_max"));
  } else {
    sc.problem.w_max = Eigen::VectorXd::Constant(n, j.at("w_max").get<double>());
  }
  if (j.contains("obstacles")) {
    for (const auto& ob : j.at("obstacles")) {
      ObstaclePoint p;
      p.p = Eigen::Vector3d(ob.at("center").at(0), ob.at("center").at(1), ob.at("center").at(2));
      p.margin = ob.value("radius", 0.0);
      sc.problem.obstacles.push_back(p);
    }
  }
  if (j.contains("point_cloud")) {
    const std::filesystem::path cloud_path = j.at("point_cloud").get<std::string>();
    std::ifstream cs(cloud_path.is_absolute() ? cloud_path : path.parent_path() / cloud_path);
    if (!cs) throw ModelError("cannot open point cloud: " + cloud_path.string());
    std::string line;
    while (std::getline(cs, line)) {
      if (line.empty()) continue;
      ObstaclePoint p;
      if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.p.x(), &p.p.y(), &p.p.z()) == 3)
        sc.problem.obstacles.push_back(p);
    }
  }
  return sc;
}

}  // namespace sdfsc
