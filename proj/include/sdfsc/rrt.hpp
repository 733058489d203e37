#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "sdfsc/common.hpp"
#include "sdfsc/robot.hpp"

namespace sdfsc {

using ConfigCheck = std::function<bool(const Eigen::VectorXd&)>;  // true = collision-free

struct RrtOptions {
  double step = 0.35;             // joint-space extension step [rad, L2]
  double edge_resolution = 0.02;  // max per-joint delta between edge checks [rad]
  int max_nodes = 30000;
  std::uint64_t seed = 0;
};

struct PathResult {
  bool success = false;
  std::vector<Eigen::VectorXd> waypoints;
  int nodes = 0;
  std::string failure;
};

namespace detail {

// checks intermediate configurations spaced <= resolution in L-inf
inline bool edge_free(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const ConfigCheck& free, double resolution) {
  const double span = (b - a).cwiseAbs().maxCoeff();
  const int steps = std::max(1, static_cast<int>(std::ceil(span / resolution)));
  for (int s = 1; s <= steps; ++s) {
    const double t = static_cast<double>(s) / steps;
    if (!free(a + t * (b - a))) return false;
  }
  return true;
}

struct Tree {
  std::vector<Eigen::VectorXd> nodes;
  std::vector<int> parent;

  int nearest(const Eigen::VectorXd& q) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = (nodes[i] - q).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }

  int add(const Eigen::VectorXd& q, int par) {
    nodes.push_back(q);
    parent.push_back(par);
    return static_cast<int>(nodes.size()) - 1;
  }

  std::vector<Eigen::VectorXd> trace(int idx) const {
    std::vector<Eigen::VectorXd> out;
    for (int i = idx; i >= 0; i = parent[i]) out.push_back(nodes[i]);
    return out;
  }
};

enum class ExtendResult { Trapped, Advanced, Reached };

inline ExtendResult extend(Tree& tree, const Eigen::VectorXd& target, const ConfigCheck& free,
                           const RrtOptions& opt, int& new_idx) {
  const int near = tree.nearest(target);
  const Eigen::VectorXd& qn = tree.nodes[near];
  const double dist = (target - qn).norm();
  const Eigen::VectorXd qs =
      dist <= opt.step ? target : (qn + (opt.step / dist) * (target - qn)).eval();
  if (!free(qs) || !edge_free(qn, qs, free, opt.edge_resolution)) return ExtendResult::Trapped;
  new_idx = tree.add(qs, near);
  return dist <= opt.step ? ExtendResult::Reached : ExtendResult::Advanced;
}

}  // namespace detail

// Bidirectional RRT with greedy connect phases; deterministic per seed.
inline PathResult rrt_connect(const RobotModel& model, const Eigen::VectorXd& start,
                              const Eigen::VectorXd& goal, const ConfigCheck& free,
                              const RrtOptions& opt = {}) {
  PathResult res;
  if (!free(start)) {
    res.failure = "start configuration is not collision-free";
    return res;
  }
  if (!free(goal)) {
    res.failure = "goal configuration is not collision-free";
    return res;
  }
  if ((start - goal).norm() < 1e-12 ||
      detail::edge_free(start, goal, free, opt.edge_resolution)) {
    res.success = true;
    res.waypoints = {start, goal};
    res.nodes = 2;
    return res;
  }

  auto rng = make_rng(opt.seed, 0x66720001ull);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int n = model.dof();
  auto sample = [&] {
    Eigen::VectorXd qn(n);
    for (int j = 0; j < n; ++j) qn[j] = uni(rng);
    return model.denormalize_config(qn);
  };

  detail::Tree ta, tb;
  ta.add(start, -1);
  tb.add(goal, -1);
  bool a_is_start = true;

  while (static_cast<int>(ta.nodes.size() + tb.nodes.size()) < opt.max_nodes) {
    const Eigen::VectorXd q_rand = sample();
    int ia = -1;
    if (detail::extend(ta, q_rand, free, opt, ia) != detail::ExtendResult::Trapped) {
      // greedily connect the other tree to the freshly added node
      const Eigen::VectorXd& q_new = ta.nodes[ia];
      int ib = -1;
      detail::ExtendResult r;
      do {
        r = detail::extend(tb, q_new, free, opt, ib);
      } while (r == detail::ExtendResult::Advanced);
      if (r == detail::ExtendResult::Reached) {
        // pa: root_a .. q_new ; pb: q_new .. root_b (trees meet at q_new)
        auto pa = ta.trace(ia);
        std::reverse(pa.begin(), pa.end());
        const auto pb = tb.trace(ib);
        std::vector<Eigen::VectorXd> path;
        if (a_is_start) {
          path = pa;
          path.insert(path.end(), pb.begin() + 1, pb.end());
        } else {
          path.assign(pb.rbegin(), pb.rend());
          path.insert(path.end(), pa.rbegin() + 1, pa.rend());
        }
        res.success = true;
        res.waypoints = std::move(path);
        res.nodes = static_cast<int>(ta.nodes.size() + tb.nodes.size());
        return res;
      }
    }
    std::swap(ta, tb);
    a_is_start = !a_is_start;
  }
  res.nodes = opt.max_nodes;
  res.failure = "node budget exhausted without connecting the trees";
  return res;
}

// Random shortcutting pass: repeatedly tries to splice out the section
// between two random waypoints when the direct edge is free. Deterministic
// per seed; cheap way to collapse RRT detours before optimization.
inline std::vector<Eigen::VectorXd> shortcut_path(std::vector<Eigen::VectorXd> path,
                                                  const ConfigCheck& free, std::uint64_t seed,
                                                  int rounds = 120,
                                                  double edge_resolution = 0.02) {
  if (path.size() < 3) return path;
  auto rng = make_rng(seed, 0x66720003ull);
  for (int r = 0; r < rounds && path.size() > 2; ++r) {
    std::uniform_int_distribution<std::size_t> pick(0, path.size() - 1);
    std::size_t i = pick(rng), j = pick(rng);
    if (i > j) std::swap(i, j);
    if (j - i < 2) continue;
    if (detail::edge_free(path[i], path[j], free, edge_resolution))
      path.erase(path.begin() + i + 1, path.begin() + j);
  }
  return path;
}

struct RrtStarOptions {
  double step = 0.35;
  double edge_resolution = 0.02;
  int iterations = 12000;  // fixed budget keeps runs deterministic per seed
  double goal_bias = 0.05;
  std::uint64_t seed = 0;
};

// RRT* over joint-space path length with standard shrinking-radius rewiring.
inline PathResult rrt_star(const RobotModel& model, const Eigen::VectorXd& start,
                           const Eigen::VectorXd& goal, const ConfigCheck& free,
                           const RrtStarOptions& opt = {}) {
  PathResult res;
  if (!free(start)) {
    res.failure = "start configuration is not collision-free";
    return res;
  }
  if (!free(goal)) {
    res.failure = "goal configuration is not collision-free";
    return res;
  }

  auto rng = make_rng(opt.seed, 0x66720002ull);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  const int n = model.dof();
  auto sample = [&] {
    Eigen::VectorXd qn(n);
    for (int j = 0; j < n; ++j) qn[j] = uni(rng);
    return model.denormalize_config(qn);
  };

  std::vector<Eigen::VectorXd> nodes{start};
  std::vector<int> parent{-1};
  std::vector<double> cost{0.0};
  int goal_idx = -1;
  const double span = (model.q_upper - model.q_lower).norm();

  for (int it = 0; it < opt.iterations; ++it) {
    const Eigen::VectorXd target = (uni(rng) < opt.goal_bias) ? goal : sample();
    // steer from nearest
    int near = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = (nodes[i] - target).squaredNorm();
      if (d < best_d) {
        best_d = d;
        near = static_cast<int>(i);
      }
    }
    const double dist = (target - nodes[near]).norm();
    if (dist < 1e-12) continue;
    const Eigen::VectorXd q_new =
        dist <= opt.step ? target : (nodes[near] + (opt.step / dist) * (target - nodes[near])).eval();
    if (!free(q_new)) continue;

    // neighbourhood radius (shrinking with n)
    const double card = static_cast<double>(nodes.size()) + 1.0;
    const double radius =
        std::min(2.5 * opt.step,
                 3.0 * span * std::pow(std::log(card) / card, 1.0 / static_cast<double>(n)));
    std::vector<int> neigh;
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if ((nodes[i] - q_new).norm() <= std::max(radius, opt.step)) neigh.push_back(static_cast<int>(i));

    // choose best parent among the neighbourhood
    int best_parent = near;
    double best_cost = cost[near] + (nodes[near] - q_new).norm();
    for (int i : neigh) {
      const double c = cost[i] + (nodes[i] - q_new).norm();
      if (c < best_cost && detail::edge_free(nodes[i], q_new, free, opt.edge_resolution)) {
        best_cost = c;
        best_parent = i;
      }
    }
    if (!detail::edge_free(nodes[best_parent], q_new, free, opt.edge_resolution)) continue;
    nodes.push_back(q_new);
    parent.push_back(best_parent);
    cost.push_back(best_cost);
    const int new_idx = static_cast<int>(nodes.size()) - 1;

    // rewire the neighbourhood through the new node
    for (int i : neigh) {
      const double c = best_cost + (nodes[i] - q_new).norm();
      if (c + 1e-12 < cost[i] && detail::edge_free(q_new, nodes[i], free, opt.edge_resolution)) {
        parent[i] = new_idx;
        cost[i] = c;
      }
    }

    // try to link the goal
    const double dg = (q_new - goal).norm();
    if (dg <= opt.step && detail::edge_free(q_new, goal, free, opt.edge_resolution)) {
      const double cg = best_cost + dg;
      if (goal_idx < 0) {
        nodes.push_back(goal);
        parent.push_back(new_idx);
        cost.push_back(cg);
        goal_idx = static_cast<int>(nodes.size()) - 1;
      } else if (cg < cost[goal_idx]) {
        parent[goal_idx] = new_idx;
        cost[goal_idx] = cg;
      }
    }
  }

  res.nodes = static_cast<int>(nodes.size());
  if (goal_idx < 0) {
    res.failure = "no path within the iteration budget";
    return res;
  }
  std::vector<Eigen::VectorXd> path;
  for (int i = goal_idx; i >= 0; i = parent[i]) path.push_back(nodes[i]);
  std::reverse(path.begin(), path.end());
  res.success = true;
  res.waypoints = std::move(path);
  return res;
}

}  // namespace sdfsc
