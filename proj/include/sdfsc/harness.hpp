#pragma once

#include <chrono>
#include <filesystem>
#include <vector>

#include "sdfsc/eval.hpp"
#include "sdfsc/pipeline.hpp"

namespace sdfsc {

// Engine-backed feasibility check shared by the planning front ends: fused
// distance clear of every obstacle at margin, boundary score not transgressing,
// joint limits respected.
inline ConfigCheck engine_config_check(const Engine& engine, const TrajProblem& prob) {
  return [&engine, &prob](const Eigen::VectorXd& q) {
    if (!engine.robot.within_limits(q)) return false;
    if (svm_score_raw(engine.svm, engine.robot, q) < engine.self_collision_threshold())
      return false;
    if (prob.obstacles.empty()) return true;
    std::vector<Eigen::Vector3d> pts(prob.obstacles.size());
    for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = prob.obstacles[i].p;
    const QueryResult res = collision_distance(engine, q, pts);
    for (Eigen::Index i = 0; i < res.D.size(); ++i)
      if (res.D[i] < prob.epsilon + prob.obstacles[i].margin + prob.model_slack) return false;
    return true;
  };
}

// Oracle-backed check for the sampling baseline and audits.
inline ConfigCheck oracle_config_check(const RobotModel& model, const TrajProblem& prob) {
  return [&model, &prob](const Eigen::VectorXd& q) {
    if (!model.within_limits(q)) return false;
    if (self_collision_oracle(model, q).colliding) return false;
    const FrameSet f = forward_frames(model, q);
    for (const auto& ob : prob.obstacles)
      if (min_link_distance(model, f, ob.p) - ob.margin < prob.epsilon) return false;
    return true;
  };
}

struct PlanRunResult {
  bool planned = false;
  bool oracle_valid = false;
  double cost = 0.0;
  double wall_time_s = 0.0;
  TrajReport report;
  Trajectory trajectory;
  std::string failure;
};

// One seeded planning run: RRT-connect seed through the engine check,
// shortcutting, then the constrained optimizer, then the oracle audit.
inline PlanRunResult plan_with_engine(const Engine& engine, const TrajProblem& prob,
                                      std::uint64_t seed) {
  PlanRunResult out;
  const auto t0 = std::chrono::steady_clock::now();
  const ConfigCheck check = engine_config_check(engine, prob);
  RrtOptions ropt;
  ropt.seed = seed;
  const PathResult path = rrt_connect(engine.robot, prob.start, prob.goal, check, ropt);
  if (!path.success) {
    out.failure = "seed planner: " + path.failure;
    return out;
  }
  const auto short_path = shortcut_path(path.waypoints, check, seed);
  const OptimizedTrajectory opt = optimize_trajectory(engine, prob, short_path);
  out.planned = opt.report.feasible;
  out.report = opt.report;
  out.trajectory = opt.trajectory;
  out.cost = opt.report.cost;
  out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out.planned) {
    out.oracle_valid =
        validate_trajectory(engine.robot, opt.trajectory, prob.obstacles, prob.epsilon).valid;
  } else {
    out.failure = "optimizer did not reach feasibility";
  }
  return out;
}

struct CompareOptions {
  int seeds = 25;               // per scenario
  int rrt_star_iterations = 8000;
  int T = 0;                    // 0: use each scenario's horizon
};

// Optimized pipeline vs the sampling baseline over seeded runs on a set of
// scenario files.
inline EvalReport compare_planners(const Engine& engine, const std::vector<TrajScenario>& scenes,
                                   const CompareOptions& opts = {}) {
  if (scenes.empty()) throw ModelError("compare_planners: no scenarios given");
  EvalReport report;
  report.name = "planner-comparison";
  report.datasets["seeds_per_scene"] = opts.seeds;
  report.datasets["scenes"] = scenes.size();

  int ours_success = 0, baseline_success = 0, pairs = 0, ours_cheaper = 0;
  double ours_cost_sum = 0.0, base_cost_sum = 0.0;
  double ours_time_sum = 0.0, base_time_sum = 0.0;
  int runs = 0;

  for (const auto& scene : scenes) {
    TrajProblem prob = scene.problem;
    if (opts.T > 0) prob.T = opts.T;
    for (int s = 0; s < opts.seeds; ++s) {
      ++runs;
      const std::uint64_t seed = mix_seed(prob.seed, 1000 + s);
      const PlanRunResult ours = plan_with_engine(engine, prob, seed);
      if (ours.planned && ours.oracle_valid) ++ours_success;

      const auto t0 = std::chrono::steady_clock::now();
      RrtStarOptions sopt;
      sopt.seed = seed;
      sopt.iterations = opts.rrt_star_iterations;
      const PathResult base = rrt_star(engine.robot, prob.start, prob.goal,
                                       oracle_config_check(engine.robot, prob), sopt);
      const double base_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      double base_cost = 0.0;
      if (base.success) {
        ++baseline_success;
        base_cost = trajectory_cost(engine.robot, resample_path(base.waypoints, prob.T));
      }

      if (ours.planned && ours.oracle_valid && base.success) {
        ++pairs;
        ours_cost_sum += ours.cost;
        base_cost_sum += base_cost;
        if (ours.cost <= base_cost) ++ours_cheaper;
      }
      ours_time_sum += ours.wall_time_s;
      base_time_sum += base_time;
    }
  }

  report.add_metric("optimized_success_rate", static_cast<double>(ours_success) / runs,
                    "oracle-audited seeded runs");
  report.add_metric("baseline_success_rate", static_cast<double>(baseline_success) / runs,
                    "oracle-checked seeded runs");
  if (pairs > 0) {
    report.add_metric("optimized_mean_cost", ours_cost_sum / pairs, "successful pairs");
    report.add_metric("baseline_mean_cost", base_cost_sum / pairs, "successful pairs");
    report.add_metric("optimized_cheaper_fraction", static_cast<double>(ours_cheaper) / pairs,
                      "successful pairs");
    report.check("optimized cheaper on >= 80% of pairs",
                 static_cast<double>(ours_cheaper) / pairs, ">=", 0.80);
    report.check("optimized mean cost <= baseline mean cost", ours_cost_sum / pairs, "<=",
                 base_cost_sum / pairs);
  }
  report.add_metric("optimized_mean_wall_s", ours_time_sum / runs, "measured");
  report.add_metric("baseline_mean_wall_s", base_time_sum / runs, "measured");
  report.check("optimized+audited success rate >= 0.9",
               static_cast<double>(ours_success) / runs, ">=", 0.9);

  // differentiation throughput, echoed against the published ~3 ms figure
  {
    auto rng = make_rng(4242);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int probes = 200;
    const Eigen::Vector3d p(0.5, 0.2, 0.6);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < probes; ++i) {
      Eigen::VectorXd qn(engine.robot.dof());
      for (int j = 0; j < engine.robot.dof(); ++j) qn[j] = uni(rng);
      collision_gradient(engine, engine.robot.denormalize_config(qn), p);
    }
    const double per_call =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / probes;
    report.add_metric("gradient_ms_per_call", per_call * 1e3, "measured");
    report.add_note("gradient_reference", "published differentiation time: approximately 3 ms");
  }
  return report;
}

struct ReactiveBatchOptions {
  int scenarios = 50;
  std::uint64_t seed = 2024;
  int cloud_points_per_sphere = 32;
};

// Randomized multi-obstacle scenarios, both controllers on identical
// conditions. Success requires reaching the target with a clean oracle
// record; the headline property is the ordering of the success counts.
inline EvalReport reactive_batch(const Engine& engine, const ReactiveScenario& base,
                                 const ReactiveBatchOptions& opts = {}) {
  EvalReport report;
  report.name = "reactive-comparison";
  report.datasets["scenarios"] = opts.scenarios;
  report.datasets["seed"] = opts.seed;
  report.add_note("reference", "published success rates: NEO 58%, NEO-SS 86%");

  int neoss_success = 0, neo_success = 0;
  double neoss_min_success_clearance = std::numeric_limits<double>::infinity();
  int neoss_collisions = 0, neo_collisions = 0;

  for (int i = 0; i < opts.scenarios; ++i) {
    ReactiveScenario sc = base;
    sc.seed = mix_seed(opts.seed, i);
    auto rng = make_rng(sc.seed, 0xbeef);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    // randomize positions and headings around the base scenario's spheres
    for (auto& sphere : sc.spheres) {
      sphere.center += Eigen::Vector3d(0.25 * uni(rng), 0.25 * uni(rng), 0.15 * uni(rng));
      Eigen::Vector3d dir(uni(rng), uni(rng), 0.3 * uni(rng));
      if (dir.norm() < 1e-9) dir = -sphere.center.normalized();
      // aim roughly at the arm's midriff so the crossing actually matters
      dir = (0.6 * (Eigen::Vector3d(0, 0, 0.45) - sphere.center).normalized() +
             0.4 * dir.normalized())
                .normalized();
      sphere.velocity = sc.random_motion.speed_mean * dir;
    }
    sc.random_motion.enabled = true;

    const SimResult ss = simulate_scenario(engine, sc, ControllerKind::NeoSS,
                                           opts.cloud_points_per_sphere);
    const SimResult nn = simulate_scenario(engine, sc, ControllerKind::Neo,
                                           opts.cloud_points_per_sphere);
    if (ss.outcome == SimOutcome::Success) {
      ++neoss_success;
      neoss_min_success_clearance =
          std::min(neoss_min_success_clearance, ss.min_oracle_clearance);
    }
    if (ss.outcome == SimOutcome::Collision) ++neoss_collisions;
    if (nn.outcome == SimOutcome::Success) ++neo_success;
    if (nn.outcome == SimOutcome::Collision) ++neo_collisions;
  }

  report.add_metric("neoss_success_rate", static_cast<double>(neoss_success) / opts.scenarios,
                    "oracle-audited runs");
  report.add_metric("neo_success_rate", static_cast<double>(neo_success) / opts.scenarios,
                    "oracle-audited runs");
  report.add_metric("neoss_collisions", neoss_collisions, "oracle-audited runs");
  report.add_metric("neo_collisions", neo_collisions, "oracle-audited runs");
  if (neoss_success > 0)
    report.add_metric("neoss_min_success_clearance", neoss_min_success_clearance,
                      "oracle-audited successes");
  report.check("NEO-SS successes >= NEO successes", neoss_success, ">=",
               static_cast<double>(neo_success));
  if (neoss_success > 0)
    report.check("NEO-SS oracle clearance >= 0 in every success",
                 neoss_min_success_clearance, ">=", 0.0);
  return report;
}

}  // namespace sdfsc
