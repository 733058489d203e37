#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sdfsc/engine.hpp"
#include "sdfsc/oracle.hpp"
#include "sdfsc/reactive.hpp"
#include "sdfsc/rrt.hpp"
#include "sdfsc/trajopt.hpp"

namespace sdfsc {

/// Machine-readable evaluation report: every metric names the dataset or
/// oracle it was computed against; pass/fail comes only from declared rules.
struct EvalReport {
  std::string name;
  nlohmann::json metrics = nlohmann::json::object();
  nlohmann::json datasets = nlohmann::json::object();
  struct Rule {
    std::string name;
    std::string comparison;  // "<=" or ">="
    double threshold;
    double value;
    bool passed;
  };
  std::vector<Rule> rules;

  void add_metric(const std::string& key, double value, const std::string& source) {
    metrics[key] = {{"value", value}, {"source", source}};
  }
  void add_note(const std::string& key, const std::string& text) { metrics[key] = text; }

  bool check(const std::string& rule, double value, const std::string& cmp, double threshold) {
    const bool ok = cmp == "<=" ? value <= threshold : value >= threshold;
    rules.push_back({rule, cmp, threshold, value, ok});
    return ok;
  }

  bool all_passed() const {
    for (const auto& r : rules)
      if (!r.passed) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j{{"name", name}, {"metrics", metrics}, {"datasets", datasets}};
    nlohmann::json rj = nlohmann::json::array();
    for (const auto& r : rules)
      rj.push_back({{"rule", r.name},
                    {"comparison", r.comparison},
                    {"threshold", r.threshold},
                    {"value", r.value},
                    {"passed", r.passed}});
    j["rules"] = rj;
    j["all_passed"] = all_passed();
    return j;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw ModelError("cannot write report: " + path.string());
    os << to_json().dump(2) << "\n";
  }
};

inline std::string hardware_descriptor() {
  std::string cpu = "unknown-cpu";
  std::ifstream is("/proc/cpuinfo");
  std::string line;
  while (std::getline(is, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto pos = line.find(':');
      if (pos != std::string::npos) cpu = line.substr(pos + 2);
      break;
    }
  }
  return cpu + " x" + std::to_string(std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Distance-field accuracy against the analytic oracle, split into the
// near-surface region (|d| < near_limit) and the far band (near_limit..far_limit).

struct SdfEvalOptions {
  int points = 50000;          // held-out query points per region
  double near_limit = 0.1;     // [m]
  double far_limit = 1.2;      // [m]
  std::uint64_t seed = 1234;
  int threads = 0;
};

inline EvalReport eval_sdf(const Engine& engine, const SdfEvalOptions& opts = {}) {
  if (opts.points <= 0) throw ModelError("eval_sdf: empty sample set");
  EvalReport report;
  report.name = "sdf-accuracy";
  report.datasets["eval_seed"] = opts.seed;
  report.datasets["points_per_region"] = opts.points;
  report.datasets["oracle"] = "analytic primitive distance";

  const RobotModel& model = engine.robot;
  // stratified draws: random in-limit configurations, points rejected into
  // each region by oracle distance
  struct Sample {
    Eigen::VectorXd q;
    Eigen::Vector3d p;
    double oracle;
  };
  std::vector<Sample> near_samples(opts.points), far_samples(opts.points);

  parallel_for_chunks(static_cast<std::size_t>(opts.points), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      auto rng = make_rng(opts.seed, 0xe5a10000ull + i);
      std::uniform_real_distribution<double> uni(0.0, 1.0);
      std::normal_distribution<double> gauss(0.0, 1.0);
      auto rand_config = [&] {
        Eigen::VectorXd qn(model.dof());
        for (int j = 0; j < model.dof(); ++j) qn[j] = uni(rng);
        return model.denormalize_config(qn);
      };
      auto rand_point = [&](double radius) {
        Eigen::Vector3d dir(gauss(rng), gauss(rng), gauss(rng));
        if (dir.norm() < 1e-12) dir = Eigen::Vector3d::UnitX();
        dir.normalize();
        return (radius * std::cbrt(uni(rng)) * dir + Eigen::Vector3d(0, 0, 0.4)).eval();
      };
      // near sample: rejection on |oracle| < near_limit
      for (;;) {
        Sample s;
        s.q = rand_config();
        const FrameSet f = forward_frames(model, s.q);
        s.p = rand_point(1.4);
        s.oracle = min_link_distance(model, f, s.p);
        if (std::abs(s.oracle) < opts.near_limit) {
          near_samples[i] = s;
          break;
        }
      }
      for (;;) {
        Sample s;
        s.q = rand_config();
        const FrameSet f = forward_frames(model, s.q);
        s.p = rand_point(2.2);
        s.oracle = min_link_distance(model, f, s.p);
        if (s.oracle >= opts.near_limit && s.oracle < opts.far_limit) {
          far_samples[i] = s;
          break;
        }
      }
    }
  }, opts.threads);

  auto rmse_of = [&](const std::vector<Sample>& samples) {
    std::vector<double> se(samples.size());
    parallel_for_chunks(samples.size(), [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const FrameSet f = forward_frames(model, samples[i].q);
        const double gamma = infer_gamma_single(engine.ensemble, model, f, samples[i].p);
        se[i] = (gamma - samples[i].oracle) * (gamma - samples[i].oracle);
      }
    }, opts.threads);
    double acc = 0.0;
    for (double v : se) acc += v;
    return std::sqrt(acc / static_cast<double>(se.size()));
  };

  const double near_rmse = rmse_of(near_samples);
  const double far_rmse = rmse_of(far_samples);
  report.add_metric("near_rmse_m", near_rmse, "oracle, |d| < 0.1 m");
  report.add_metric("far_rmse_m", far_rmse, "oracle, 0.1 m <= d < 1.2 m");
  report.add_note("reference",
                  "published near/far RMSE on the original mesh robot: 0.16 cm / 0.28 cm");
  report.check("near_rmse <= 0.5 cm", near_rmse, "<=", 0.005);
  report.check("far_rmse <= 1.0 cm", far_rmse, "<=", 0.010);
  return report;
}

// ---------------------------------------------------------------------------
// Self-collision classification at the D-based boundary (score >= mu - sigma
// counts as free).

inline EvalReport eval_selfcol(const Engine& engine,
                               const std::vector<SelfCollisionSample>& test_set,
                               const std::string& dataset_id = "test") {
  EvalReport report;
  report.name = "selfcol-classification";
  report.datasets["dataset"] = dataset_id;
  report.datasets["count"] = test_set.size();
  report.datasets["boundary"] = "score threshold mu - sigma";
  const ClassifierMetrics m =
      evaluate_classifier(engine.svm, test_set, engine.self_collision_threshold());
  report.add_metric("accuracy", m.accuracy, dataset_id);
  if (m.tpr_defined)
    report.add_metric("tpr", m.tpr, dataset_id);
  else
    report.add_note("tpr", "n/a (no positive examples)");
  if (m.tnr_defined)
    report.add_metric("tnr", m.tnr, dataset_id);
  else
    report.add_note("tnr", "n/a (no negative examples)");
  report.add_note("reference", "published test metrics: Acc 0.97, TPR 0.88, TNR 0.98");
  report.check("accuracy >= 0.95", m.accuracy, ">=", 0.95);
  if (m.tnr_defined) report.check("tnr >= 0.95", m.tnr, ">=", 0.95);
  if (m.tpr_defined) report.check("tpr >= 0.80", m.tpr, ">=", 0.80);
  return report;
}

// ---------------------------------------------------------------------------
// Batched-query throughput: median wall time per batch, per-point scaling.

struct BenchOptions {
  std::vector<int> batch_sizes{1, 100, 1000, 10000};
  int repetitions = 30;
  int warmup = 3;
  std::uint64_t seed = 99;
  int threads = 0;
};

inline EvalReport cmd_bench(const Engine& engine, const BenchOptions& opts = {}) {
  if (opts.repetitions < 2)
    throw ModelError("bench: need at least 2 repetitions for a median");
  EvalReport report;
  report.name = "query-throughput";
  report.datasets["hardware"] = hardware_descriptor();
  report.datasets["repetitions"] = opts.repetitions;
  report.add_note("reference",
                  "published batch medians on GPU hardware: 0.98/1.02/1.05/1.21 ms "
                  "for 1/100/1000/10000 points");

  auto rng = make_rng(opts.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Eigen::VectorXd q(engine.robot.dof());
  for (int j = 0; j < engine.robot.dof(); ++j) q[j] = 0.3 * uni(rng);

  double per_point_first = 0.0, per_point_last = 0.0;
  for (std::size_t bi = 0; bi < opts.batch_sizes.size(); ++bi) {
    const int batch = opts.batch_sizes[bi];
    std::vector<Eigen::Vector3d> pts(batch);
    for (auto& p : pts)
      p = Eigen::Vector3d(1.2 * uni(rng), 1.2 * uni(rng), 0.4 + 0.8 * uni(rng));
    QueryOptions qopts;
    qopts.threads = opts.threads;
    for (int w = 0; w < opts.warmup; ++w) collision_distance(engine, q, pts, qopts);
    std::vector<double> times(opts.repetitions);
    for (int r = 0; r < opts.repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const QueryResult res = collision_distance(engine, q, pts, qopts);
      times[r] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      (void)res;
    }
    std::sort(times.begin(), times.end());
    const double median = times[times.size() / 2];
    const double per_point = median / batch;
    report.add_metric("batch_" + std::to_string(batch) + "_ms", median * 1e3, "measured");
    report.add_metric("per_point_" + std::to_string(batch) + "_us", per_point * 1e6, "measured");
    if (bi == 0) per_point_first = per_point;
    if (bi + 1 == opts.batch_sizes.size()) per_point_last = per_point;
  }
  report.check("per-point latency ratio (largest/smallest batch) <= 0.05",
               per_point_last / per_point_first, "<=", 0.05);
  return report;
}

}  // namespace sdfsc
