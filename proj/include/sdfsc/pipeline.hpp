#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "sdfsc/engine.hpp"
#include "sdfsc/eval.hpp"

namespace sdfsc {

enum class PipelineScale { Desk, Paper };

/// The end-to-end build: sample distances, train the per-link nets, sample
/// and label configurations, train the boundary classifier, fit the score
/// statistics and the processing map, assemble and persist the engine.
struct PipelineConfig {
  PipelineScale scale = PipelineScale::Desk;
  std::uint64_t seed = 0;
  int threads = 0;

  SdfDatasetConfig sdf_cfg() const {
    SdfDatasetConfig cfg;
    if (scale == PipelineScale::Desk) {
      cfg.per_link_count = 200000;
      cfg.near_fraction = 0.7;
      cfg.near_band = 0.05;
      cfg.far_radius = 2.6;  // covers every query the evaluation band can pose
    } else {
      cfg.per_link_count = 50000000;
      cfg.near_fraction = 0.7;
      cfg.near_band = 0.05;
      cfg.far_radius = 2.6;
    }
    return cfg;
  }
  SelfCollisionCounts sc_counts() const {
    if (scale == PipelineScale::Desk) return {20000, 5000, 10000};
    return {100000, 30000, 50000};
  }
  TrainHyper train_hyper() const {
    TrainHyper h;
    h.epochs = 100;
    h.batch_size = 256;
    h.seed = seed;
    return h;
  }
  SvmTrainOptions svm_options() const {
    SvmTrainOptions o;
    o.C = 50.0;
    o.gamma = 1.0;
    o.tol = 1e-3;
    return o;
  }
};

struct PipelineResult {
  Engine engine;
  nlohmann::json report;
};

namespace detail {

inline std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
    for (std::streamsize i = 0; i < is.gcount(); ++i)
      h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ull;
    if (!is) break;
  }
  return h;
}

}  // namespace detail

inline PipelineResult run_pipeline(const RobotModel& model, const std::filesystem::path& out_dir,
                                   const PipelineConfig& cfg = {}) {
  PipelineResult result;
  auto& report = result.report;
  report["robot"] = model.name;
  report["scale"] = cfg.scale == PipelineScale::Desk ? "desk" : "paper";
  report["seed"] = cfg.seed;
  const auto t_begin = std::chrono::steady_clock::now();
  std::string last_stage = "start";
  auto stage_time = [&, last = t_begin](const char* stage) mutable {
    const auto now = std::chrono::steady_clock::now();
    report["stage_seconds"][stage] = std::chrono::duration<double>(now - last).count();
    last = now;
    last_stage = stage;
  };

  Engine& engine = result.engine;
  engine.robot = model;

  try {
    const auto sdf_data = sample_sdf_dataset(model, cfg.sdf_cfg(), cfg.seed, cfg.threads);
    stage_time("gen-sdf-data");
    std::size_t total = 0;
    for (const auto& link : sdf_data) total += link.size();
    report["sdf_samples"] = total;

    engine.ensemble = train_ensemble(model, sdf_data, cfg.train_hyper(), cfg.threads);
    stage_time("train-sdf");
    report["link_rmse"] = engine.ensemble.final_rmse;

    const SelfCollisionDataset sc =
        sample_selfcollision_dataset(model, cfg.sc_counts(), mix_seed(cfg.seed, 0x5cdull),
                                     cfg.threads);
    sc.require_both_classes();
    stage_time("gen-sc-data");
    report["sc_balance"] = {{"free", sc.free_count}, {"colliding", sc.colliding_count}};

    engine.svm = train_svm(sc.train, cfg.svm_options());
    stage_time("train-svm");
    report["support_vectors"] = engine.svm.sv_count();

    engine.stats = fit_score_stats(engine.svm, sc.val);
    engine.pparams = fit_processing_params(engine.stats);
    stage_time("fit-calibration");
    report["score_stats"] = {{"mu", engine.stats.mu}, {"sigma", engine.stats.sigma}};
    report["processing"] = {{"k", engine.pparams.k}, {"b0", engine.pparams.b0}};

    engine.validate();
    save_engine(out_dir, engine);
    stage_time("save-engine");

    // classifier quality on the held-out split, recorded alongside the build
    const ClassifierMetrics m =
        evaluate_classifier(engine.svm, sc.test, engine.self_collision_threshold());
    report["test_metrics"] = {{"accuracy", m.accuracy}, {"tpr", m.tpr}, {"tnr", m.tnr}};

    std::uint64_t h = 1469598103934665603ull;
    for (const char* f : {"robot.json", "sdf.bin", "svm.bin", "engine.json"})
      h ^= detail::fnv1a_file(out_dir / f);
    char hex[32];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    report["engine_hash"] = hex;
  } catch (const std::exception& e) {
    throw SolveError("pipeline aborted (last completed stage: " + last_stage + "): " + e.what());
  }

  report["total_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
  {
    std::ofstream os(out_dir / "pipeline_report.json");
    os << report.dump(2) << "\n";
  }
  return result;
}

}  // namespace sdfsc
