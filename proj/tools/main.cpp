// Command-line front end: data generation, training, queries, evaluation
// suites, planning, and simulation. Every evaluation verb writes a
// machine-readable report and exits nonzero when a declared rule fails.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

#include "sdfsc/harness.hpp"
#include "sdfsc/model_io.hpp"

namespace fs = std::filesystem;
using namespace sdfsc;

namespace {

Eigen::VectorXd parse_config(const std::string& text, int n) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) vals.push_back(std::stod(item));
  if (static_cast<int>(vals.size()) != n)
    throw ModelError("expected " + std::to_string(n) + " joint values, got " +
                     std::to_string(vals.size()));
  return Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
}

std::vector<Eigen::Vector3d> read_points_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ModelError("cannot open point file: " + path.string());
  std::vector<Eigen::Vector3d> pts;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0])))
      continue;
    Eigen::Vector3d p;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.x(), &p.y(), &p.z()) == 3) pts.push_back(p);
  }
  return pts;
}

std::string link_file_name(int k) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "link_%03d.bin", k);
  return buf;
}

int finish(const EvalReport& report, const fs::path& out) {
  if (!out.empty()) report.write(out);
  std::cout << report.to_json().dump(2) << "\n";
  return report.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sdfsc: learned whole-arm distance fields fused with a self-collision boundary"};
  app.require_subcommand(1);

  std::string robot_path;
  std::string out_path;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--robot", robot_path, "robot model file (JSON)")->envname("SDFSC_ROBOT");
  app.add_option("--out", out_path, "output file or directory");
  app.add_option("--seed", seed, "master random seed");
  app.add_option("--threads", threads, "worker threads (0 = hardware)");

  // ---- pipeline ----------------------------------------------------------
  auto* cmd_pipeline = app.add_subcommand("pipeline", "run the full build: data, nets, svm, engine");
  std::string scale = "desk";
  cmd_pipeline->add_option("--scale", scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));

  // ---- gen-data ----------------------------------------------------------
  auto* cmd_gen = app.add_subcommand("gen-data", "sample distance and self-collision datasets");
  std::string gen_kind = "sdf";
  SdfDatasetConfig gen_cfg;
  SelfCollisionCounts gen_counts;
  cmd_gen->add_option("--kind", gen_kind, "sdf or selfcol")->check(CLI::IsMember({"sdf", "selfcol"}));
  cmd_gen->add_option("--per-link", gen_cfg.per_link_count, "samples per link (sdf)");
  cmd_gen->add_option("--near-fraction", gen_cfg.near_fraction, "near-surface share (sdf)");
  cmd_gen->add_option("--near-band", gen_cfg.near_band, "near band [m] (sdf)");
  cmd_gen->add_option("--far-radius", gen_cfg.far_radius, "far ball radius [m] (sdf)");
  cmd_gen->add_option("--train", gen_counts.train, "train count (selfcol)");
  cmd_gen->add_option("--val", gen_counts.val, "validation count (selfcol)");
  cmd_gen->add_option("--test", gen_counts.test, "test count (selfcol)");

  // ---- train-sdf ---------------------------------------------------------
  auto* cmd_train_sdf = app.add_subcommand("train-sdf", "train the per-link distance nets");
  std::string data_dir;
  TrainHyper hyper;
  cmd_train_sdf->add_option("--data", data_dir, "dataset directory")->required();
  cmd_train_sdf->add_option("--hidden", hyper.arch.hidden_nodes, "hidden nodes per layer");
  cmd_train_sdf->add_option("--layers", hyper.arch.hidden_layers, "hidden layer count");
  cmd_train_sdf->add_option("--epochs", hyper.epochs, "training epochs");
  cmd_train_sdf->add_option("--batch", hyper.batch_size, "minibatch size");
  cmd_train_sdf->add_option("--lr", hyper.lr, "learning rate");

  // ---- train-svm ---------------------------------------------------------
  auto* cmd_train_svm = app.add_subcommand("train-svm", "train the self-collision boundary");
  std::string svm_data_dir;
  SvmTrainOptions svm_opts;
  cmd_train_svm->add_option("--data", svm_data_dir, "dataset directory")->required();
  cmd_train_svm->add_option("--C", svm_opts.C, "penalty parameter");
  cmd_train_svm->add_option("--gamma", svm_opts.gamma, "RBF kernel width");
  cmd_train_svm->add_option("--tol", svm_opts.tol, "KKT stopping gap");

  // ---- query -------------------------------------------------------------
  auto* cmd_query = app.add_subcommand("query", "fused distance at a configuration");
  std::string engine_dir, q_text, points_path;
  cmd_query->add_option("--engine", engine_dir, "engine directory")->required();
  cmd_query->add_option("--q", q_text, "joint configuration, comma-separated radians")->required();
  cmd_query->add_option("--points", points_path, "CSV point file (x,y,z)")->required();

  // ---- reconstruct -------------------------------------------------------
  auto* cmd_reconstruct = app.add_subcommand("reconstruct", "isosurface shell point cloud (PLY)");
  std::string rec_engine, rec_q;
  double rec_level = 0.0;
  int rec_res = 48;
  std::vector<double> rec_lower{-1.0, -1.0, -0.2}, rec_upper{1.0, 1.0, 1.4};
  cmd_reconstruct->add_option("--engine", rec_engine)->required();
  cmd_reconstruct->add_option("--q", rec_q)->required();
  cmd_reconstruct->add_option("--level", rec_level, "isosurface level [m]");
  cmd_reconstruct->add_option("--res", rec_res, "grid resolution per axis");
  cmd_reconstruct->add_option("--lower", rec_lower, "grid lower corner")->expected(3);
  cmd_reconstruct->add_option("--upper", rec_upper, "grid upper corner")->expected(3);

  // ---- eval-sdf ----------------------------------------------------------
  auto* cmd_eval_sdf = app.add_subcommand("eval-sdf", "distance accuracy vs the analytic oracle");
  std::string es_engine;
  SdfEvalOptions es_opts;
  cmd_eval_sdf->add_option("--engine", es_engine)->required();
  cmd_eval_sdf->add_option("--points", es_opts.points, "points per region");

  // ---- eval-selfcol ------------------------------------------------------
  auto* cmd_eval_sc = app.add_subcommand("eval-selfcol", "boundary classification metrics");
  std::string sc_engine, sc_data;
  cmd_eval_sc->add_option("--engine", sc_engine)->required();
  cmd_eval_sc->add_option("--data", sc_data, "test set bin file (defaults to a fresh draw)");
  int sc_count = 10000;
  cmd_eval_sc->add_option("--count", sc_count, "fresh test draw size when --data is absent");

  // ---- bench -------------------------------------------------------------
  auto* cmd_bench_app = app.add_subcommand("bench", "batched query throughput");
  std::string bench_engine;
  BenchOptions bench_opts;
  cmd_bench_app->add_option("--engine", bench_engine)->required();
  cmd_bench_app->add_option("--reps", bench_opts.repetitions, "repetitions per batch size");

  // ---- plan --------------------------------------------------------------
  auto* cmd_plan = app.add_subcommand("plan", "collision-free trajectory optimization");
  std::string plan_engine, plan_scenario;
  cmd_plan->add_option("--engine", plan_engine)->required();
  cmd_plan->add_option("--scenario", plan_scenario, "scenario JSON")->required();

  // ---- simulate ----------------------------------------------------------
  auto* cmd_sim = app.add_subcommand("simulate", "reactive control in a dynamic scene");
  std::string sim_engine, sim_scenario, sim_controller = "neoss";
  cmd_sim->add_option("--engine", sim_engine)->required();
  cmd_sim->add_option("--scenario", sim_scenario)->required();
  cmd_sim->add_option("--controller", sim_controller)->check(CLI::IsMember({"neo", "neoss"}));

  // ---- compare -----------------------------------------------------------
  auto* cmd_compare = app.add_subcommand("compare", "optimized pipeline vs the sampling baseline");
  std::string cp_engine, cp_scenes;
  CompareOptions cp_opts;
  cmd_compare->add_option("--engine", cp_engine)->required();
  cmd_compare->add_option("--scenes", cp_scenes, "directory of scenario JSON files")->required();
  cmd_compare->add_option("--seeds", cp_opts.seeds, "seeded runs per scene");
  cmd_compare->add_option("--rrt-star-iters", cp_opts.rrt_star_iterations, "baseline budget");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_pipeline) {
      if (robot_path.empty() || out_path.empty())
        throw ModelError("pipeline needs --robot and --out");
      const RobotModel model = load_robot_model(robot_path);
      PipelineConfig cfg;
      cfg.scale = scale == "desk" ? PipelineScale::Desk : PipelineScale::Paper;
      cfg.seed = seed;
      cfg.threads = threads;
      const PipelineResult result = run_pipeline(model, out_path, cfg);
      std::cout << result.report.dump(2) << "\n";
      return 0;
    }

    if (*cmd_gen) {
      if (robot_path.empty() || out_path.empty())
        throw ModelError("gen-data needs --robot and --out");
      const RobotModel model = load_robot_model(robot_path);
      fs::create_directories(out_path);
      if (gen_kind == "sdf") {
        const auto data = sample_sdf_dataset(model, gen_cfg, seed, threads);
        for (int k = 1; k <= model.link_count(); ++k)
          write_sdf_dataset_file(fs::path(out_path) / link_file_name(k), data[k - 1], k, seed,
                                 gen_cfg);
        std::cout << "wrote " << model.link_count() << " link datasets to " << out_path << "\n";
      } else {
        const auto ds = sample_selfcollision_dataset(model, gen_counts, seed, threads);
        write_selfcollision_file(fs::path(out_path) / "sc_train.bin", ds.train, model.dof(), seed);
        write_selfcollision_file(fs::path(out_path) / "sc_val.bin", ds.val, model.dof(), seed);
        write_selfcollision_file(fs::path(out_path) / "sc_test.bin", ds.test, model.dof(), seed);
        std::cout << "label balance: free " << ds.free_count << ", colliding "
                  << ds.colliding_count << "\n";
      }
      return 0;
    }

    if (*cmd_train_sdf) {
      if (robot_path.empty() || out_path.empty())
        throw ModelError("train-sdf needs --robot and --out");
      const RobotModel model = load_robot_model(robot_path);
      std::vector<std::vector<SdfSample>> data;
      for (int k = 1; k <= model.link_count(); ++k)
        data.push_back(read_sdf_dataset_file(fs::path(data_dir) / link_file_name(k)));
      hyper.seed = seed;
      const SdfEnsemble ensemble = train_ensemble(model, data, hyper, threads);
      save_ensemble(out_path, ensemble);
      std::cout << "final per-link RMSE:";
      for (double r : ensemble.final_rmse) std::cout << " " << r;
      std::cout << "\n";
      return 0;
    }

    if (*cmd_train_svm) {
      if (out_path.empty()) throw ModelError("train-svm needs --out");
      const auto train = read_selfcollision_file(fs::path(svm_data_dir) / "sc_train.bin");
      const auto val = read_selfcollision_file(fs::path(svm_data_dir) / "sc_val.bin");
      const SvmModel model = train_svm(train, svm_opts);
      const ScoreStats stats = fit_score_stats(model, val);
      const ProcessingParams pparams = fit_processing_params(stats);
      save_svm(out_path, model, stats, pparams);
      std::cout << "support vectors: " << model.sv_count() << ", mu " << stats.mu << ", sigma "
                << stats.sigma << ", k " << pparams.k << ", b0 " << pparams.b0 << "\n";
      return 0;
    }

    if (*cmd_query) {
      const Engine engine = load_engine(engine_dir);
      const Eigen::VectorXd q = parse_config(q_text, engine.robot.dof());
      const auto pts = read_points_csv(points_path);
      QueryOptions qopts;
      qopts.threads = threads;
      const QueryResult res = collision_distance(engine, q, pts, qopts);
      std::ostream* os = &std::cout;
      std::ofstream file;
      if (!out_path.empty()) {
        file.open(out_path);
        os = &file;
      }
      (*os) << "x,y,z,D,link\n";
      os->precision(9);
      for (std::size_t i = 0; i < pts.size(); ++i)
        (*os) << pts[i].x() << "," << pts[i].y() << "," << pts[i].z() << "," << res.D[i] << ","
              << res.link[i] << "\n";
      std::cerr << "S(q) = " << res.S << " (" << to_string(res.region) << "), P = " << res.P
                << ", min D = " << res.min_D << "\n";
      return 0;
    }

    if (*cmd_reconstruct) {
      const Engine engine = load_engine(rec_engine);
      const Eigen::VectorXd q = parse_config(rec_q, engine.robot.dof());
      IsosurfaceGrid grid;
      grid.lower = Eigen::Vector3d(rec_lower[0], rec_lower[1], rec_lower[2]);
      grid.upper = Eigen::Vector3d(rec_upper[0], rec_upper[1], rec_upper[2]);
      grid.resolution = rec_res;
      const auto cloud = reconstruct_isosurface(engine, q, rec_level, grid, threads);
      if (out_path.empty()) throw ModelError("reconstruct needs --out FILE.ply");
      write_ply(out_path, cloud);
      std::cout << "wrote " << cloud.size() << " shell points to " << out_path << "\n";
      return 0;
    }

    if (*cmd_eval_sdf) {
      const Engine engine = load_engine(es_engine);
      es_opts.seed = seed ? seed : es_opts.seed;
      es_opts.threads = threads;
      return finish(eval_sdf(engine, es_opts), out_path);
    }

    if (*cmd_eval_sc) {
      const Engine engine = load_engine(sc_engine);
      std::vector<SelfCollisionSample> test;
      std::string dataset_id;
      if (!sc_data.empty()) {
        test = read_selfcollision_file(sc_data);
        dataset_id = sc_data;
      } else {
        SelfCollisionCounts counts{1, 1, sc_count};
        test = sample_selfcollision_dataset(engine.robot, counts,
                                            mix_seed(seed ? seed : 7, 0x7e57ull), threads)
                   .test;
        dataset_id = "fresh draw (" + std::to_string(sc_count) + " configs)";
      }
      return finish(eval_selfcol(engine, test, dataset_id), out_path);
    }

    if (*cmd_bench_app) {
      const Engine engine = load_engine(bench_engine);
      bench_opts.threads = threads;
      return finish(cmd_bench(engine, bench_opts), out_path);
    }

    if (*cmd_plan) {
      const Engine engine = load_engine(plan_engine);
      const TrajScenario scene = load_traj_scenario(plan_scenario);
      if (scene.robot.name != engine.robot.name)
        std::cerr << "warning: scenario robot '" << scene.robot.name
                  << "' differs from engine robot '" << engine.robot.name << "'\n";
      const PlanRunResult run = plan_with_engine(engine, scene.problem, seed);
      const fs::path prefix = out_path.empty() ? fs::path("plan") : fs::path(out_path);
      // trajectory CSV: t, q1..qn, D_min, S
      {
        std::ofstream os(prefix.string() + "_trajectory.csv");
        os << "t";
        for (int j = 0; j < engine.robot.dof(); ++j) os << ",q" << (j + 1);
        os << ",D_min,S\n";
        os.precision(10);
        std::vector<Eigen::Vector3d> pts(scene.problem.obstacles.size());
        for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = scene.problem.obstacles[i].p;
        for (int t = 0; t < run.trajectory.length(); ++t) {
          const QueryResult res = collision_distance(engine, run.trajectory.at(t), pts);
          os << t;
          for (int j = 0; j < engine.robot.dof(); ++j) os << "," << run.trajectory.at(t)[j];
          os << "," << (res.D.size() ? res.min_D : std::numeric_limits<double>::infinity())
             << "," << res.S << "\n";
        }
      }
      nlohmann::json report{{"cost", run.cost},
                            {"seed_cost", run.report.seed_cost},
                            {"success", run.planned && run.oracle_valid},
                            {"planned", run.planned},
                            {"oracle_valid", run.oracle_valid},
                            {"violations", run.report.max_violation},
                            {"wall_time", run.wall_time_s},
                            {"failure", run.failure}};
      std::ofstream os(prefix.string() + "_report.json");
      os << report.dump(2) << "\n";
      std::cout << report.dump(2) << "\n";
      return run.planned && run.oracle_valid ? 0 : 1;
    }

    if (*cmd_sim) {
      const Engine engine = load_engine(sim_engine);
      ReactiveScenario scenario = load_reactive_scenario(sim_scenario);
      if (seed) scenario.seed = seed;
      const ControllerKind kind =
          sim_controller == "neoss" ? ControllerKind::NeoSS : ControllerKind::Neo;
      const SimResult result = simulate_scenario(engine, scenario, kind);
      const fs::path prefix = out_path.empty() ? fs::path("simulate") : fs::path(out_path);
      write_trace_csv(prefix.string() + "_trace.csv", result);
      {
        std::ofstream os(prefix.string() + "_summary.json");
        os << summary_json(result).dump(2) << "\n";
      }
      std::cout << summary_json(result).dump(2) << "\n";
      return result.outcome == SimOutcome::Success ? 0 : 1;
    }

    if (*cmd_compare) {
      const Engine engine = load_engine(cp_engine);
      std::vector<TrajScenario> scenes;
      for (const auto& entry : fs::directory_iterator(cp_scenes))
        if (entry.path().extension() == ".json") scenes.push_back(load_traj_scenario(entry.path()));
      std::sort(scenes.begin(), scenes.end(),
                [](const TrajScenario& a, const TrajScenario& b) { return a.name < b.name; });
      return finish(compare_planners(engine, scenes, cp_opts), out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
