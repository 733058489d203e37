#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <vector>

#include <json.hpp>

#include "sdfsc/common.hpp"
#include "sdfsc/mlp.hpp"
#include "sdfsc/robot.hpp"

namespace sdfsc {

/// K trained per-link nets, min-reduced at query time. Immutable and
/// shareable across threads once built.
struct SdfEnsemble {
  std::vector<LinkSdfNet> nets;       // nets[k-1] serves link frame k
  std::vector<double> final_rmse;     // held-out RMSE per link at train time
  std::uint64_t seed = 0;
  int epochs = 0;

  int link_count() const { return static_cast<int>(nets.size()); }

  void check_matches(const RobotModel& model) const {
    if (link_count() != model.link_count())
      throw ModelError("ensemble has " + std::to_string(link_count()) + " nets but model '" +
                       model.name + "' has " + std::to_string(model.link_count()) + " links");
  }
};

struct GammaResult {
  Eigen::VectorXd gamma;        // min over links, per point
  std::vector<int> argmin;      // 1-based link index, ties -> lowest
};

// Whole-arm learned distance for a batch of world points. Each point is
// evaluated independently in a fixed per-point arithmetic order, so a batch
// call, a per-point loop, and any worker count all produce identical bits.
inline GammaResult infer_gamma(const SdfEnsemble& ensemble, const RobotModel& model,
                               const Eigen::VectorXd& q,
                               std::span<const Eigen::Vector3d> points, int threads = 0) {
  ensemble.check_matches(model);
  const FrameSet frames = forward_frames(model, q);
  const int K = model.link_count();
  GammaResult res;
  res.gamma.resize(points.size());
  res.argmin.resize(points.size());
  parallel_for_chunks(points.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_k = 0;
      for (int k = 1; k <= K; ++k) {
        const double v = ensemble.nets[k - 1].value(to_link_frame(frames, points[i], k));
        if (v < best) {
          best = v;
          best_k = k;
        }
      }
      res.gamma[i] = best;
      res.argmin[i] = best_k;
    }
  }, threads);
  return res;
}

inline double infer_gamma_single(const SdfEnsemble& ensemble, const RobotModel& model,
                                 const FrameSet& frames, const Eigen::Vector3d& p,
                                 int* argmin_link = nullptr) {
  const int K = model.link_count();
  double best = std::numeric_limits<double>::infinity();
  int best_k = 0;
  for (int k = 1; k <= K; ++k) {
    const double v = ensemble.nets[k - 1].value(to_link_frame(frames, p, k));
    if (v < best) {
      best = v;
      best_k = k;
    }
  }
  if (argmin_link) *argmin_link = best_k;
  return best;
}

struct GammaGradient {
  double gamma = 0.0;
  int link = 0;               // argmin branch the gradient follows
  Eigen::VectorXd dq;         // dGamma/dq, size n
  Eigen::Vector3d dp;         // dGamma/dp
};

// Gradient of the argmin branch: backpropagate through the winning net, then
// chain through p_k(q) = R_k^T (p - t_k) via the analytic frame derivatives.
inline GammaGradient gamma_gradient(const SdfEnsemble& ensemble, const RobotModel& model,
                                    const Eigen::VectorXd& q, const Eigen::Vector3d& p) {
  ensemble.check_matches(model);
  const FrameSet frames = forward_frames(model, q);
  GammaGradient out;
  out.gamma = infer_gamma_single(ensemble, model, frames, p, &out.link);
  const int k = out.link;

  Eigen::Vector3d g_pk;
  ensemble.nets[k - 1].value_and_gradient(to_link_frame(frames, p, k), g_pk);
  const Eigen::Matrix3d R = frames.link(k).linear();
  const Eigen::Vector3d t = frames.link(k).translation();
  out.dp = R * g_pk;

  const FrameDerivatives derivs = frame_derivatives(model, q);
  const int n = model.dof();
  out.dq.resize(n);
  for (int j = 0; j < n; ++j) {
    const Eigen::Matrix3d dR = derivs.rotation(k, j);
    const Eigen::Vector3d dt = derivs.translation(k, j);
    const Eigen::Vector3d dpk = dR.transpose() * (p - t) - R.transpose() * dt;
    out.dq[j] = g_pk.dot(dpk);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file: JSON header + float32 weight blob per net.

inline void save_ensemble(const std::filesystem::path& path, const SdfEnsemble& ensemble) {
  nlohmann::json header;
  header["links"] = ensemble.link_count();
  header["seed"] = ensemble.seed;
  header["epochs"] = ensemble.epochs;
  header["rmse"] = ensemble.final_rmse;
  if (!ensemble.nets.empty()) {
    header["arch"] = {{"hidden_layers", ensemble.nets[0].arch().hidden_layers},
                      {"hidden_nodes", ensemble.nets[0].arch().hidden_nodes}};
  }
  const std::string head = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelError("cannot write ensemble file: " + path.string());
  const std::uint64_t head_len = head.size();
  os.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  os.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& net : ensemble.nets) {
    for (std::size_t l = 0; l < net.weights().size(); ++l) {
      const Eigen::MatrixXf W = net.weights()[l].cast<float>();
      const Eigen::VectorXf b = net.biases()[l].cast<float>();
      os.write(reinterpret_cast<const char*>(W.data()), sizeof(float) * W.size());
      os.write(reinterpret_cast<const char*>(b.data()), sizeof(float) * b.size());
    }
  }
}

inline SdfEnsemble load_ensemble(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("cannot open ensemble file: " + path.string());
  std::uint64_t head_len = 0;
  is.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  std::string head(head_len, '\0');
  is.read(head.data(), static_cast<std::streamsize>(head_len));
  nlohmann::json header = nlohmann::json::parse(head);

  SdfEnsemble ensemble;
  ensemble.seed = header.at("seed").get<std::uint64_t>();
  ensemble.epochs = header.at("epochs").get<int>();
  ensemble.final_rmse = header.at("rmse").get<std::vector<double>>();
  MlpArchitecture arch;
  arch.hidden_layers = header.at("arch").at("hidden_layers").get<int>();
  arch.hidden_nodes = header.at("arch").at("hidden_nodes").get<int>();
  const int K = header.at("links").get<int>();
  const auto sizes = arch.layer_sizes();
  for (int k = 0; k < K; ++k) {
    std::vector<Eigen::MatrixXd> W(sizes.size() - 1);
    std::vector<Eigen::VectorXd> b(sizes.size() - 1);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      Eigen::MatrixXf Wf(sizes[l + 1], sizes[l]);
      Eigen::VectorXf bf(sizes[l + 1]);
      is.read(reinterpret_cast<char*>(Wf.data()), sizeof(float) * Wf.size());
      is.read(reinterpret_cast<char*>(bf.data()), sizeof(float) * bf.size());
      W[l] = Wf.cast<double>();
      b[l] = bf.cast<double>();
    }
    if (!is) throw ModelError("ensemble file truncated: " + path.string());
    ensemble.nets.emplace_back(arch, std::move(W), std::move(b));
  }
  return ensemble;
}

// Trains all K nets, one substream per link; links may train concurrently.
inline SdfEnsemble train_ensemble(const RobotModel& model,
                                  const std::vector<std::vector<SdfSample>>& datasets,
                                  const TrainHyper& hyper, int threads = 0) {
  const int K = model.link_count();
  if (static_cast<int>(datasets.size()) != K)
    throw ModelError("train_ensemble: dataset count does not match link count");
  SdfEnsemble ensemble;
  ensemble.nets.resize(K);
  ensemble.final_rmse.resize(K);
  ensemble.seed = hyper.seed;
  ensemble.epochs = hyper.epochs;
  parallel_for_chunks(K, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      TrainHyper h = hyper;
      h.seed = mix_seed(hyper.seed, 0x7e000000ull + k);
      TrainResult r = train_link_net(datasets[k], h);
      ensemble.nets[k] = std::move(r.net);
      ensemble.final_rmse[k] = r.final_rmse;
    }
  }, threads, 1);
  return ensemble;
}

}  // namespace sdfsc
