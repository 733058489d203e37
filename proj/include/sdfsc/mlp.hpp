#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sdfsc/common.hpp"
#include "sdfsc/dataset.hpp"

namespace sdfsc {

struct MlpArchitecture {
  int hidden_layers = 2;
  int hidden_nodes = 64;

  std::vector<int> layer_sizes() const {
    std::vector<int> sizes{3};
    for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden_nodes);
    sizes.push_back(1);
    return sizes;
  }
};

/// One per-link distance network: rectifier hidden layers, identity output.
/// Weights are float32-representable; evaluation runs in double so query-time
/// derivatives are smooth, and serialization round-trips bit-exactly.
class LinkSdfNet {
public:
  LinkSdfNet() = default;
  LinkSdfNet(MlpArchitecture arch, std::vector<Eigen::MatrixXd> W, std::vector<Eigen::VectorXd> b)
      : arch_(arch), W_(std::move(W)), b_(std::move(b)) {}

  const MlpArchitecture& arch() const { return arch_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }

  bool finite() const {
    for (const auto& W : W_)
      if (!W.allFinite()) return false;
    for (const auto& b : b_)
      if (!b.allFinite()) return false;
    return true;
  }

  double value(const Eigen::Vector3d& p) const {
    Eigen::VectorXd a = p;
    for (std::size_t l = 0; l + 1 < W_.size(); ++l)
      a = (W_[l] * a + b_[l]).cwiseMax(0.0);
    return (W_.back() * a + b_.back())(0);
  }

  // Smallest |pre-activation| over all hidden units; small values mean the
  // point sits next to a rectifier kink where one-sided derivatives disagree.
  double preactivation_margin(const Eigen::Vector3d& p) const {
    double margin = std::numeric_limits<double>::infinity();
    Eigen::VectorXd a = p;
    for (std::size_t l = 0; l + 1 < W_.size(); ++l) {
      const Eigen::VectorXd z = W_[l] * a + b_[l];
      margin = std::min(margin, z.cwiseAbs().minCoeff());
      a = z.cwiseMax(0.0);
    }
    return margin;
  }

  // Value plus the input gradient of the scalar output. At rectifier kinks the
  // active-side derivative is used (relu'(0) = 0).
  double value_and_gradient(const Eigen::Vector3d& p, Eigen::Vector3d& grad) const {
    const std::size_t L = W_.size();
    std::vector<Eigen::VectorXd> acts(L);  // post-activation of each hidden layer
    Eigen::VectorXd a = p;
    for (std::size_t l = 0; l + 1 < L; ++l) {
      a = (W_[l] * a + b_[l]).cwiseMax(0.0);
      acts[l] = a;
    }
    const double y = (W_.back() * a + b_.back())(0);
    Eigen::VectorXd delta = W_.back().transpose().col(0);
    for (std::size_t l = L - 1; l-- > 0;) {
      delta = ((acts[l].array() > 0.0).cast<double>() * delta.array()).matrix();
      delta = W_[l].transpose() * delta;
    }
    grad = delta;
    return y;
  }

private:
  MlpArchitecture arch_;
  std::vector<Eigen::MatrixXd> W_;
  std::vector<Eigen::VectorXd> b_;
};

struct TrainHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 256;
  int epochs = 100;
  std::uint64_t seed = 0;
  MlpArchitecture arch;
};

struct TrainResult {
  LinkSdfNet net;
  std::vector<double> rmse_history;  // held-out RMSE after each epoch
  double final_rmse = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

// Training state in float32: the batched passes run 2x faster and the final
// weights are snapped to float anyway for exact file round-trips.
struct MlpTrainState {
  std::vector<Eigen::MatrixXf> W, mW, vW;
  std::vector<Eigen::VectorXf> b, mb, vb;

  void init(const MlpArchitecture& arch, std::mt19937_64& rng) {
    const auto sizes = arch.layer_sizes();
    const std::size_t L = sizes.size() - 1;
    W.resize(L); b.resize(L); mW.resize(L); vW.resize(L); mb.resize(L); vb.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
      const int fan_in = sizes[l], fan_out = sizes[l + 1];
      const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
      std::uniform_real_distribution<float> u(-bound, bound);
      W[l].resize(fan_out, fan_in);
      for (int c = 0; c < fan_in; ++c)
        for (int r = 0; r < fan_out; ++r) W[l](r, c) = u(rng);
      b[l] = Eigen::VectorXf::Zero(fan_out);
      mW[l] = Eigen::MatrixXf::Zero(fan_out, fan_in);
      vW[l] = Eigen::MatrixXf::Zero(fan_out, fan_in);
      mb[l] = Eigen::VectorXf::Zero(fan_out);
      vb[l] = Eigen::VectorXf::Zero(fan_out);
    }
  }

  LinkSdfNet snap(const MlpArchitecture& arch) const {
    std::vector<Eigen::MatrixXd> Wd(W.size());
    std::vector<Eigen::VectorXd> bd(b.size());
    for (std::size_t l = 0; l < W.size(); ++l) {
      Wd[l] = W[l].cast<double>();
      bd[l] = b[l].cast<double>();
    }
    return LinkSdfNet(arch, std::move(Wd), std::move(bd));
  }
};

inline float batch_rmse(const MlpTrainState& s, const Eigen::MatrixXf& X, const Eigen::RowVectorXf& y) {
  Eigen::MatrixXf a = X;
  for (std::size_t l = 0; l + 1 < s.W.size(); ++l)
    a = ((s.W[l] * a).colwise() + s.b[l]).cwiseMax(0.0f);
  const Eigen::RowVectorXf pred = (s.W.back() * a).colwise() + s.b.back();
  return std::sqrt((pred - y).array().square().mean());
}

}  // namespace detail

// Train one per-link net on its SDF samples. Deterministic given hyper.seed:
// fixed He-uniform init, fixed shuffle order, fixed 90/10 train/validation
// split on the shuffled data. Returns the per-epoch held-out RMSE.
inline TrainResult train_link_net(const std::vector<SdfSample>& samples, const TrainHyper& hyper) {
  if (samples.size() < 1000)
    throw ModelError("train_link_net: need at least 1000 samples, got " +
                     std::to_string(samples.size()));
  auto rng = make_rng(hyper.seed, 0x4d4c0001ull);
  detail::MlpTrainState state;
  state.init(hyper.arch, rng);

  // shuffled copy, last 10% held out
  std::vector<std::uint32_t> order(samples.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t val_count = samples.size() / 10;
  const std::size_t train_count = samples.size() - val_count;

  Eigen::MatrixXf Xtr(3, train_count), Xva(3, std::max<std::size_t>(val_count, 1));
  Eigen::RowVectorXf ytr(train_count), yva(std::max<std::size_t>(val_count, 1));
  for (std::size_t i = 0; i < train_count; ++i) {
    Xtr.col(i) = samples[order[i]].p;
    ytr(i) = samples[order[i]].d;
  }
  for (std::size_t i = 0; i < val_count; ++i) {
    Xva.col(i) = samples[order[train_count + i]].p;
    yva(i) = samples[order[train_count + i]].d;
  }
  if (val_count == 0) {
    Xva.col(0) = samples[order[0]].p;
    yva(0) = samples[order[0]].d;
  }

  TrainResult result;
  const std::size_t L = state.W.size();
  const int B = std::max(1, hyper.batch_size);
  std::vector<std::uint32_t> idx(train_count);
  for (std::uint32_t i = 0; i < train_count; ++i) idx[i] = i;

  long step = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t off = 0; off < train_count; off += B) {
      const int nb = static_cast<int>(std::min<std::size_t>(B, train_count - off));
      Eigen::MatrixXf X(3, nb);
      Eigen::RowVectorXf y(nb);
      for (int i = 0; i < nb; ++i) {
        X.col(i) = Xtr.col(idx[off + i]);
        y(i) = ytr(idx[off + i]);
      }
      // forward, keeping post-activations
      std::vector<Eigen::MatrixXf> acts(L - 1);
      Eigen::MatrixXf a = X;
      for (std::size_t l = 0; l + 1 < L; ++l) {
        a = ((state.W[l] * a).colwise() + state.b[l]).cwiseMax(0.0f);
        acts[l] = a;
      }
      const Eigen::RowVectorXf pred = (state.W.back() * a).colwise() + state.b.back();
      const Eigen::RowVectorXf err = pred - y;
      const float rmse = std::sqrt(err.array().square().mean());
      if (!std::isfinite(rmse))
        throw SolveError("train_link_net: non-finite loss at epoch " + std::to_string(epoch) +
                         ", step " + std::to_string(step));

      // RMSE loss: dL/dpred = err / (nb * rmse)
      Eigen::MatrixXf delta = err / (static_cast<float>(nb) * std::max(rmse, 1e-12f));
      ++step;
      const double bc1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(step));
      const float b1 = static_cast<float>(hyper.beta1), b2 = static_cast<float>(hyper.beta2);
      const float alpha = static_cast<float>(hyper.lr * std::sqrt(bc2) / bc1);

      for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXf& input = (l == 0) ? X : acts[l - 1];
        const Eigen::MatrixXf gW = delta * input.transpose();
        const Eigen::VectorXf gb = delta.rowwise().sum();
        if (l > 0) {
          const Eigen::MatrixXf upstream = state.W[l].transpose() * delta;
          delta = ((acts[l - 1].array() > 0.0f).cast<float>() * upstream.array()).matrix();
        }
        auto adam = [&](auto& p, auto& m, auto& v, const auto& g) {
          m = b1 * m + (1.0f - b1) * g;
          v = b2 * v + (1.0f - b2) * g.cwiseProduct(g);
          p.array() -= alpha * m.array() / (v.array().sqrt() + 1e-8f);
        };
        adam(state.W[l], state.mW[l], state.vW[l], gW);
        adam(state.b[l], state.mb[l], state.vb[l], gb);
      }
    }
    result.rmse_history.push_back(detail::batch_rmse(state, Xva, yva));
  }

  result.net = state.snap(hyper.arch);
  if (!result.net.finite()) throw SolveError("train_link_net: non-finite weights after training");
  result.final_rmse = result.rmse_history.empty()
                          ? detail::batch_rmse(state, Xva, yva)
                          : result.rmse_history.back();
  return result;
}

}  // namespace sdfsc
