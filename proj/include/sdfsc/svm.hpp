#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <list>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "sdfsc/calibration.hpp"
#include "sdfsc/common.hpp"
#include "sdfsc/dataset.hpp"
#include "sdfsc/robot.hpp"

namespace sdfsc {

/// RBF support-vector boundary over normalized configurations. Support
/// vectors and coefficients are float32-representable so the model file
/// round-trips bit-exactly; scoring runs in double.
struct SvmModel {
  int n = 0;                        // input dimension
  Eigen::MatrixXd support_vectors;  // N_v x n
  Eigen::VectorXd coeffs;           // alpha_i * y_i
  double bias = 0.0;
  double gamma = 1.0;
  double C = 50.0;
  double colliding_weight = 1.0;  // per-class penalty used at training time

  int sv_count() const { return static_cast<int>(support_vectors.rows()); }

  void validate() const {
    if (sv_count() < 1) throw ModelError("SvmModel: needs at least one support vector");
    if (!(gamma > 0.0)) throw ModelError("SvmModel: gamma must be positive");
    const double cap = C * std::max(1.0, colliding_weight) + 1e-9;
    for (int i = 0; i < coeffs.size(); ++i)
      if (std::abs(coeffs[i]) > cap)
        throw ModelError("SvmModel: |coefficient| exceeds its class penalty at sv " +
                         std::to_string(i));
  }
};

// S(q) = sum_i alpha_i y_i exp(-gamma ||q - q_i||^2) + b on normalized input.
inline double svm_score(const SvmModel& model, const Eigen::VectorXd& q_normalized) {
  const Eigen::VectorXd d2 =
      (model.support_vectors.rowwise() - q_normalized.transpose()).rowwise().squaredNorm();
  return ((-model.gamma * d2.array()).exp() * model.coeffs.array()).sum() + model.bias;
}

// dS/dq on the normalized scale.
inline Eigen::VectorXd svm_score_gradient_normalized(const SvmModel& model,
                                                     const Eigen::VectorXd& q_normalized) {
  const Eigen::MatrixXd diff = (-model.support_vectors).rowwise() + q_normalized.transpose();
  const Eigen::ArrayXd w =
      (-model.gamma * diff.rowwise().squaredNorm().array()).exp() * model.coeffs.array();
  return -2.0 * model.gamma * (diff.transpose() * w.matrix());
}

inline double svm_score_raw(const SvmModel& model, const RobotModel& robot,
                            const Eigen::VectorXd& q_raw) {
  return svm_score(model, robot.normalize_config(q_raw));
}

// dS/dq in raw radians: the normalized-space gradient chained through
// q_n = (q - q^-) / (q^+ - q^-).
inline Eigen::VectorXd svm_score_gradient(const SvmModel& model, const RobotModel& robot,
                                          const Eigen::VectorXd& q_raw) {
  const Eigen::VectorXd gn = svm_score_gradient_normalized(model, robot.normalize_config(q_raw));
  return gn.cwiseQuotient(robot.q_upper - robot.q_lower);
}

struct SvmTrainOptions {
  double C = 50.0;
  double gamma = 1.0;
  double tol = 1e-3;          // KKT violation gap at which SMO stops
  long max_iter = 2000000;    // pair updates before declaring non-convergence
  int cache_rows = 2048;      // kernel rows kept resident
  // penalty multiplier on the colliding class; catching collisions is the
  // critical error, so imbalanced datasets weight it up
  double colliding_weight = 1.0;
};

namespace detail {

// LRU cache of kernel matrix rows (float). Row i holds K(x_i, x_j) for all j.
class KernelRowCache {
public:
  KernelRowCache(const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& X,
                 float gamma, int capacity)
      : X_(X), gamma_(gamma), capacity_(std::max(capacity, 8)) {}

  const Eigen::RowVectorXf& row(int i) {
    auto it = map_.find(i);
    if (it != map_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second.second);
      return it->second.first;
    }
    if (static_cast<int>(map_.size()) >= capacity_) {
      map_.erase(lru_.back());
      lru_.pop_back();
    }
    lru_.push_front(i);
    auto [ins, ok] = map_.emplace(i, std::make_pair(compute(i), lru_.begin()));
    return ins->second.first;
  }

private:
  Eigen::RowVectorXf compute(int i) const {
    const Eigen::RowVectorXf xi = X_.row(i);
    return ((-gamma_) * ((X_.rowwise() - xi).rowwise().squaredNorm()).transpose().array())
        .exp()
        .matrix();
  }

  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& X_;
  float gamma_;
  int capacity_;
  std::list<int> lru_;
  std::unordered_map<int, std::pair<Eigen::RowVectorXf, std::list<int>::iterator>> map_;
};

}  // namespace detail

// Sequential minimal optimization with maximal-violating-pair selection and a
// fixed scan order, so training is deterministic. Stops when the KKT gap
// drops to tol; errors out with the residual gap if the iteration budget is
// exhausted first.
inline SvmModel train_svm(const std::vector<SelfCollisionSample>& train,
                          const SvmTrainOptions& opts = {}) {
  const long N = static_cast<long>(train.size());
  if (N < 2) throw ModelError("train_svm: need at least 2 samples");
  const int dim = static_cast<int>(train[0].q.size());
  long pos = 0;
  for (const auto& s : train)
    if (s.label > 0) ++pos;
  if (pos == 0 || pos == N)
    throw ModelError("train_svm: both classes must be present (free=" + std::to_string(pos) +
                     ", colliding=" + std::to_string(N - pos) + ")");

  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> X(N, dim);
  Eigen::VectorXf y(N);
  for (long i = 0; i < N; ++i) {
    X.row(i) = train[i].q.transpose();
    y[i] = static_cast<float>(train[i].label);
  }
  detail::KernelRowCache cache(X, static_cast<float>(opts.gamma), opts.cache_rows);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(N);
  // f_i = sum_j alpha_j y_j K_ij, maintained incrementally
  Eigen::VectorXd f = Eigen::VectorXd::Zero(N);
  // per-sample box bound: the colliding class may carry a heavier penalty
  Eigen::VectorXd Cbox(N);
  for (long i = 0; i < N; ++i)
    Cbox[i] = opts.C * (y[i] < 0 ? opts.colliding_weight : 1.0);

  double gap = std::numeric_limits<double>::infinity();
  long iter = 0;
  // working-set shrinking: the pair-selection scan runs over a shrunken
  // active set, periodically rebuilt by a full scan; convergence is only
  // declared on a full scan, so shrinking never changes the solution
  std::vector<long> active(N);
  for (long k = 0; k < N; ++k) active[k] = k;
  long since_rebuild = 0;
  const long rebuild_every = 1000;

  auto rebuild_active = [&]() {
    double m_full = -std::numeric_limits<double>::infinity();
    double m_low_full = std::numeric_limits<double>::infinity();
    for (long k = 0; k < N; ++k) {
      const double v = static_cast<double>(y[k]) - f[k];
      const bool in_up = (y[k] > 0 && alpha[k] < Cbox[k]) || (y[k] < 0 && alpha[k] > 0);
      const bool in_low = (y[k] > 0 && alpha[k] > 0) || (y[k] < 0 && alpha[k] < Cbox[k]);
      if (in_up) m_full = std::max(m_full, v);
      if (in_low) m_low_full = std::min(m_low_full, v);
    }
    active.clear();
    const double band = 0.1 * std::max(opts.tol, m_full - m_low_full);
    for (long k = 0; k < N; ++k) {
      const double v = static_cast<double>(y[k]) - f[k];
      const bool at_lower = alpha[k] <= 0.0;
      const bool at_upper = alpha[k] >= Cbox[k];
      const bool free_var = !at_lower && !at_upper;
      const bool up_violator = v > m_low_full + band;    // could pair as i
      const bool low_violator = v < m_full - band;       // could pair as j
      if (free_var || up_violator || low_violator) active.push_back(k);
    }
    return m_full - m_low_full;
  };

  for (; iter < opts.max_iter; ++iter) {
    // max violating pair over (-E_i) = y_i - f_i, within the active set
    int i_up = -1, j_low = -1;
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (long k : active) {
      const double v = static_cast<double>(y[k]) - f[k];
      const bool in_up = (y[k] > 0 && alpha[k] < Cbox[k]) || (y[k] < 0 && alpha[k] > 0);
      const bool in_low = (y[k] > 0 && alpha[k] > 0) || (y[k] < 0 && alpha[k] < Cbox[k]);
      if (in_up && v > m_up) {
        m_up = v;
        i_up = static_cast<int>(k);
      }
      if (in_low && v < m_low) {
        m_low = v;
        j_low = static_cast<int>(k);
      }
    }
    gap = m_up - m_low;
    if (gap <= opts.tol || ++since_rebuild >= rebuild_every) {
      since_rebuild = 0;
      gap = rebuild_active();  // authoritative full-scan gap
      if (gap <= opts.tol) break;
      continue;
    }

    const int i = i_up, j = j_low;
    const Eigen::RowVectorXf Ki = cache.row(i);
    const Eigen::RowVectorXf Kj = cache.row(j);
    const double kii = Ki[i], kjj = Kj[j], kij = static_cast<double>(Ki[j]);
    double eta = kii + kjj - 2.0 * kij;
    if (eta < 1e-12) eta = 1e-12;

    const double yi = y[i], yj = y[j];
    const double ai_old = alpha[i], aj_old = alpha[j];
    // two-variable subproblem; when a bound is hit the partner is recomputed
    // from the conserved pair quantity so no sub-ulp residue can pin the pair
    const double gi = yi * f[i] - 1.0, gj = yj * f[j] - 1.0;  // dual gradient
    const double Ci = Cbox[i], Cj = Cbox[j];
    double ai = ai_old, aj = aj_old;
    if (yi != yj) {
      const double delta = (-gi - gj) / eta;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > Ci - Cj) {
        if (ai > Ci) { ai = Ci; aj = Ci - diff; }
      } else {
        if (aj > Cj) { aj = Cj; ai = Cj + diff; }
      }
    } else {
      const double delta = (gi - gj) / eta;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > Ci) {
        if (ai > Ci) { ai = Ci; aj = sum - Ci; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > Cj) {
        if (aj > Cj) { aj = Cj; ai = sum - Cj; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    alpha[i] = ai;
    alpha[j] = aj;

    const double di = yi * (ai - ai_old), dj = yj * (aj - aj_old);
    f += di * Ki.transpose().cast<double>() + dj * Kj.transpose().cast<double>();
  }
  if (gap > opts.tol)
    throw SolveError("train_svm: SMO did not converge in " + std::to_string(opts.max_iter) +
                     " iterations; KKT gap " + std::to_string(gap) + " > tol " +
                     std::to_string(opts.tol));

  // bias from free support vectors, midpoint fallback
  double b = 0.0;
  long free_count = 0;
  for (long k = 0; k < N; ++k) {
    if (alpha[k] > 1e-9 && alpha[k] < Cbox[k] - 1e-9) {
      b += static_cast<double>(y[k]) - f[k];
      ++free_count;
    }
  }
  if (free_count > 0) {
    b /= static_cast<double>(free_count);
  } else {
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (long k = 0; k < N; ++k) {
      const double v = static_cast<double>(y[k]) - f[k];
      const bool in_up = (y[k] > 0 && alpha[k] < Cbox[k]) || (y[k] < 0 && alpha[k] > 0);
      const bool in_low = (y[k] > 0 && alpha[k] > 0) || (y[k] < 0 && alpha[k] < Cbox[k]);
      if (in_up) m_up = std::max(m_up, v);
      if (in_low) m_low = std::min(m_low, v);
    }
    b = 0.5 * (m_up + m_low);
  }

  SvmModel model;
  model.n = dim;
  model.gamma = opts.gamma;
  model.C = opts.C;
  model.colliding_weight = opts.colliding_weight;
  // snap retained values through float32 so serialization is lossless
  model.bias = static_cast<double>(static_cast<float>(b));
  std::vector<long> sv;
  for (long k = 0; k < N; ++k)
    if (alpha[k] > 1e-9) sv.push_back(k);
  if (sv.empty()) throw SolveError("train_svm: no support vectors retained");
  model.support_vectors.resize(sv.size(), dim);
  model.coeffs.resize(sv.size());
  for (std::size_t r = 0; r < sv.size(); ++r) {
    model.support_vectors.row(r) = X.row(sv[r]).cast<double>();
    model.coeffs[r] =
        static_cast<double>(static_cast<float>(alpha[sv[r]] * static_cast<double>(y[sv[r]])));
  }
  model.validate();
  return model;
}

inline ScoreStats fit_score_stats(const SvmModel& model,
                                  const std::vector<SelfCollisionSample>& val) {
  std::vector<double> scores;
  std::vector<int> labels;
  scores.reserve(val.size());
  labels.reserve(val.size());
  for (const auto& s : val) {
    scores.push_back(svm_score(model, s.q.cast<double>()));
    labels.push_back(s.label);
  }
  return fit_score_stats(scores, labels);
}

struct ClassifierMetrics {
  double accuracy = 0.0;
  double tpr = 0.0;  // free configurations kept free (positive class y=+1)
  double tnr = 0.0;  // colliding configurations caught
  long tp = 0, tn = 0, fp = 0, fn = 0;
  bool tnr_defined = true, tpr_defined = true;
};

// Metrics with the decision boundary at `threshold` on the score
// (predict free iff S >= threshold).
inline ClassifierMetrics evaluate_classifier(const SvmModel& model,
                                             const std::vector<SelfCollisionSample>& samples,
                                             double threshold = 0.0) {
  ClassifierMetrics m;
  for (const auto& s : samples) {
    const double score = svm_score(model, s.q.cast<double>());
    const bool pred_free = score >= threshold;
    const bool is_free = s.label > 0;
    if (is_free && pred_free) ++m.tp;
    else if (is_free && !pred_free) ++m.fn;
    else if (!is_free && !pred_free) ++m.tn;
    else ++m.fp;
  }
  const long total = m.tp + m.tn + m.fp + m.fn;
  m.accuracy = total ? static_cast<double>(m.tp + m.tn) / total : 0.0;
  m.tpr_defined = (m.tp + m.fn) > 0;
  m.tnr_defined = (m.tn + m.fp) > 0;
  m.tpr = m.tpr_defined ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
  m.tnr = m.tnr_defined ? static_cast<double>(m.tn) / (m.tn + m.fp) : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// SVM file: JSON header (includes the fitted score statistics and processing
// parameters) + float32 support-vector and coefficient blobs.

inline void save_svm(const std::filesystem::path& path, const SvmModel& model,
                     const ScoreStats& stats, const ProcessingParams& pparams) {
  nlohmann::json header{{"n", model.n},          {"N_v", model.sv_count()},
                        {"gamma", model.gamma},  {"C", model.C},
                        {"b", model.bias},       {"mu", stats.mu},
                        {"sigma", stats.sigma},  {"k", pparams.k},
                        {"b0", pparams.b0},
                        {"colliding_weight", model.colliding_weight}};
  const std::string head = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelError("cannot write svm file: " + path.string());
  const std::uint64_t head_len = head.size();
  os.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  os.write(head.data(), static_cast<std::streamsize>(head.size()));
  const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sv =
      model.support_vectors.cast<float>();
  const Eigen::VectorXf co = model.coeffs.cast<float>();
  os.write(reinterpret_cast<const char*>(sv.data()), sizeof(float) * sv.size());
  os.write(reinterpret_cast<const char*>(co.data()), sizeof(float) * co.size());
}

struct LoadedSvm {
  SvmModel model;
  ScoreStats stats;
  ProcessingParams pparams;
};

inline LoadedSvm load_svm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelError("cannot open svm file: " + path.string());
  std::uint64_t head_len = 0;
  is.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  std::string head(head_len, '\0');
  is.read(head.data(), static_cast<std::streamsize>(head_len));
  const nlohmann::json header = nlohmann::json::parse(head);
  LoadedSvm out;
  out.model.n = header.at("n").get<int>();
  const int nv = header.at("N_v").get<int>();
  out.model.gamma = header.at("gamma").get<double>();
  out.model.C = header.at("C").get<double>();
  out.model.colliding_weight = header.value("colliding_weight", 1.0);
  out.model.bias = header.at("b").get<double>();
  out.stats.mu = header.at("mu").get<double>();
  out.stats.sigma = header.at("sigma").get<double>();
  out.pparams.k = header.at("k").get<double>();
  out.pparams.b0 = header.at("b0").get<double>();
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> sv(nv, out.model.n);
  Eigen::VectorXf co(nv);
  is.read(reinterpret_cast<char*>(sv.data()), sizeof(float) * sv.size());
  is.read(reinterpret_cast<char*>(co.data()), sizeof(float) * co.size());
  if (!is) throw ModelError("svm file truncated: " + path.string());
  out.model.support_vectors = sv.cast<double>();
  out.model.coeffs = co.cast<double>();
  out.model.validate();
  return out;
}

}  // namespace sdfsc
