#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sdfsc/common.hpp"

namespace sdfsc {

/// Mean/std of the classifier scores over misclassified validation
/// configurations; the score distribution there is treated as Gaussian.
struct ScoreStats {
  double mu = 0.0;
  double sigma = 1.0;
};

/// Parameters of the bounded monotone map P(s) = -1 / (1 + exp(k s + b0))
/// turning a boundary score into a distance correction in (-1, 0).
struct ProcessingParams {
  double k = 1.0;
  double b0 = 0.0;
};

enum class BoundaryRegion { Distant, Proximal, Transgressing };

inline const char* to_string(BoundaryRegion r) {
  switch (r) {
    case BoundaryRegion::Distant: return "distant";
    case BoundaryRegion::Proximal: return "proximal";
    case BoundaryRegion::Transgressing: return "transgressing";
  }
  return "?";
}

// Sample mean and Bessel-corrected std of the scores where the classifier
// disagrees with the label. Errors out rather than guessing when the
// classifier is perfect on the validation set; widening the stats set to
// margin-violating samples is the caller's explicit decision.
inline ScoreStats fit_score_stats(const std::vector<double>& scores,
                                  const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ModelError("fit_score_stats: scores/labels size mismatch");
  std::vector<double> mis;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_free = scores[i] > 0.0;
    const bool is_free = labels[i] > 0;
    if (predicted_free != is_free) mis.push_back(scores[i]);
  }
  if (mis.empty())
    throw ModelError(
        "fit_score_stats: no misclassified validation configurations; "
        "widen the stats set (e.g. to margin-violating samples) or enlarge validation");
  if (mis.size() < 2)
    throw ModelError("fit_score_stats: need at least 2 misclassified scores for a std estimate");
  double mean = 0.0;
  for (double s : mis) mean += s;
  mean /= static_cast<double>(mis.size());
  double ss = 0.0;
  for (double s : mis) ss += (s - mean) * (s - mean);
  const double sigma = std::sqrt(ss / static_cast<double>(mis.size() - 1));
  if (!(sigma > 0.0))
    throw ModelError("fit_score_stats: degenerate misclassified-score distribution (sigma = 0)");
  return {mean, sigma};
}

// Calibrates (k, b0) so that P(mu - sigma) = lo and P(mu + sigma) = hi,
// exactly, via the logit transform of both target equations.
inline ProcessingParams fit_processing_params(const ScoreStats& stats, double lo = -0.95,
                                              double hi = -0.001) {
  if (!(stats.sigma > 0.0)) throw ModelError("fit_processing_params: sigma must be positive");
  if (!(-1.0 < lo && lo < hi && hi < 0.0))
    throw ModelError("fit_processing_params: need -1 < lo < hi < 0");
  const double zlo = std::log((-1.0 - lo) / lo);  // = k(mu-sigma) + b0
  const double zhi = std::log((-1.0 - hi) / hi);  // = k(mu+sigma) + b0
  ProcessingParams p;
  p.k = (zhi - zlo) / (2.0 * stats.sigma);
  p.b0 = zlo - p.k * (stats.mu - stats.sigma);
  return p;
}

struct ProcessingValue {
  double value = 0.0;  // P(s), in (-1, 0)
  double slope = 0.0;  // dP/ds, > 0
};

// P and dP/ds evaluated in saturation-safe form: the exponential is always
// taken of a non-positive argument.
inline ProcessingValue processing(const ProcessingParams& params, double s) {
  const double z = params.k * s + params.b0;
  ProcessingValue out;
  if (z >= 0.0) {
    const double e = std::exp(-z);
    out.value = -e / (1.0 + e);
    out.slope = params.k * e / ((1.0 + e) * (1.0 + e));
  } else {
    const double e = std::exp(z);
    out.value = -1.0 / (1.0 + e);
    out.slope = params.k * e / ((1.0 + e) * (1.0 + e));
  }
  return out;
}

// Region of a score relative to the fitted boundary band [mu-sigma, mu+sigma].
inline BoundaryRegion classify_region(const ScoreStats& stats, double s) {
  if (s < stats.mu - stats.sigma) return BoundaryRegion::Transgressing;
  if (s <= stats.mu + stats.sigma) return BoundaryRegion::Proximal;
  return BoundaryRegion::Distant;
}

}  // namespace sdfsc
