#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "icp/models.hpp"
#include "icp/quantile.hpp"

namespace icp {

/// Sorted set of class indices.
struct PredictionSet {
  std::vector<int> classes;

  bool contains(int y) const {
    return std::binary_search(classes.begin(), classes.end(), y);
  }
  std::size_t size() const noexcept { return classes.size(); }
  bool empty() const noexcept { return classes.empty(); }
};

enum class ClassificationMethod { naive, class_balanced, aps };

/// One pooled quantile (naive, aps) or one quantile per class
/// (class_balanced), each derived only from calibration points of its class.
struct ClassificationCalibration {
  ClassificationMethod method = ClassificationMethod::naive;
  std::vector<ConformalQuantile> quantiles;
  int n_classes = 0;
};

namespace detail {

inline void check_class_index(const ClassProbabilities& probs, int true_class) {
  if (true_class < 0 || true_class >= static_cast<int>(probs.probs.size())) {
    throw std::invalid_argument("class index " + std::to_string(true_class) + " out of range");
  }
}

/// Class indices sorted by descending probability, ties broken by the lower
/// class index so the ordering is deterministic.
inline std::vector<int> descending_order(std::span<const double> probs) {
  std::vector<int> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double pa = probs[static_cast<std::size_t>(a)];
    const double pb = probs[static_cast<std::size_t>(b)];
    if (pa != pb) return pa > pb;
    return a < b;
  });
  return order;
}

inline void check_calibration_input(std::span<const ClassProbabilities> cal_probs,
                                    std::span<const int> cal_labels) {
  if (cal_probs.empty()) throw std::invalid_argument("empty calibration set");
  if (cal_probs.size() != cal_labels.size()) {
    throw std::invalid_argument("calibration probabilities and labels differ in length");
  }
}

}  // namespace detail

/// 1 - softmax probability of the true class.
inline double score_softmax_naive(const ClassProbabilities& probs, int true_class) {
  detail::check_class_index(probs, true_class);
  return 1.0 - probs.probs[static_cast<std::size_t>(true_class)];
}

/// Cumulative probability mass, in descending-probability order, through and
/// including the true class.
inline double score_aps(const ClassProbabilities& probs, int true_class) {
  detail::check_class_index(probs, true_class);
  const auto order = detail::descending_order(probs.probs);
  double cumulative = 0.0;
  for (int cls : order) {
    cumulative += probs.probs[static_cast<std::size_t>(cls)];
    if (cls == true_class) break;
  }
  return cumulative;
}

inline ClassificationCalibration calibrate_naive_cls(std::span<const ClassProbabilities> cal_probs,
                                                     std::span<const int> cal_labels,
                                                     double alpha) {
  detail::check_calibration_input(cal_probs, cal_labels);
  std::vector<double> scores(cal_probs.size());
  for (std::size_t i = 0; i < cal_probs.size(); ++i) {
    scores[i] = score_softmax_naive(cal_probs[i], cal_labels[i]);
  }
  ClassificationCalibration out;
  out.method = ClassificationMethod::naive;
  out.n_classes = static_cast<int>(cal_probs[0].probs.size());
  out.quantiles.push_back(conformal_quantile(scores, alpha));
  return out;
}

/// Per-class quantiles: class y's threshold comes only from calibration
/// points with label y. Every class must be present.
inline ClassificationCalibration calibrate_class_balanced(
    std::span<const ClassProbabilities> cal_probs, std::span<const int> cal_labels, double alpha) {
  detail::check_calibration_input(cal_probs, cal_labels);
  const int n_classes = static_cast<int>(cal_probs[0].probs.size());
  std::vector<std::vector<double>> per_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < cal_probs.size(); ++i) {
    detail::check_class_index(cal_probs[i], cal_labels[i]);
    per_class[static_cast<std::size_t>(cal_labels[i])].push_back(
        score_softmax_naive(cal_probs[i], cal_labels[i]));
  }
  ClassificationCalibration out;
  out.method = ClassificationMethod::class_balanced;
  out.n_classes = n_classes;
  for (int y = 0; y < n_classes; ++y) {
    const auto& scores = per_class[static_cast<std::size_t>(y)];
    if (scores.empty()) {
      throw std::invalid_argument("calibrate_class_balanced: class " + std::to_string(y) +
                                  " absent from calibration set");
    }
    out.quantiles.push_back(conformal_quantile(scores, alpha));
  }
  return out;
}

inline ClassificationCalibration calibrate_aps(std::span<const ClassProbabilities> cal_probs,
                                               std::span<const int> cal_labels, double alpha) {
  detail::check_calibration_input(cal_probs, cal_labels);
  std::vector<double> scores(cal_probs.size());
  for (std::size_t i = 0; i < cal_probs.size(); ++i) {
    scores[i] = score_aps(cal_probs[i], cal_labels[i]);
  }
  ClassificationCalibration out;
  out.method = ClassificationMethod::aps;
  out.n_classes = static_cast<int>(cal_probs[0].probs.size());
  out.quantiles.push_back(conformal_quantile(scores, alpha));
  return out;
}

/// {y : p_y >= 1 - q}, inclusive comparison. May be empty; a degenerate
/// quantile yields every class.
inline PredictionSet predict_set_naive(const ClassificationCalibration& calib,
                                       const ClassProbabilities& probs) {
  const double threshold = 1.0 - calib.quantiles[0].q_hat;  // -inf when degenerate
  PredictionSet set;
  for (int y = 0; y < calib.n_classes; ++y) {
    if (probs.probs[static_cast<std::size_t>(y)] >= threshold) set.classes.push_back(y);
  }
  return set;
}

/// {y : p_y >= 1 - q^(y)} with each class's own threshold.
inline PredictionSet predict_set_class_balanced(const ClassificationCalibration& calib,
                                                const ClassProbabilities& probs) {
  PredictionSet set;
  for (int y = 0; y < calib.n_classes; ++y) {
    const double threshold = 1.0 - calib.quantiles[static_cast<std::size_t>(y)].q_hat;
    if (probs.probs[static_cast<std::size_t>(y)] >= threshold) set.classes.push_back(y);
  }
  return set;
}

/// Classes in descending-probability order until the running mass first
/// reaches q (that crossing class included); every class when q exceeds the
/// total. Never empty: the argmax is pushed before the first stop check.
inline PredictionSet predict_set_aps(const ClassificationCalibration& calib,
                                     const ClassProbabilities& probs) {
  const double q = calib.quantiles[0].q_hat;
  const auto order = detail::descending_order(probs.probs);
  PredictionSet set;
  double cumulative = 0.0;
  for (int cls : order) {
    cumulative += probs.probs[static_cast<std::size_t>(cls)];
    set.classes.push_back(cls);
    if (cumulative >= q) break;
  }
  std::sort(set.classes.begin(), set.classes.end());
  return set;
}

inline PredictionSet predict_set(const ClassificationCalibration& calib,
                                 const ClassProbabilities& probs) {
  switch (calib.method) {
    case ClassificationMethod::naive:
      return predict_set_naive(calib, probs);
    case ClassificationMethod::class_balanced:
      return predict_set_class_balanced(calib, probs);
    case ClassificationMethod::aps:
      return predict_set_aps(calib, probs);
  }
  throw std::logic_error("predict_set: unknown method");
}

/// Exact counts of set sizes 0..n_classes.
inline std::vector<std::size_t> set_size_histogram(std::span<const PredictionSet> sets,
                                                   int n_classes) {
  if (sets.empty()) throw std::invalid_argument("set_size_histogram: empty set list");
  std::vector<std::size_t> hist(static_cast<std::size_t>(n_classes) + 1, 0);
  for (const auto& s : sets) {
    if (s.size() > static_cast<std::size_t>(n_classes)) {
      throw std::invalid_argument("set_size_histogram: set larger than n_classes");
    }
    ++hist[s.size()];
  }
  return hist;
}

/// Fraction of class-y points whose set contains y, for each y.
inline std::vector<double> per_class_coverage(std::span<const PredictionSet> sets,
                                              std::span<const int> labels, int n_classes) {
  if (sets.empty()) throw std::invalid_argument("per_class_coverage: empty input");
  if (sets.size() != labels.size()) {
    throw std::invalid_argument("per_class_coverage: sets and labels differ in length");
  }
  std::vector<double> covered(static_cast<std::size_t>(n_classes), 0.0);
  std::vector<double> total(static_cast<std::size_t>(n_classes), 0.0);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= n_classes) throw std::invalid_argument("per_class_coverage: bad label");
    total[static_cast<std::size_t>(y)] += 1.0;
    if (sets[i].contains(y)) covered[static_cast<std::size_t>(y)] += 1.0;
  }
  std::vector<double> out(static_cast<std::size_t>(n_classes), 0.0);
  for (int y = 0; y < n_classes; ++y) {
    const auto u = static_cast<std::size_t>(y);
    out[u] = total[u] > 0.0 ? covered[u] / total[u] : 0.0;
  }
  return out;
}

}  // namespace icp
