#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/matrix.hpp"
#include "icp/quantile.hpp"

namespace icp {

/// Contract every regression method calibrates against: a fitted model that
/// maps a feature vector to a finite real, deterministically.
class PointPredictor {
 public:
  virtual ~PointPredictor() = default;
  virtual double predict(std::span<const double> x) const = 0;
};

struct ClassProbabilities {
  std::vector<double> probs;

  int argmax() const {
    int best = 0;
    for (int k = 1; k < static_cast<int>(probs.size()); ++k) {
      if (probs[static_cast<std::size_t>(k)] > probs[static_cast<std::size_t>(best)]) best = k;
    }
    return best;
  }
};

namespace detail {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;  // 1.0 for zero-variance columns
  std::vector<std::size_t> constant_columns;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const std::size_t n = x.rows(), d = x.cols();
    s.mean.assign(d, 0.0);
    s.scale.assign(d, 1.0);
    for (std::size_t c = 0; c < d; ++c) {
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += x(i, c);
      m /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double dlt = x(i, c) - m;
        var += dlt * dlt;
      }
      var /= static_cast<double>(n);
      s.mean[c] = m;
      if (var == 0.0) {
        s.constant_columns.push_back(c);
      } else {
        s.scale[c] = std::sqrt(var);
      }
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t c = 0; c < x.cols(); ++c) out(i, c) = (x(i, c) - mean[c]) / scale[c];
    }
    return out;
  }

  double apply_one(std::span<const double> x, std::size_t c) const {
    return (x[c] - mean[c]) / scale[c];
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// KNN regression
// ---------------------------------------------------------------------------

/// Unweighted k-nearest-neighbor mean with Euclidean distance. Distance ties
/// are broken by the lowest training index, which makes predictions
/// deterministic for any fixed training order.
class KnnRegressor final : public PointPredictor {
 public:
  KnnRegressor() = default;
  KnnRegressor(Matrix features, std::vector<double> targets, std::size_t k)
      : features_(std::move(features)), targets_(std::move(targets)), k_(k) {}

  double predict(std::span<const double> x) const override {
    if (x.size() != features_.cols()) {
      throw std::invalid_argument("KnnRegressor: query has wrong dimension");
    }
    const std::size_t n = features_.rows();
    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      double d2 = 0.0;
      const auto row = features_.row(i);
      for (std::size_t c = 0; c < row.size(); ++c) {
        const double delta = row[c] - x[c];
        d2 += delta * delta;
      }
      dist[i] = d2;
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k_ - 1), idx.end(),
                     [&](std::size_t a, std::size_t b) {
                       if (dist[a] != dist[b]) return dist[a] < dist[b];
                       return a < b;
                     });
    double sum = 0.0;
    for (std::size_t i = 0; i < k_; ++i) sum += targets_[idx[i]];
    return sum / static_cast<double>(k_);
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t train_size() const noexcept { return targets_.size(); }

 private:
  Matrix features_;
  std::vector<double> targets_;
  std::size_t k_ = 1;
};

inline KnnRegressor knn_fit(const Dataset& train, std::size_t k) {
  if (train.task != Task::regression) {
    throw std::invalid_argument("knn_fit: regression dataset required");
  }
  if (k < 1 || k > train.size()) {
    throw std::invalid_argument("knn_fit: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(train.size()) + "]");
  }
  return KnnRegressor(train.features, train.targets, k);
}

// ---------------------------------------------------------------------------
// Pinball loss and affine quantile regression
// ---------------------------------------------------------------------------

/// max(eps*(y-pred), (eps-1)*(y-pred)); zero exactly when y == pred.
inline double pinball_loss(double y, double pred, double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("pinball_loss: epsilon must lie in (0, 1)");
  }
  const double u = y - pred;
  return std::max(epsilon * u, (epsilon - 1.0) * u);
}

/// Mean pinball loss of the affine model w[0..D-1] . x + w[D] over (X, y).
inline double pinball_objective(const Matrix& x, std::span<const double> y,
                                std::span<const double> w, double epsilon) {
  const std::size_t n = x.rows(), d = x.cols();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double pred = w[d];
    const auto row = x.row(i);
    for (std::size_t c = 0; c < d; ++c) pred += w[c] * row[c];
    total += pinball_loss(y[i], pred, epsilon);
  }
  return total / static_cast<double>(n);
}

/// Subgradient of the mean pinball loss; 0 is chosen at the kink y == pred.
inline std::vector<double> pinball_subgradient(const Matrix& x, std::span<const double> y,
                                               std::span<const double> w, double epsilon) {
  const std::size_t n = x.rows(), d = x.cols();
  std::vector<double> grad(d + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double pred = w[d];
    const auto row = x.row(i);
    for (std::size_t c = 0; c < d; ++c) pred += w[c] * row[c];
    const double u = y[i] - pred;
    const double g = u > 0.0 ? -epsilon : (u < 0.0 ? 1.0 - epsilon : 0.0);
    for (std::size_t c = 0; c < d; ++c) grad[c] += g * row[c];
    grad[d] += g;
  }
  for (double& g : grad) g /= static_cast<double>(n);
  return grad;
}

/// Affine model trained to the epsilon-quantile by subgradient descent on the
/// pinball loss, with step size step_size/sqrt(t). Features are standardized
/// internally; the reported iterate is the best one seen, so the recorded
/// checkpoint losses are non-increasing.
class QuantileModel final : public PointPredictor {
 public:
  QuantileModel() = default;

  double predict(std::span<const double> x) const override {
    if (x.size() != standardizer_.mean.size()) {
      throw std::invalid_argument("QuantileModel: query has wrong dimension");
    }
    double pred = weights_.back();
    for (std::size_t c = 0; c < x.size(); ++c) {
      pred += weights_[c] * standardizer_.apply_one(x, c);
    }
    return pred;
  }

  double epsilon() const noexcept { return epsilon_; }
  const std::vector<double>& checkpoint_losses() const noexcept { return checkpoint_losses_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  /// Coefficients mapped back to raw feature space: D slopes then intercept.
  std::vector<double> raw_coefficients() const {
    const std::size_t d = standardizer_.mean.size();
    std::vector<double> out(d + 1, 0.0);
    double intercept = weights_[d];
    for (std::size_t c = 0; c < d; ++c) {
      out[c] = weights_[c] / standardizer_.scale[c];
      intercept -= weights_[c] * standardizer_.mean[c] / standardizer_.scale[c];
    }
    out[d] = intercept;
    return out;
  }

 private:
  friend QuantileModel quantile_fit(const Dataset&, double, std::size_t, double, std::uint64_t);

  double epsilon_ = 0.5;
  std::vector<double> weights_;  // standardized space, intercept last
  detail::Standardizer standardizer_;
  std::vector<double> checkpoint_losses_;
  std::vector<std::string> warnings_;
};

/// The seed parameter is accepted for signature stability; full-batch
/// subgradient descent from a deterministic start does not consume it.
inline QuantileModel quantile_fit(const Dataset& train, double epsilon, std::size_t steps,
                                  double step_size, std::uint64_t seed) {
  (void)seed;
  if (train.task != Task::regression) {
    throw std::invalid_argument("quantile_fit: regression dataset required");
  }
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("quantile_fit: epsilon must lie in (0, 1)");
  }
  if (steps < 1) throw std::invalid_argument("quantile_fit: steps must be at least 1");
  if (train.size() == 0) throw std::invalid_argument("quantile_fit: empty training set");

  QuantileModel model;
  model.epsilon_ = epsilon;
  model.standardizer_ = detail::Standardizer::fit(train.features);
  for (std::size_t c : model.standardizer_.constant_columns) {
    model.warnings_.push_back("feature " + std::to_string(c) +
                              " has zero variance and was dropped");
  }
  const Matrix xs = model.standardizer_.apply(train.features);
  const std::size_t d = xs.cols();

  // Start the intercept at the empirical epsilon-quantile of the targets
  // (order statistic, "higher" convention).
  std::vector<double> sorted_y = train.targets;
  std::sort(sorted_y.begin(), sorted_y.end());
  const std::size_t n = sorted_y.size();
  std::size_t init_rank = static_cast<std::size_t>(
      std::ceil(detail::snap_to_integer(epsilon * static_cast<double>(n))));
  init_rank = std::clamp<std::size_t>(init_rank, 1, n);

  std::vector<double> w(d + 1, 0.0);
  w[d] = sorted_y[init_rank - 1];

  std::vector<double> best_w = w;
  double best_loss = pinball_objective(xs, train.targets, w, epsilon);
  const std::size_t checkpoint_every = std::max<std::size_t>(1, steps / 20);
  model.checkpoint_losses_.push_back(best_loss);

  for (std::size_t t = 1; t <= steps; ++t) {
    const auto grad = pinball_subgradient(xs, train.targets, w, epsilon);
    const double lr = step_size / std::sqrt(static_cast<double>(t));
    for (std::size_t c = 0; c <= d; ++c) w[c] -= lr * grad[c];
    const double loss = pinball_objective(xs, train.targets, w, epsilon);
    if (loss < best_loss) {
      best_loss = loss;
      best_w = w;
    }
    if (t % checkpoint_every == 0) model.checkpoint_losses_.push_back(best_loss);
  }
  model.weights_ = std::move(best_w);
  return model;
}

// ---------------------------------------------------------------------------
// Softmax classification
// ---------------------------------------------------------------------------

namespace detail {

/// Numerically stable softmax of logits into out.
inline void softmax_inplace(std::vector<double>& logits) {
  double zmax = logits[0];
  for (double z : logits) zmax = std::max(zmax, z);
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - zmax);
    sum += z;
  }
  for (double& z : logits) z /= sum;
}

}  // namespace detail

/// Mean cross-entropy of the softmax model with weights W (K rows, D+1
/// columns, bias last) over labeled rows of X.
inline double softmax_objective(const Matrix& x, std::span<const int> labels, const Matrix& w) {
  const std::size_t n = x.rows(), d = x.cols(), k = w.rows();
  double total = 0.0;
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      double z = w(c, d);
      for (std::size_t j = 0; j < d; ++j) z += w(c, j) * row[j];
      logits[c] = z;
      zmax = std::max(zmax, z);
    }
    double lse = 0.0;
    for (std::size_t c = 0; c < k; ++c) lse += std::exp(logits[c] - zmax);
    lse = zmax + std::log(lse);
    total += lse - logits[static_cast<std::size_t>(labels[i])];
  }
  return total / static_cast<double>(n);
}

/// Gradient of softmax_objective with respect to W.
inline Matrix softmax_gradient(const Matrix& x, std::span<const int> labels, const Matrix& w) {
  const std::size_t n = x.rows(), d = x.cols(), k = w.rows();
  Matrix grad(k, d + 1, 0.0);
  std::vector<double> p(k);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = x.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      double z = w(c, d);
      for (std::size_t j = 0; j < d; ++j) z += w(c, j) * row[j];
      p[c] = z;
    }
    detail::softmax_inplace(p);
    p[static_cast<std::size_t>(labels[i])] -= 1.0;
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < d; ++j) grad(c, j) += p[c] * row[j];
      grad(c, d) += p[c];
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j <= d; ++j) grad(c, j) /= static_cast<double>(n);
  }
  return grad;
}

/// Multinomial logistic regression, zero-initialized (zero training steps
/// therefore predict the uniform distribution). Features are standardized
/// internally; gradient descent uses a constant step and keeps the
/// lowest-loss iterate.
class SoftmaxClassifier {
 public:
  SoftmaxClassifier() = default;

  ClassProbabilities predict(std::span<const double> x) const {
    if (x.size() != standardizer_.mean.size()) {
      throw std::invalid_argument("SoftmaxClassifier: query has wrong dimension");
    }
    const std::size_t d = x.size();
    std::vector<double> logits(static_cast<std::size_t>(n_classes_));
    for (int c = 0; c < n_classes_; ++c) {
      double z = weights_(static_cast<std::size_t>(c), d);
      for (std::size_t j = 0; j < d; ++j) {
        z += weights_(static_cast<std::size_t>(c), j) * standardizer_.apply_one(x, j);
      }
      logits[static_cast<std::size_t>(c)] = z;
    }
    detail::softmax_inplace(logits);
    return ClassProbabilities{std::move(logits)};
  }

  int n_classes() const noexcept { return n_classes_; }
  const Matrix& weights() const noexcept { return weights_; }

 private:
  friend SoftmaxClassifier softmax_fit(const Dataset&, std::size_t, double, std::uint64_t);

  Matrix weights_;  // K x (D+1), standardized space, bias last
  detail::Standardizer standardizer_;
  int n_classes_ = 0;
};

/// The seed parameter is accepted for signature stability; full-batch descent
/// from zero weights does not consume it.
inline SoftmaxClassifier softmax_fit(const Dataset& train, std::size_t steps, double step_size,
                                     std::uint64_t seed) {
  (void)seed;
  if (train.task != Task::classification) {
    throw std::invalid_argument("softmax_fit: classification dataset required");
  }
  const auto labels = train.class_labels();
  int distinct = 0;
  std::vector<bool> seen(static_cast<std::size_t>(train.n_classes), false);
  for (int y : labels) {
    if (!seen[static_cast<std::size_t>(y)]) {
      seen[static_cast<std::size_t>(y)] = true;
      ++distinct;
    }
  }
  if (distinct < 2) throw std::invalid_argument("softmax_fit: single-class training data");

  SoftmaxClassifier model;
  model.n_classes_ = train.n_classes;
  model.standardizer_ = detail::Standardizer::fit(train.features);
  const Matrix xs = model.standardizer_.apply(train.features);
  const std::size_t d = xs.cols();

  Matrix w(static_cast<std::size_t>(train.n_classes), d + 1, 0.0);
  Matrix best_w = w;
  double best_loss = softmax_objective(xs, labels, w);
  for (std::size_t t = 1; t <= steps; ++t) {
    const Matrix grad = softmax_gradient(xs, labels, w);
    for (std::size_t c = 0; c < w.rows(); ++c) {
      for (std::size_t j = 0; j <= d; ++j) w(c, j) -= step_size * grad(c, j);
    }
    const double loss = softmax_objective(xs, labels, w);
    if (loss < best_loss) {
      best_loss = loss;
      best_w = w;
    }
  }
  model.weights_ = std::move(best_w);
  return model;
}

inline ClassProbabilities softmax_predict(const SoftmaxClassifier& model,
                                          std::span<const double> x) {
  return model.predict(x);
}

// ---------------------------------------------------------------------------
// Residual-magnitude model
// ---------------------------------------------------------------------------

/// KNN regressor trained on {(x_i, |y_i - f(x_i)|)}. Predictions are means of
/// non-negative values, hence non-negative.
inline KnnRegressor fit_residual_model(const PointPredictor& f, const Dataset& cal1,
                                       std::size_t k) {
  if (cal1.task != Task::regression) {
    throw std::invalid_argument("fit_residual_model: regression dataset required");
  }
  if (k < 1 || k > cal1.size()) {
    throw std::invalid_argument("fit_residual_model: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(cal1.size()) + "]");
  }
  std::vector<double> residuals(cal1.size());
  for (std::size_t i = 0; i < cal1.size(); ++i) {
    residuals[i] = std::abs(cal1.targets[i] - f.predict(cal1.point(i)));
  }
  return KnnRegressor(cal1.features, std::move(residuals), k);
}

}  // namespace icp
