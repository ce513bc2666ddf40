#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "icp/dataset.hpp"
#include "icp/models.hpp"
#include "icp/quantile.hpp"

namespace icp {

struct PredictionInterval {
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double y) const noexcept { return lower <= y && y <= upper; }
  double width() const noexcept { return upper - lower; }
};

enum class RegressionMethod { naive, crf, cqr };

/// A conformal quantile plus non-owning references to the fitted predictors
/// the method needs. The referenced models must outlive the calibration.
struct RegressionCalibration {
  RegressionMethod method = RegressionMethod::naive;
  ConformalQuantile quantile;
  const PointPredictor* point_model = nullptr;     // naive, crf
  const PointPredictor* residual_model = nullptr;  // crf
  const QuantileModel* lower_model = nullptr;      // cqr
  const QuantileModel* upper_model = nullptr;      // cqr
};

/// Floor applied to residual-model outputs before dividing or scaling: a
/// residual model can legitimately output 0 (perfect fit on its training
/// split) while the normalized score needs r(x) > 0.
inline constexpr double kResidualFloor = 1e-6;

inline double score_absolute(const PointPredictor& f, std::span<const double> x, double y) {
  return std::abs(f.predict(x) - y);
}

inline double score_normalized(const PointPredictor& f, const PointPredictor& r,
                               std::span<const double> x, double y) {
  const double denom = std::max(r.predict(x), kResidualFloor);
  return std::abs(y - f.predict(x)) / denom;
}

/// Signed two-sided score: max(t_lo(x) - y, y - t_hi(x)). Negative when y is
/// strictly inside the quantile band.
inline double score_cqr(const QuantileModel& t_lo, const QuantileModel& t_hi,
                        std::span<const double> x, double y) {
  return std::max(t_lo.predict(x) - y, y - t_hi.predict(x));
}

inline RegressionCalibration calibrate_naive(const PointPredictor& f, const Dataset& cal,
                                             double alpha) {
  if (cal.task != Task::regression) {
    throw std::invalid_argument("calibrate_naive: regression dataset required");
  }
  if (cal.size() == 0) throw std::invalid_argument("calibrate_naive: empty calibration set");
  std::vector<double> scores(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    scores[i] = score_absolute(f, cal.point(i), cal.targets[i]);
  }
  RegressionCalibration out;
  out.method = RegressionMethod::naive;
  out.quantile = conformal_quantile(scores, alpha);
  out.point_model = &f;
  return out;
}

inline RegressionCalibration calibrate_crf(const PointPredictor& f, const PointPredictor& r,
                                           const Dataset& cal2, double alpha) {
  if (cal2.task != Task::regression) {
    throw std::invalid_argument("calibrate_crf: regression dataset required");
  }
  if (cal2.size() == 0) throw std::invalid_argument("calibrate_crf: empty calibration set");
  std::vector<double> scores(cal2.size());
  for (std::size_t i = 0; i < cal2.size(); ++i) {
    scores[i] = score_normalized(f, r, cal2.point(i), cal2.targets[i]);
  }
  RegressionCalibration out;
  out.method = RegressionMethod::crf;
  out.quantile = conformal_quantile(scores, alpha);
  out.point_model = &f;
  out.residual_model = &r;
  return out;
}

inline RegressionCalibration calibrate_cqr(const QuantileModel& t_lo, const QuantileModel& t_hi,
                                           const Dataset& cal, double alpha) {
  if (cal.task != Task::regression) {
    throw std::invalid_argument("calibrate_cqr: regression dataset required");
  }
  if (cal.size() == 0) throw std::invalid_argument("calibrate_cqr: empty calibration set");
  std::vector<double> scores(cal.size());
  for (std::size_t i = 0; i < cal.size(); ++i) {
    scores[i] = score_cqr(t_lo, t_hi, cal.point(i), cal.targets[i]);
  }
  RegressionCalibration out;
  out.method = RegressionMethod::cqr;
  out.quantile = conformal_quantile(scores, alpha);
  out.lower_model = &t_lo;
  out.upper_model = &t_hi;
  return out;
}

/// [f(x) - q, f(x) + q]; the whole real line when the calibration was
/// degenerate. Width is 2*q for every x by construction.
inline PredictionInterval predict_interval_naive(const RegressionCalibration& calib,
                                                 std::span<const double> x) {
  if (calib.quantile.degenerate) {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  const double center = calib.point_model->predict(x);
  return {center - calib.quantile.q_hat, center + calib.quantile.q_hat};
}

/// [f(x) - q*r(x), f(x) + q*r(x)] with r(x) floored at kResidualFloor.
inline PredictionInterval predict_interval_crf(const RegressionCalibration& calib,
                                               std::span<const double> x) {
  if (calib.quantile.degenerate) {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
  const double center = calib.point_model->predict(x);
  const double half =
      calib.quantile.q_hat * std::max(calib.residual_model->predict(x), kResidualFloor);
  return {center - half, center + half};
}

/// [t_lo(x) - q, t_hi(x) + q]. A negative q shrinks the raw band. If the
/// shifted endpoints cross, the interval collapses to their midpoint and
/// *crossed is set; crossing is a base-model artifact the conformal layer
/// tolerates and counts.
inline PredictionInterval predict_interval_cqr(const RegressionCalibration& calib,
                                               std::span<const double> x,
                                               bool* crossed = nullptr) {
  if (crossed) *crossed = false;
  const double q = calib.quantile.q_hat;  // +inf when degenerate, endpoints become the full line
  const double lower = calib.lower_model->predict(x) - q;
  const double upper = calib.upper_model->predict(x) + q;
  if (lower > upper) {
    if (crossed) *crossed = true;
    const double mid = 0.5 * (lower + upper);
    return {mid, mid};
  }
  return {lower, upper};
}

/// Method dispatch; increments *crossing_count on CQR midpoint collapses.
inline PredictionInterval predict_interval(const RegressionCalibration& calib,
                                           std::span<const double> x,
                                           std::size_t* crossing_count = nullptr) {
  switch (calib.method) {
    case RegressionMethod::naive:
      return predict_interval_naive(calib, x);
    case RegressionMethod::crf:
      return predict_interval_crf(calib, x);
    case RegressionMethod::cqr: {
      bool crossed = false;
      const PredictionInterval iv = predict_interval_cqr(calib, x, &crossed);
      if (crossed && crossing_count) ++*crossing_count;
      return iv;
    }
  }
  throw std::logic_error("predict_interval: unknown method");
}

}  // namespace icp
