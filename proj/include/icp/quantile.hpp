#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace icp {

/// The calibrated threshold shared by every method: the rank-th smallest of
/// n_cal scores, where rank = ceil((n_cal + 1) * (1 - alpha)). When rank
/// exceeds n_cal no order statistic exists; q_hat is then the +infinity
/// sentinel and downstream constructors emit the trivial interval or set.
struct ConformalQuantile {
  double q_hat = 0.0;
  double alpha = 0.0;
  std::size_t n_cal = 0;
  std::size_t rank = 0;     // 1-indexed order statistic
  bool degenerate = false;  // rank > n_cal <=> q_hat is +infinity
};

namespace detail {

/// Snap-to-integer guard. (n+1)*(1-alpha) is frequently integral in real
/// arithmetic but sits a few ulp above the integer in binary floating point,
/// where a bare ceil would overshoot the rank by one.
inline double snap_to_integer(double x, double tol = 1e-9) {
  const double nearest = std::round(x);
  return std::abs(x - nearest) < tol ? nearest : x;
}

}  // namespace detail

inline std::size_t conformal_rank(std::size_t n_cal, double alpha) {
  if (n_cal == 0) throw std::invalid_argument("conformal_rank: n_cal must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("conformal_rank: alpha must lie in (0, 1)");
  }
  const double level = static_cast<double>(n_cal + 1) * (1.0 - alpha);
  return static_cast<std::size_t>(std::ceil(detail::snap_to_integer(level)));
}

/// Order-statistic ("higher") quantile, no interpolation: the coverage
/// guarantee is a statement about the ceil((n+1)(1-alpha))-th smallest score
/// and interpolated variants break it.
inline ConformalQuantile conformal_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw std::invalid_argument("conformal_quantile: empty score vector");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("conformal_quantile: non-finite score");
  }
  const std::size_t n = scores.size();
  const std::size_t rank = conformal_rank(n, alpha);

  ConformalQuantile q;
  q.alpha = alpha;
  q.n_cal = n;
  q.rank = rank;
  q.degenerate = rank > n;
  if (q.degenerate) {
    q.q_hat = std::numeric_limits<double>::infinity();
  } else {
    std::vector<double> sorted(scores.begin(), scores.end());
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                     sorted.end());
    q.q_hat = sorted[rank - 1];
  }
  return q;
}

inline ConformalQuantile conformal_quantile(const std::vector<double>& scores, double alpha) {
  return conformal_quantile(std::span<const double>(scores), alpha);
}

}  // namespace icp
