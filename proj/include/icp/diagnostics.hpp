#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "icp/classification.hpp"
#include "icp/dataset.hpp"
#include "icp/quantile.hpp"
#include "icp/regression.hpp"
#include "icp/rng.hpp"

namespace icp {

// ---------------------------------------------------------------------------
// Beta coverage law
// ---------------------------------------------------------------------------

/// Beta(a, b) with a = n_cal + 1 - l, b = l, l = floor((n_cal + 1) * alpha):
/// the distribution of coverage conditional on the calibration set. Its mean
/// (n_cal + 1 - l) / (n_cal + 1) is the anchor trial studies compare against.
struct BetaParams {
  double a = 1.0;
  double b = 1.0;
  int l = 1;
  std::size_t n_cal = 0;
  double alpha = 0.0;

  double mean() const noexcept { return a / (a + b); }
};

inline BetaParams beta_params(std::size_t n_cal, double alpha) {
  if (n_cal == 0) throw std::invalid_argument("beta_params: n_cal must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("beta_params: alpha must lie in (0, 1)");
  }
  const double level = static_cast<double>(n_cal + 1) * alpha;
  const int l = static_cast<int>(std::floor(detail::snap_to_integer(level)));
  if (l < 1) {
    throw std::invalid_argument("beta_params: alpha too small for n_cal (l = 0)");
  }
  BetaParams p;
  p.l = l;
  p.n_cal = n_cal;
  p.alpha = alpha;
  p.a = static_cast<double>(n_cal + 1) - static_cast<double>(l);
  p.b = static_cast<double>(l);
  return p;
}

namespace detail {

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Continued fraction for the regularized incomplete beta, modified Lentz
/// evaluation. Converges fast for x < (a+1)/(a+b+2).
/// https://en.wikipedia.org/wiki/Beta_function#Incomplete_beta_function
inline double incomplete_beta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  double c = 1.0;
  double d = 1.0 - (a + b) * x / (a + 1.0);
  if (std::abs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    const double m2 = 2.0 * static_cast<double>(m);
    double num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0));
    d = 1.0 + num * d;
    if (std::abs(d) < tiny) d = tiny;
    c = 1.0 + num / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return h;
}

inline double regularized_incomplete_beta(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta_fn(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(log_front) * incomplete_beta_cf(x, a, b) / a;
  }
  return 1.0 - std::exp(log_front) * incomplete_beta_cf(1.0 - x, b, a) / b;
}

}  // namespace detail

inline double beta_cdf(const BetaParams& params, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("beta_cdf: x outside [0, 1]");
  return detail::regularized_incomplete_beta(x, params.a, params.b);
}

inline double beta_pdf(const BetaParams& params, double x) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("beta_pdf: x outside [0, 1]");
  const double a = params.a, b = params.b;
  if (x == 0.0) {
    if (a > 1.0) return 0.0;
    if (a == 1.0) return b;  // limit of the density at 0
    return std::numeric_limits<double>::infinity();
  }
  if (x == 1.0) {
    if (b > 1.0) return 0.0;
    if (b == 1.0) return a;
    return std::numeric_limits<double>::infinity();
  }
  return std::exp((a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) -
                  detail::log_beta_fn(a, b));
}

/// Inverse CDF by bisection; the CDF is monotone so 200 halvings pin the
/// quantile far below the 1e-10 CDF accuracy.
inline double beta_inv_cdf(const BetaParams& params, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("beta_inv_cdf: p outside [0, 1]");
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (beta_cdf(params, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Coverage measurement
// ---------------------------------------------------------------------------

/// Fraction of truths inside their interval; containment is inclusive at the
/// endpoints.
inline double empirical_coverage(std::span<const PredictionInterval> intervals,
                                 std::span<const double> truths) {
  if (intervals.empty()) throw std::invalid_argument("empirical_coverage: empty input");
  if (intervals.size() != truths.size()) {
    throw std::invalid_argument("empirical_coverage: length mismatch");
  }
  std::size_t covered = 0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (intervals[i].contains(truths[i])) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(intervals.size());
}

inline double empirical_coverage(std::span<const PredictionSet> sets,
                                 std::span<const int> labels) {
  if (sets.empty()) throw std::invalid_argument("empirical_coverage: empty input");
  if (sets.size() != labels.size()) {
    throw std::invalid_argument("empirical_coverage: length mismatch");
  }
  std::size_t covered = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (sets[i].contains(labels[i])) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(sets.size());
}

// ---------------------------------------------------------------------------
// T-trial protocol
// ---------------------------------------------------------------------------

/// Per-trial empirical coverages plus the Beta law they are compared to.
struct TrialDistribution {
  std::vector<double> coverages;
  BetaParams beta;
  std::size_t trial_count = 0;
  std::size_t n_val = 0;

  double mean() const {
    return std::accumulate(coverages.begin(), coverages.end(), 0.0) /
           static_cast<double>(coverages.size());
  }
  double stddev() const {
    const double m = mean();
    double ss = 0.0;
    for (double c : coverages) ss += (c - m) * (c - m);
    return coverages.size() > 1 ? std::sqrt(ss / static_cast<double>(coverages.size() - 1)) : 0.0;
  }
};

struct TrialConfig {
  std::size_t n_cal = 0;
  std::size_t n_val = 0;
  double alpha = 0.1;
};

/// Receives the trial's calibration and validation row indices into the pool
/// and returns that trial's empirical coverage.
using TrialFn =
    std::function<double(std::span<const std::size_t>, std::span<const std::size_t>)>;

/// Redraws cal/val partitions of the pool T times (trial j uses generator
/// seed seed^j), invoking fn for each. The base models are fitted once by the
/// caller and closed over by fn, so only the calibration is repeated. Trials
/// run sequentially in index order; the result is a pure function of
/// (config, pool size, T, seed, fn).
inline TrialDistribution run_trials(const TrialConfig& config, const Dataset& pool, std::size_t t,
                                    std::uint64_t seed, const TrialFn& fn) {
  if (t == 0) throw std::invalid_argument("run_trials: T must be at least 1");
  if (config.n_cal == 0 || config.n_val == 0) {
    throw std::invalid_argument("run_trials: n_cal and n_val must be positive");
  }
  if (pool.size() < config.n_cal + config.n_val) {
    throw std::invalid_argument("run_trials: pool of " + std::to_string(pool.size()) +
                                " is too small for n_cal + n_val = " +
                                std::to_string(config.n_cal + config.n_val));
  }
  TrialDistribution out;
  out.beta = beta_params(config.n_cal, config.alpha);
  out.trial_count = t;
  out.n_val = config.n_val;
  out.coverages.resize(t);

  std::vector<std::size_t> order(pool.size());
  for (std::size_t j = 1; j <= t; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(seed ^ static_cast<std::uint64_t>(j));
    shuffle(order, rng);
    const std::span<const std::size_t> cal(order.data(), config.n_cal);
    const std::span<const std::size_t> val(order.data() + config.n_cal, config.n_val);
    const double coverage = fn(cal, val);
    if (!(coverage >= 0.0 && coverage <= 1.0)) {
      throw std::runtime_error("run_trials: trial coverage outside [0, 1]");
    }
    out.coverages[j - 1] = coverage;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov comparison
// ---------------------------------------------------------------------------

struct KsResult {
  double statistic = 0.0;
  double critical_5pct = 0.0;
  bool pass = false;
  std::string note;
};

/// One-sample KS of the trial coverages against the exact Beta CDF:
/// D = sup |F_T - F|, evaluated at the sample points. The 5% critical value
/// uses the asymptotic 1.358/sqrt(T). Coverage is discrete (at most n_val+1
/// distinct values), so the comparison against a continuous CDF is
/// approximate; the note records that caveat.
inline KsResult ks_statistic_vs_beta(const TrialDistribution& trials) {
  const std::size_t t = trials.coverages.size();
  if (t < 20) throw std::invalid_argument("ks_statistic_vs_beta: T too small for KS (need 20)");
  std::vector<double> sorted = trials.coverages;
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const double cdf = beta_cdf(trials.beta, sorted[i]);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(t) - cdf;
    const double lo = cdf - static_cast<double>(i) / static_cast<double>(t);
    d = std::max({d, hi, lo});
  }
  KsResult out;
  out.statistic = d;
  out.critical_5pct = 1.358 / std::sqrt(static_cast<double>(t));
  out.pass = d < out.critical_5pct;
  out.note = "coverage takes at most " + std::to_string(trials.n_val + 1) +
             " distinct values; KS against a continuous CDF is approximate";
  return out;
}

/// Two-sample variant: compares the trial coverages against T synthetic draws
/// from the fitted Beta (inverse-CDF sampling seeded by `seed`).
inline KsResult ks_two_sample_vs_beta(const TrialDistribution& trials, std::uint64_t seed) {
  const std::size_t t = trials.coverages.size();
  if (t < 20) throw std::invalid_argument("ks_two_sample_vs_beta: T too small for KS (need 20)");
  std::vector<double> a = trials.coverages;
  std::sort(a.begin(), a.end());
  std::vector<double> b(t);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < t; ++i) b[i] = beta_inv_cdf(trials.beta, rng.next_double());
  std::sort(b.begin(), b.end());

  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < t && j < t) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    d = std::max(d, std::abs(static_cast<double>(i) / static_cast<double>(t) -
                             static_cast<double>(j) / static_cast<double>(t)));
  }
  KsResult out;
  out.statistic = d;
  out.critical_5pct = 1.358 * std::sqrt(2.0 / static_cast<double>(t));
  out.pass = d < out.critical_5pct;
  out.note = "two-sample mode against simulated Beta draws";
  return out;
}

// ---------------------------------------------------------------------------
// Histogram and QQ data for external plotting
// ---------------------------------------------------------------------------

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  std::size_t count = 0;
  double beta_pdf_mid = 0.0;
};

inline std::vector<HistogramBin> coverage_histogram(const TrialDistribution& trials,
                                                    std::size_t n_bins = 30) {
  if (n_bins == 0) throw std::invalid_argument("coverage_histogram: need at least one bin");
  const auto [mn_it, mx_it] = std::minmax_element(trials.coverages.begin(),
                                                  trials.coverages.end());
  double lo = *mn_it, hi = *mx_it;
  if (lo == hi) {  // all trials identical; widen to a single sensible bin
    lo = std::max(0.0, lo - 0.5 / static_cast<double>(std::max<std::size_t>(trials.n_val, 1)));
    hi = std::min(1.0, hi + 0.5 / static_cast<double>(std::max<std::size_t>(trials.n_val, 1)));
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  std::vector<HistogramBin> bins(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    bins[i].left = lo + width * static_cast<double>(i);
    bins[i].right = i + 1 == n_bins ? hi : lo + width * static_cast<double>(i + 1);
    const double mid = std::clamp(0.5 * (bins[i].left + bins[i].right), 0.0, 1.0);
    bins[i].beta_pdf_mid = beta_pdf(trials.beta, mid);
  }
  for (double c : trials.coverages) {
    auto idx = static_cast<std::size_t>((c - lo) / width);
    if (idx >= n_bins) idx = n_bins - 1;
    ++bins[idx].count;
  }
  return bins;
}

struct QqPair {
  double level = 0.0;
  double empirical = 0.0;
  double theoretical = 0.0;
};

/// Evenly spaced quantile pairs (empirical order statistic vs Beta inverse
/// CDF) at levels i/(n_levels+1).
inline std::vector<QqPair> qq_pairs(const TrialDistribution& trials, std::size_t n_levels = 99) {
  if (n_levels == 0) throw std::invalid_argument("qq_pairs: need at least one level");
  std::vector<double> sorted = trials.coverages;
  std::sort(sorted.begin(), sorted.end());
  const auto t = static_cast<double>(sorted.size());
  std::vector<QqPair> out(n_levels);
  for (std::size_t i = 1; i <= n_levels; ++i) {
    const double p = static_cast<double>(i) / static_cast<double>(n_levels + 1);
    auto rank = static_cast<std::size_t>(std::ceil(detail::snap_to_integer(p * t)));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    out[i - 1] = {p, sorted[rank - 1], beta_inv_cdf(trials.beta, p)};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Single-run reports
// ---------------------------------------------------------------------------

/// Summary of one validation pass. Width fields are set for regression,
/// set-size fields for classification; crossing_count only for CQR.
struct CoverageReport {
  double empirical_coverage = 0.0;
  std::size_t n_val = 0;
  std::optional<double> mean_width;
  std::optional<double> width_stddev;
  std::optional<double> min_width;
  std::optional<double> max_width;
  std::optional<double> mean_set_size;
  std::optional<double> set_size_stddev;
  std::optional<std::vector<std::size_t>> set_size_hist;
  std::optional<std::vector<double>> per_class_coverage;
  std::optional<double> empty_set_rate;
  std::optional<std::size_t> crossing_count;
};

namespace detail {

inline std::pair<double, double> mean_sd(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  return {mean, sd};
}

}  // namespace detail

/// Width statistics come from the interval endpoints unless the method's
/// width is a known constant (the naive method's 2*q_hat), in which case the
/// constant is reported directly rather than re-derived from rounded
/// endpoints.
inline CoverageReport summarize_regression(std::span<const PredictionInterval> intervals,
                                           std::span<const double> truths,
                                           std::optional<double> constant_width = std::nullopt,
                                           std::optional<std::size_t> crossing_count = std::nullopt) {
  CoverageReport report;
  report.empirical_coverage = empirical_coverage(intervals, truths);
  report.n_val = intervals.size();
  if (constant_width) {
    report.mean_width = *constant_width;
    report.width_stddev = 0.0;
    report.min_width = *constant_width;
    report.max_width = *constant_width;
  } else {
    std::vector<double> widths(intervals.size());
    for (std::size_t i = 0; i < intervals.size(); ++i) widths[i] = intervals[i].width();
    const auto [mean, sd] = detail::mean_sd(widths);
    const auto [mn, mx] = std::minmax_element(widths.begin(), widths.end());
    report.mean_width = mean;
    report.width_stddev = sd;
    report.min_width = *mn;
    report.max_width = *mx;
  }
  report.crossing_count = crossing_count;
  return report;
}

inline CoverageReport summarize_classification(std::span<const PredictionSet> sets,
                                               std::span<const int> labels, int n_classes) {
  CoverageReport report;
  report.empirical_coverage = empirical_coverage(sets, labels);
  report.n_val = sets.size();
  std::vector<double> sizes(sets.size());
  std::size_t empty_count = 0;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    sizes[i] = static_cast<double>(sets[i].size());
    if (sets[i].empty()) ++empty_count;
  }
  const auto [mean, sd] = detail::mean_sd(sizes);
  report.mean_set_size = mean;
  report.set_size_stddev = sd;
  report.set_size_hist = set_size_histogram(sets, n_classes);
  report.per_class_coverage = per_class_coverage(sets, labels, n_classes);
  report.empty_set_rate = static_cast<double>(empty_count) / static_cast<double>(sets.size());
  return report;
}

}  // namespace icp
