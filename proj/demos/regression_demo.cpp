// Walks the three regression methods over heteroscedastic synthetic data and
// prints coverage and width summaries side by side.

#include <cstdio>

#include "icp/icp.hpp"

int main() {
  const std::uint64_t seed = 42;
  const double alpha = 0.1;
  const auto data =
      icp::make_synthetic_regression(2000, icp::RegressionNoise::heteroscedastic(), seed);

  // naive and CQR share a 3-way split; CRF needs its own cal1 part
  const auto parts3 = icp::split(data, {0.5, 0.25, 0.25}, seed);
  const auto parts4 = icp::split(data, {0.4, 0.2, 0.2, 0.2}, seed);

  const auto train3 = icp::subset(data, parts3.parts[0]);
  const auto cal3 = icp::subset(data, parts3.parts[1]);
  const auto val3 = icp::subset(data, parts3.parts[2]);

  std::printf("%-8s %10s %12s %12s\n", "method", "coverage", "mean_width", "q_hat");

  {
    const auto f = icp::knn_fit(train3, 5);
    const auto calib = icp::calibrate_naive(f, cal3, alpha);
    std::vector<icp::PredictionInterval> intervals(val3.size());
    for (std::size_t i = 0; i < val3.size(); ++i) {
      intervals[i] = icp::predict_interval_naive(calib, val3.point(i));
    }
    const auto report = icp::summarize_regression(intervals, val3.targets,
                                                  2.0 * calib.quantile.q_hat);
    std::printf("%-8s %10.4f %12.4f %12.4f\n", "naive", report.empirical_coverage,
                *report.mean_width, calib.quantile.q_hat);
  }

  {
    const auto train = icp::subset(data, parts4.parts[0]);
    const auto cal1 = icp::subset(data, parts4.parts[1]);
    const auto cal2 = icp::subset(data, parts4.parts[2]);
    const auto val = icp::subset(data, parts4.parts[3]);
    const auto f = icp::knn_fit(train, 5);
    const auto r = icp::fit_residual_model(f, cal1, 5);
    const auto calib = icp::calibrate_crf(f, r, cal2, alpha);
    std::vector<icp::PredictionInterval> intervals(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
      intervals[i] = icp::predict_interval_crf(calib, val.point(i));
    }
    const auto report = icp::summarize_regression(intervals, val.targets);
    std::printf("%-8s %10.4f %12.4f %12.4f\n", "crf", report.empirical_coverage,
                *report.mean_width, calib.quantile.q_hat);
  }

  {
    const auto t_lo = icp::quantile_fit(train3, alpha / 2, 2000, 0.5, seed);
    const auto t_hi = icp::quantile_fit(train3, 1 - alpha / 2, 2000, 0.5, seed);
    const auto calib = icp::calibrate_cqr(t_lo, t_hi, cal3, alpha);
    std::size_t crossings = 0;
    std::vector<icp::PredictionInterval> intervals(val3.size());
    for (std::size_t i = 0; i < val3.size(); ++i) {
      intervals[i] = icp::predict_interval(calib, val3.point(i), &crossings);
    }
    const auto report = icp::summarize_regression(intervals, val3.targets, std::nullopt, crossings);
    std::printf("%-8s %10.4f %12.4f %12.4f  (crossings: %zu)\n", "cqr",
                report.empirical_coverage, *report.mean_width, calib.quantile.q_hat, crossings);
  }
  return 0;
}
