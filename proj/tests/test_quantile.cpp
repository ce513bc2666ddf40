#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "icp/quantile.hpp"
#include "icp/rng.hpp"

using Catch::Approx;

namespace {

// Independent brute-force oracle: full sort plus an integer scan for the
// smallest k with k >= (n+1)(1-alpha), no ceil and no nth_element.
double oracle_quantile(std::vector<double> scores, double alpha) {
  const double level = static_cast<double>(scores.size() + 1) * (1.0 - alpha);
  std::size_t rank = scores.size() + 1;
  for (std::size_t k = 1; k <= scores.size(); ++k) {
    if (static_cast<double>(k) + 1e-9 >= level) {
      rank = k;
      break;
    }
  }
  if (rank > scores.size()) return std::numeric_limits<double>::infinity();
  std::sort(scores.begin(), scores.end());
  return scores[rank - 1];
}

}  // namespace

TEST_CASE("conformal_rank worked values") {
  // ceil(127 * 0.9) = ceil(114.3) = 115
  REQUIRE(icp::conformal_rank(126, 0.1) == 115);
  // (9+1) * 0.5 = 5 exactly; the snap guard must keep it at 5
  REQUIRE(icp::conformal_rank(9, 0.5) == 5);
  // ceil(6 * 0.9) = 6 > 5: degenerate rank
  REQUIRE(icp::conformal_rank(5, 0.1) == 6);
}

TEST_CASE("conformal_rank snap guard against floating-point drift") {
  // (35+1)*(1 - 1/3) evaluates to 24.000000000000004 in doubles; a bare ceil
  // would overshoot the rank to 25
  REQUIRE(icp::conformal_rank(35, 1.0 / 3.0) == 24);
  REQUIRE(icp::conformal_rank(99, 0.5) == 50);
}

TEST_CASE("conformal_rank rejects bad input") {
  REQUIRE_THROWS_AS(icp::conformal_rank(0, 0.1), std::invalid_argument);
  REQUIRE_THROWS_AS(icp::conformal_rank(10, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(icp::conformal_rank(10, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(icp::conformal_rank(10, -0.3), std::invalid_argument);
}

TEST_CASE("conformal_quantile worked values") {
  std::vector<double> ten = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const auto q = icp::conformal_quantile(ten, 0.5);
  REQUIRE(q.rank == 6);
  REQUIRE(q.q_hat == 6.0);
  REQUIRE_FALSE(q.degenerate);

  std::vector<double> constant(17, 3.25);
  REQUIRE(icp::conformal_quantile(constant, 0.3).q_hat == 3.25);

  std::vector<double> three = {3, 1, 2};
  const auto degenerate = icp::conformal_quantile(three, 0.05);
  REQUIRE(degenerate.rank == 4);
  REQUIRE(degenerate.degenerate);
  REQUIRE(std::isinf(degenerate.q_hat));
}

TEST_CASE("conformal_quantile rejects bad input") {
  const std::vector<double> empty;
  REQUIRE_THROWS_AS(icp::conformal_quantile(empty, 0.1), std::invalid_argument);
  std::vector<double> with_nan = {1.0, std::nan(""), 2.0};
  REQUIRE_THROWS_AS(icp::conformal_quantile(with_nan, 0.1), std::invalid_argument);
  std::vector<double> with_inf = {1.0, std::numeric_limits<double>::infinity()};
  REQUIRE_THROWS_AS(icp::conformal_quantile(with_inf, 0.1), std::invalid_argument);
}

TEST_CASE("conformal_quantile is permutation invariant") {
  icp::SplitMix64 rng(99);
  std::vector<double> scores(37);
  for (double& s : scores) s = rng.next_double() * 10.0;
  const double base = icp::conformal_quantile(scores, 0.17).q_hat;
  for (int rep = 0; rep < 20; ++rep) {
    icp::shuffle(scores, rng);
    REQUIRE(icp::conformal_quantile(scores, 0.17).q_hat == base);
  }
}

TEST_CASE("conformal_quantile is non-increasing in alpha") {
  icp::SplitMix64 rng(7);
  std::vector<double> scores(50);
  for (double& s : scores) s = rng.next_normal();
  double previous = std::numeric_limits<double>::infinity();
  for (double alpha : {0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.8}) {
    const double q = icp::conformal_quantile(scores, alpha).q_hat;
    REQUIRE(q <= previous);
    previous = q;
  }
}

TEST_CASE("conformal_quantile matches the brute-force oracle on 1000 instances") {
  icp::SplitMix64 rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng.next_below(50);
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.next_normal() * 5.0;
    const double alpha = 0.01 + 0.98 * rng.next_double();
    const auto got = icp::conformal_quantile(scores, alpha);
    const double expected = oracle_quantile(scores, alpha);
    if (std::isinf(expected)) {
      REQUIRE(got.degenerate);
      REQUIRE(std::isinf(got.q_hat));
    } else {
      REQUIRE(got.q_hat == expected);
    }
  }
}

TEST_CASE("adding a score above q_hat never decreases q_hat") {
  icp::SplitMix64 rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.next_below(40);
    std::vector<double> scores(n);
    for (double& s : scores) s = rng.next_normal();
    const double alpha = 0.05 + 0.9 * rng.next_double();
    const auto before = icp::conformal_quantile(scores, alpha);
    if (before.degenerate) continue;
    scores.push_back(before.q_hat + 1.0 + rng.next_double());
    const auto after = icp::conformal_quantile(scores, alpha);
    if (!after.degenerate) REQUIRE(after.q_hat >= before.q_hat);
  }
}
