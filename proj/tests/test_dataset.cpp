#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "icp/dataset.hpp"

using Catch::Approx;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_CASE("load_csv maps a small regression file") {
  const auto path = temp_file("icp_small.csv");
  write_file(path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  const auto ds = icp::load_csv(path.string(), "y", icp::Task::regression);
  REQUIRE(ds.size() == 3);
  REQUIRE(ds.dim() == 2);
  REQUIRE(ds.features(1, 0) == 4.0);
  REQUIRE(ds.targets == std::vector<double>{3, 6, 9});
  REQUIRE(ds.feature_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("load_csv names the offending cell") {
  const auto path = temp_file("icp_blank.csv");
  write_file(path, "a,b,y\n1,,3\n");
  try {
    icp::load_csv(path.string(), "y", icp::Task::regression);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("row 1") != std::string::npos);
    REQUIRE(msg.find("'b'") != std::string::npos);
  }

  write_file(path, "a,b,y\n1,2,3\n4,oops,6\n");
  try {
    icp::load_csv(path.string(), "y", icp::Task::regression);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("oops") != std::string::npos);
    REQUIRE(msg.find("row 2") != std::string::npos);
  }
}

TEST_CASE("load_csv error paths") {
  REQUIRE_THROWS_AS(icp::load_csv("/nonexistent/file.csv", "y", icp::Task::regression),
                    std::runtime_error);

  const auto path = temp_file("icp_missing_col.csv");
  write_file(path, "a,b\n1,2\n");
  REQUIRE_THROWS_AS(icp::load_csv(path.string(), "y", icp::Task::regression),
                    std::runtime_error);

  // non-integer class label under the classification task
  write_file(path, "a,label\n1,0\n2,1.5\n");
  REQUIRE_THROWS_AS(icp::load_csv(path.string(), "label", icp::Task::classification),
                    std::runtime_error);
}

TEST_CASE("load_csv handles a housing-shaped file: 506 rows, 13 features") {
  const auto path = temp_file("icp_housing_shape.csv");
  std::string text;
  for (int c = 1; c <= 13; ++c) text += "f" + std::to_string(c) + ",";
  text += "MEDV\n";
  icp::SplitMix64 rng(1);
  for (int i = 0; i < 506; ++i) {
    for (int c = 0; c < 13; ++c) text += icp::detail::format_double(rng.next_double()) + ",";
    text += icp::detail::format_double(20.0 + 10.0 * rng.next_double()) + "\n";
  }
  write_file(path, text);
  const auto ds = icp::load_csv(path.string(), "MEDV", icp::Task::regression);
  REQUIRE(ds.size() == 506);
  REQUIRE(ds.dim() == 13);
  REQUIRE(ds.target_name == "MEDV");
}

TEST_CASE("save_csv then load_csv round-trips the dataset exactly") {
  const auto data = icp::make_synthetic_regression(50, icp::RegressionNoise::heteroscedastic(), 3);
  const auto path = temp_file("icp_roundtrip.csv");
  icp::save_csv(data, path.string());
  const auto loaded = icp::load_csv(path.string(), "y", icp::Task::regression);
  REQUIRE(loaded.size() == data.size());
  REQUIRE(loaded.targets == data.targets);
  REQUIRE(loaded.features.data() == data.features.data());

  const auto blobs = icp::make_synthetic_classification(120, 4, 9);
  icp::save_csv(blobs, path.string());
  const auto loaded_cls = icp::load_csv(path.string(), "label", icp::Task::classification);
  REQUIRE(loaded_cls.targets == blobs.targets);
  REQUIRE(loaded_cls.n_classes == 4);
}

TEST_CASE("split produces the documented 506-point part sizes") {
  const auto data = icp::make_synthetic_regression(506, icp::RegressionNoise::homoscedastic(1.0), 11);
  for (std::uint64_t seed : {0ull, 1ull, 42ull, 1234567ull}) {
    const auto parts = icp::split(data, {0.5, 0.25, 0.25}, seed);
    REQUIRE(parts.parts[0].size() == 253);
    REQUIRE(parts.parts[1].size() == 126);
    REQUIRE(parts.parts[2].size() == 127);
  }
}

TEST_CASE("split of 4 points is exact") {
  const auto data = icp::make_synthetic_regression(10, icp::RegressionNoise::homoscedastic(1.0), 1);
  const auto idx = std::vector<std::size_t>{0, 1, 2, 3};
  const auto four = icp::subset(data, idx);
  const auto parts = icp::split(four, {0.5, 0.25, 0.25}, 5);
  REQUIRE(parts.parts[0].size() == 2);
  REQUIRE(parts.parts[1].size() == 1);
  REQUIRE(parts.parts[2].size() == 1);
}

TEST_CASE("split is deterministic and partitions exactly") {
  const auto data = icp::make_synthetic_regression(257, icp::RegressionNoise::homoscedastic(2.0), 7);
  const auto first = icp::split(data, {0.5, 0.25, 0.25}, 99);
  const auto second = icp::split(data, {0.5, 0.25, 0.25}, 99);
  REQUIRE(first.parts == second.parts);

  icp::SplitMix64 rng(31);
  for (int rep = 0; rep < 25; ++rep) {
    const bool four_way = rng.next_below(2) == 1;
    std::vector<double> fractions;
    if (four_way) {
      fractions = {0.4, 0.2, 0.2, 0.2};
    } else {
      const double a = 0.2 + 0.4 * rng.next_double();
      const double b = (1.0 - a) * (0.3 + 0.4 * rng.next_double());
      fractions = {a, b, 1.0 - a - b};
    }
    const auto parts = icp::split(data, fractions, rng.next());
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& part : parts.parts) {
      REQUIRE_FALSE(part.empty());
      for (std::size_t idx : part) {
        REQUIRE(seen.insert(idx).second);  // pairwise disjoint
        REQUIRE(idx < data.size());
      }
      total += part.size();
    }
    REQUIRE(total == data.size());  // exhaustive
  }
}

TEST_CASE("split rejects bad fraction lists") {
  const auto data = icp::make_synthetic_regression(100, icp::RegressionNoise::homoscedastic(1.0), 2);
  REQUIRE_THROWS_AS(icp::split(data, {0.5, 0.3, 0.3}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(icp::split(data, {0.7, 0.3}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(icp::split(data, {0.999, 0.0005, 0.0005}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(icp::split(data, {0.5, -0.25, 0.75}, 1), std::invalid_argument);
}

TEST_CASE("synthetic regression with zero noise sits exactly on the line") {
  const auto data = icp::make_synthetic_regression(100, icp::RegressionNoise::homoscedastic(0.0), 8);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double x = data.features(i, 0);
    REQUIRE(data.targets[i] == 2.0 * x + 1.0);
    REQUIRE(x >= 0.0);
    REQUIRE(x <= 10.0);
  }
}

TEST_CASE("heteroscedastic noise magnitude grows with x") {
  const auto data = icp::make_synthetic_regression(2000, icp::RegressionNoise::heteroscedastic(), 13);
  std::vector<double> xs(data.size()), abs_residuals(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    xs[i] = data.features(i, 0);
    abs_residuals[i] = std::abs(data.targets[i] - (2.0 * xs[i] + 1.0));
  }
  REQUIRE(correlation(xs, abs_residuals) > 0.3);
}

TEST_CASE("synthetic generators are pure functions of their arguments") {
  const auto a = icp::make_synthetic_regression(300, icp::RegressionNoise::heteroscedastic(), 77);
  const auto b = icp::make_synthetic_regression(300, icp::RegressionNoise::heteroscedastic(), 77);
  REQUIRE(a.features.data() == b.features.data());
  REQUIRE(a.targets == b.targets);

  const auto c = icp::make_synthetic_classification(400, 6, 123);
  const auto d = icp::make_synthetic_classification(400, 6, 123);
  REQUIRE(c.features.data() == d.features.data());
  REQUIRE(c.targets == d.targets);
}

TEST_CASE("classification blobs span all classes") {
  const auto data = icp::make_synthetic_classification(1000, 10, 4);
  std::set<int> seen;
  for (std::size_t i = 0; i < data.size(); ++i) seen.insert(data.label(i));
  REQUIRE(seen.size() == 10);
  REQUIRE(data.n_classes == 10);
}

TEST_CASE("generator preconditions") {
  REQUIRE_THROWS_AS(icp::make_synthetic_regression(5, icp::RegressionNoise::homoscedastic(1.0), 1),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(icp::make_synthetic_classification(19, 2, 1), std::invalid_argument);
  icp::BlobSpec bad;
  bad.priors = {0.5, 0.4};  // does not sum to 1 for K=3
  REQUIRE_THROWS_AS(icp::make_synthetic_classification(100, 3, bad, 1), std::invalid_argument);
}

TEST_CASE("dataset invariants are enforced") {
  icp::Dataset ds;
  ds.features = icp::Matrix(2, 1);
  ds.targets = {1.0};  // row count mismatch
  REQUIRE_THROWS_AS(ds.validate(), std::invalid_argument);

  ds.targets = {1.0, std::nan("")};
  REQUIRE_THROWS_AS(ds.validate(), std::invalid_argument);

  ds.targets = {0.0, 5.0};
  ds.task = icp::Task::classification;
  ds.n_classes = 3;  // label 5 outside 0..2
  REQUIRE_THROWS_AS(ds.validate(), std::invalid_argument);
}
