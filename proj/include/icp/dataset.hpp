#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "icp/matrix.hpp"
#include "icp/rng.hpp"

namespace icp {

enum class Task { regression, classification };

inline const char* task_name(Task t) {
  return t == Task::regression ? "regression" : "classification";
}

inline Task parse_task(std::string_view name) {
  if (name == "regression") return Task::regression;
  if (name == "classification") return Task::classification;
  throw std::invalid_argument("unknown task '" + std::string(name) + "'");
}

/// Feature matrix plus targets. Regression targets are reals; classification
/// targets are class indices 0..n_classes-1 stored as integral doubles.
struct Dataset {
  Matrix features;
  std::vector<double> targets;
  Task task = Task::regression;
  int n_classes = 0;  // classification only
  std::vector<std::string> feature_names;
  std::string target_name = "y";

  std::size_t size() const noexcept { return targets.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  std::span<const double> point(std::size_t i) const { return features.row(i); }
  int label(std::size_t i) const { return static_cast<int>(targets[i]); }

  std::vector<int> class_labels() const {
    std::vector<int> out(targets.size());
    for (std::size_t i = 0; i < targets.size(); ++i) out[i] = label(i);
    return out;
  }

  void validate() const {
    if (features.rows() != targets.size()) {
      throw std::invalid_argument("Dataset: feature row count does not match target length");
    }
    if (!features.all_finite()) {
      throw std::invalid_argument("Dataset: non-finite feature value");
    }
    for (double t : targets) {
      if (!std::isfinite(t)) throw std::invalid_argument("Dataset: non-finite target value");
    }
    if (task == Task::classification) {
      if (n_classes < 2) throw std::invalid_argument("Dataset: classification needs n_classes >= 2");
      for (double t : targets) {
        if (t != std::floor(t) || t < 0.0 || t >= static_cast<double>(n_classes)) {
          throw std::invalid_argument("Dataset: class label outside 0.." +
                                      std::to_string(n_classes - 1));
        }
      }
    }
    if (!feature_names.empty() && feature_names.size() != features.cols()) {
      throw std::invalid_argument("Dataset: feature name count does not match columns");
    }
  }
};

/// Disjoint index sets covering 0..N-1: three parts (train/cal/val) or four
/// (train/cal1/cal2/val). Indices within each part are sorted ascending.
struct SplitIndices {
  std::vector<std::vector<std::size_t>> parts;
  std::uint64_t seed = 0;
};

namespace detail {

/// Largest-remainder apportionment of `total` over `weights`. Leftover units
/// go to the largest fractional remainders; remainder ties favor later parts
/// (so a 506-point 0.5/0.25/0.25 split yields 253/126/127).
inline std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights) {
  const std::size_t k = weights.size();
  std::vector<std::size_t> counts(k);
  std::vector<double> remainders(k);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double exact = static_cast<double>(total) * weights[i];
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (remainders[a] != remainders[b]) return remainders[a] > remainders[b];
    return a > b;
  });
  for (std::size_t r = 0; assigned < total; ++r, ++assigned) counts[order[r % k]] += 1;
  return counts;
}

inline std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

inline double parse_cell(std::string_view cell, std::size_t data_row, const std::string& column) {
  // Trim spaces and a trailing CR from CRLF files.
  while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
  while (!cell.empty() &&
         (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) {
    cell.remove_suffix(1);
  }
  const std::string where = "row " + std::to_string(data_row) + ", column '" + column + "'";
  if (cell.empty()) throw std::runtime_error("load_csv: empty cell at " + where);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw std::runtime_error("load_csv: cannot parse '" + std::string(cell) + "' at " + where);
  }
  if (!std::isfinite(value)) throw std::runtime_error("load_csv: non-finite value at " + where);
  return value;
}

inline std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

/// Reads a comma-separated file with a mandatory header row, '.' decimal
/// separator and purely numeric cells. The named target column becomes the
/// target; all other columns become features in header order.
inline Dataset load_csv(const std::string& path, const std::string& target_column, Task task) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_csv: '" + path + "' is empty");
  auto header_cells = detail::split_line(line);
  std::vector<std::string> columns;
  columns.reserve(header_cells.size());
  for (auto cell : header_cells) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
    columns.emplace_back(cell);
  }
  const auto target_it = std::find(columns.begin(), columns.end(), target_column);
  if (target_it == columns.end()) {
    throw std::runtime_error("load_csv: target column '" + target_column + "' not found in '" +
                             path + "'");
  }
  const std::size_t target_idx = static_cast<std::size_t>(target_it - columns.begin());

  std::vector<double> values;  // row-major, features only
  std::vector<double> targets;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
    ++data_row;
    const auto cells = detail::split_line(line);
    if (cells.size() != columns.size()) {
      throw std::runtime_error("load_csv: row " + std::to_string(data_row) + " has " +
                               std::to_string(cells.size()) + " cells, expected " +
                               std::to_string(columns.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const double v = detail::parse_cell(cells[c], data_row, columns[c]);
      if (c == target_idx) {
        targets.push_back(v);
      } else {
        values.push_back(v);
      }
    }
  }
  if (targets.empty()) throw std::runtime_error("load_csv: '" + path + "' has no data rows");

  Dataset ds;
  ds.task = task;
  ds.target_name = target_column;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (c != target_idx) ds.feature_names.push_back(columns[c]);
  }
  const std::size_t n_features = columns.size() - 1;
  ds.features = Matrix(targets.size(), n_features);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (std::size_t c = 0; c < n_features; ++c) ds.features(i, c) = values[i * n_features + c];
  }
  ds.targets = std::move(targets);

  if (task == Task::classification) {
    int max_label = 0;
    for (std::size_t i = 0; i < ds.targets.size(); ++i) {
      const double t = ds.targets[i];
      if (t != std::floor(t)) {
        throw std::runtime_error("load_csv: non-integer class label " + detail::format_double(t) +
                                 " at row " + std::to_string(i + 1));
      }
      if (t < 0.0) {
        throw std::runtime_error("load_csv: negative class label at row " + std::to_string(i + 1));
      }
      max_label = std::max(max_label, static_cast<int>(t));
    }
    ds.n_classes = std::max(max_label + 1, 2);
  }
  ds.validate();
  return ds;
}

/// Writes the dataset back out in the same CSV dialect load_csv reads.
/// Doubles are printed shortest-round-trip, so save followed by load
/// reproduces every value exactly.
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_csv: cannot open '" + path + "' for writing");
  std::string text;
  for (std::size_t c = 0; c < ds.dim(); ++c) {
    text += ds.feature_names.empty() ? ("x" + std::to_string(c + 1)) : ds.feature_names[c];
    text += ',';
  }
  text += ds.target_name;
  text += '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t c = 0; c < ds.dim(); ++c) {
      text += detail::format_double(ds.features(i, c));
      text += ',';
    }
    if (ds.task == Task::classification) {
      text += std::to_string(ds.label(i));
    } else {
      text += detail::format_double(ds.targets[i]);
    }
    text += '\n';
  }
  out << text;
}

/// Deterministic split into 3 (train/cal/val) or 4 (train/cal1/cal2/val)
/// disjoint parts. A SplitMix64-driven Fisher-Yates shuffle of 0..N-1 is
/// sliced into consecutive runs sized by largest-remainder apportionment.
inline SplitIndices split(const Dataset& ds, const std::vector<double>& fractions,
                          std::uint64_t seed) {
  if (fractions.size() != 3 && fractions.size() != 4) {
    throw std::invalid_argument("split: expected 3 or 4 fractions, got " +
                                std::to_string(fractions.size()));
  }
  double sum = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw std::invalid_argument("split: fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("split: fractions sum to " + detail::format_double(sum) +
                                ", expected 1");
  }
  const std::size_t n = ds.size();
  const auto sizes = detail::apportion(n, fractions);
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) {
      throw std::invalid_argument("split: part " + std::to_string(i) + " would be empty");
    }
  }

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  SplitMix64 rng(seed);
  shuffle(order, rng);

  SplitIndices out;
  out.seed = seed;
  std::size_t offset = 0;
  for (const std::size_t part_size : sizes) {
    std::vector<std::size_t> part(order.begin() + static_cast<std::ptrdiff_t>(offset),
                                  order.begin() + static_cast<std::ptrdiff_t>(offset + part_size));
    std::sort(part.begin(), part.end());
    out.parts.push_back(std::move(part));
    offset += part_size;
  }
  return out;
}

/// Row subset preserving task metadata (classification keeps the parent's
/// class count even if some class is absent from the subset).
inline Dataset subset(const Dataset& ds, std::span<const std::size_t> indices) {
  Dataset out;
  out.task = ds.task;
  out.n_classes = ds.n_classes;
  out.feature_names = ds.feature_names;
  out.target_name = ds.target_name;
  out.features = Matrix(indices.size(), ds.dim());
  out.targets.resize(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t src = indices[i];
    if (src >= ds.size()) throw std::out_of_range("subset: index out of range");
    for (std::size_t c = 0; c < ds.dim(); ++c) out.features(i, c) = ds.features(src, c);
    out.targets[i] = ds.targets[src];
  }
  return out;
}

struct RegressionNoise {
  enum class Kind { homoscedastic, heteroscedastic };
  Kind kind = Kind::homoscedastic;
  double sigma = 1.0;  // homoscedastic scale; the heteroscedastic law is fixed

  static RegressionNoise homoscedastic(double sigma) {
    return RegressionNoise{Kind::homoscedastic, sigma};
  }
  static RegressionNoise heteroscedastic() {
    return RegressionNoise{Kind::heteroscedastic, 0.0};
  }
};

/// 1-D synthetic regression data with known noise structure:
///   x ~ U(0, 10)
///   homoscedastic:   y = 2x + 1 + sigma * eps
///   heteroscedastic: y = 2x + 1 + (0.2 + 0.3 x) * eps,  eps ~ N(0, 1)
/// Draw order per point: x first, then eps, from a single SplitMix64(seed)
/// stream, so the generator is a pure function of (n, noise, seed).
inline Dataset make_synthetic_regression(std::size_t n, RegressionNoise noise,
                                         std::uint64_t seed) {
  if (n < 10) throw std::invalid_argument("make_synthetic_regression: n must be at least 10");
  Dataset ds;
  ds.task = Task::regression;
  ds.feature_names = {"x1"};
  ds.target_name = "y";
  ds.features = Matrix(n, 1);
  ds.targets.resize(n);
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = 10.0 * rng.next_double();
    const double eps = rng.next_normal();
    const double scale =
        noise.kind == RegressionNoise::Kind::homoscedastic ? noise.sigma : 0.2 + 0.3 * x;
    ds.features(i, 0) = x;
    ds.targets[i] = 2.0 * x + 1.0 + scale * eps;
  }
  ds.validate();
  return ds;
}

/// Gaussian blob layout: class k is centered on a circle of the given radius
/// at angle 2*pi*k/K with identity covariance. Unequal priors stress-test
/// class-balance behavior; counts come from largest-remainder apportionment
/// so every class is always present.
struct BlobSpec {
  std::vector<double> priors;  // empty = equal priors
  double radius = 5.0;
};

inline Dataset make_synthetic_classification(std::size_t n, int n_classes, const BlobSpec& spec,
                                             std::uint64_t seed) {
  if (n_classes < 2) throw std::invalid_argument("make_synthetic_classification: need K >= 2");
  if (n < 10 * static_cast<std::size_t>(n_classes)) {
    throw std::invalid_argument("make_synthetic_classification: n must be at least 10*K");
  }
  std::vector<double> priors = spec.priors;
  if (priors.empty()) {
    priors.assign(static_cast<std::size_t>(n_classes), 1.0 / n_classes);
  }
  if (priors.size() != static_cast<std::size_t>(n_classes)) {
    throw std::invalid_argument("make_synthetic_classification: priors size must equal K");
  }
  double sum = 0.0;
  for (double p : priors) {
    if (p <= 0.0) throw std::invalid_argument("make_synthetic_classification: priors must be positive");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("make_synthetic_classification: priors must sum to 1");
  }
  const auto counts = detail::apportion(n, priors);
  for (int k = 0; k < n_classes; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw std::invalid_argument("make_synthetic_classification: class " + std::to_string(k) +
                                  " receives no points under these priors");
    }
  }

  Dataset ds;
  ds.task = Task::classification;
  ds.n_classes = n_classes;
  ds.feature_names = {"x1", "x2"};
  ds.target_name = "label";
  ds.features = Matrix(n, 2);
  ds.targets.resize(n);
  SplitMix64 rng(seed);
  std::size_t row = 0;
  for (int k = 0; k < n_classes; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / n_classes;
    const double mx = spec.radius * std::cos(angle);
    const double my = spec.radius * std::sin(angle);
    for (std::size_t i = 0; i < counts[static_cast<std::size_t>(k)]; ++i, ++row) {
      ds.features(row, 0) = mx + rng.next_normal();
      ds.features(row, 1) = my + rng.next_normal();
      ds.targets[row] = static_cast<double>(k);
    }
  }
  ds.validate();
  return ds;
}

inline Dataset make_synthetic_classification(std::size_t n, int n_classes, std::uint64_t seed) {
  return make_synthetic_classification(n, n_classes, BlobSpec{}, seed);
}

}  // namespace icp
