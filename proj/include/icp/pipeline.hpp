#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "icp/classification.hpp"
#include "icp/dataset.hpp"
#include "icp/diagnostics.hpp"
#include "icp/models.hpp"
#include "icp/regression.hpp"

namespace icp {

using ordered_json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

enum class Method { naive_reg, crf, cqr, naive_cls, class_balanced, aps };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::naive_reg: return "naive-reg";
    case Method::crf: return "crf";
    case Method::cqr: return "cqr";
    case Method::naive_cls: return "naive-cls";
    case Method::class_balanced: return "class-balanced";
    case Method::aps: return "aps";
  }
  throw std::logic_error("method_name: unknown method");
}

inline Method parse_method(const std::string& name) {
  if (name == "naive-reg") return Method::naive_reg;
  if (name == "crf") return Method::crf;
  if (name == "cqr") return Method::cqr;
  if (name == "naive-cls") return Method::naive_cls;
  if (name == "class-balanced") return Method::class_balanced;
  if (name == "aps") return Method::aps;
  throw std::invalid_argument(
      "unknown method '" + name +
      "' (expected naive-reg, crf, cqr, naive-cls, class-balanced or aps)");
}

inline Task method_task(Method m) {
  switch (m) {
    case Method::naive_reg:
    case Method::crf:
    case Method::cqr:
      return Task::regression;
    default:
      return Task::classification;
  }
}

struct CsvInput {
  std::string path;
  std::string target;
  Task task = Task::regression;
};

struct SyntheticRegressionInput {
  std::size_t n = 2000;
  RegressionNoise noise = RegressionNoise::homoscedastic(1.0);
};

struct SyntheticClassificationInput {
  std::size_t n = 5000;
  int n_classes = 5;
  BlobSpec blobs;
};

using InputSpec = std::variant<CsvInput, SyntheticRegressionInput, SyntheticClassificationInput>;

struct ModelParams {
  std::size_t knn_k = 5;
  std::size_t qr_steps = 2000;
  double qr_step_size = 0.5;
  std::size_t softmax_steps = 400;
  double softmax_step_size = 0.5;
};

/// One end-to-end run: data source, split, method, model hyperparameters and
/// output location. Serializable to/from JSON; every field has a CLI flag or
/// config key.
struct PipelineConfig {
  Method method = Method::naive_reg;
  double alpha = 0.1;
  std::vector<double> fractions;  // empty = method default
  std::uint64_t seed = 0;
  std::optional<InputSpec> input;  // empty = synthetic default for the task
  ModelParams model;
  std::string out_dir;
  std::size_t trials = 1000;
  std::string ks_mode = "one-sample";  // or "two-sample"
};

namespace detail {

// Seed stream tags so data generation, splitting, trial resampling and KS
// simulation never share a generator state.
inline constexpr std::uint64_t kSplitSeedTag = 0x5eedc0ffee123457ull;
inline constexpr std::uint64_t kTrialsSeedTag = 0x7e57ab1e5eed900dull;
inline constexpr std::uint64_t kKsSeedTag = 0x2b0c4d5e6f708192ull;

}  // namespace detail

inline std::vector<double> default_fractions(Method m) {
  if (m == Method::crf) return {0.4, 0.2, 0.2, 0.2};
  return {0.5, 0.25, 0.25};
}

inline void validate(const PipelineConfig& config) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0)) {
    throw std::invalid_argument("config: alpha must lie in (0, 1)");
  }
  const auto& fractions = config.fractions;
  if (!fractions.empty()) {
    const std::size_t expected = config.method == Method::crf ? 4 : 3;
    if (fractions.size() != expected) {
      if (config.method == Method::crf && fractions.size() == 3) {
        throw std::invalid_argument(
            "config: method 'crf' needs 4 fractions (train, cal1, cal2, val); got 3, "
            "the cal2 part is missing");
      }
      throw std::invalid_argument("config: method '" + std::string(method_name(config.method)) +
                                  "' needs " + std::to_string(expected) + " fractions, got " +
                                  std::to_string(fractions.size()));
    }
  }
  if (config.input) {
    Task input_task = Task::regression;
    if (std::holds_alternative<CsvInput>(*config.input)) {
      input_task = std::get<CsvInput>(*config.input).task;
    } else if (std::holds_alternative<SyntheticClassificationInput>(*config.input)) {
      input_task = Task::classification;
    }
    if (input_task != method_task(config.method)) {
      throw std::invalid_argument("config: method '" + std::string(method_name(config.method)) +
                                  "' expects a " + task_name(method_task(config.method)) +
                                  " input, got " + task_name(input_task));
    }
  }
}

// ---------------------------------------------------------------------------
// Config JSON (schema documented in the README)
// ---------------------------------------------------------------------------

inline InputSpec input_from_json(const nlohmann::json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "csv") {
    CsvInput in;
    in.path = j.at("path").get<std::string>();
    in.target = j.at("target").get<std::string>();
    in.task = parse_task(j.value("task", "regression"));
    return in;
  }
  if (type == "synthetic-regression") {
    SyntheticRegressionInput in;
    in.n = j.value("n", std::size_t{2000});
    const std::string noise = j.value("noise", "homoscedastic");
    if (noise == "homoscedastic") {
      in.noise = RegressionNoise::homoscedastic(j.value("sigma", 1.0));
    } else if (noise == "heteroscedastic") {
      in.noise = RegressionNoise::heteroscedastic();
    } else {
      throw std::invalid_argument("config: unknown noise '" + noise + "'");
    }
    return in;
  }
  if (type == "synthetic-classification") {
    SyntheticClassificationInput in;
    in.n = j.value("n", std::size_t{5000});
    in.n_classes = j.value("classes", 5);
    in.blobs.radius = j.value("radius", 5.0);
    if (j.contains("priors")) in.blobs.priors = j.at("priors").get<std::vector<double>>();
    return in;
  }
  throw std::invalid_argument("config: unknown input type '" + type + "'");
}

inline ordered_json input_to_json(const InputSpec& input) {
  ordered_json j;
  if (const auto* csv = std::get_if<CsvInput>(&input)) {
    j["type"] = "csv";
    j["path"] = csv->path;
    j["target"] = csv->target;
    j["task"] = task_name(csv->task);
  } else if (const auto* reg = std::get_if<SyntheticRegressionInput>(&input)) {
    j["type"] = "synthetic-regression";
    j["n"] = reg->n;
    if (reg->noise.kind == RegressionNoise::Kind::homoscedastic) {
      j["noise"] = "homoscedastic";
      j["sigma"] = reg->noise.sigma;
    } else {
      j["noise"] = "heteroscedastic";
    }
  } else {
    const auto& cls = std::get<SyntheticClassificationInput>(input);
    j["type"] = "synthetic-classification";
    j["n"] = cls.n;
    j["classes"] = cls.n_classes;
    j["radius"] = cls.blobs.radius;
    if (!cls.blobs.priors.empty()) j["priors"] = cls.blobs.priors;
  }
  return j;
}

inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig config;
  config.method = parse_method(j.at("method").get<std::string>());
  config.alpha = j.value("alpha", 0.1);
  if (j.contains("fractions")) config.fractions = j.at("fractions").get<std::vector<double>>();
  config.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("input")) config.input = input_from_json(j.at("input"));
  if (j.contains("model")) {
    const auto& m = j.at("model");
    config.model.knn_k = m.value("knn_k", std::size_t{5});
    config.model.qr_steps = m.value("qr_steps", std::size_t{2000});
    config.model.qr_step_size = m.value("qr_step_size", 0.5);
    config.model.softmax_steps = m.value("softmax_steps", std::size_t{400});
    config.model.softmax_step_size = m.value("softmax_step_size", 0.5);
  }
  config.out_dir = j.value("out", "");
  if (j.contains("trials")) {
    const auto& t = j.at("trials");
    config.trials = t.value("T", std::size_t{1000});
    config.ks_mode = t.value("ks_mode", "one-sample");
  }
  return config;
}

inline ordered_json config_to_json(const PipelineConfig& config) {
  ordered_json j;
  j["schema_version"] = kSchemaVersion;
  j["method"] = method_name(config.method);
  j["alpha"] = config.alpha;
  j["seed"] = config.seed;
  j["fractions"] = config.fractions.empty() ? default_fractions(config.method) : config.fractions;
  if (config.input) j["input"] = input_to_json(*config.input);
  j["model"] = ordered_json{{"knn_k", config.model.knn_k},
                            {"qr_steps", config.model.qr_steps},
                            {"qr_step_size", config.model.qr_step_size},
                            {"softmax_steps", config.model.softmax_steps},
                            {"softmax_step_size", config.model.softmax_step_size}};
  j["out"] = config.out_dir;
  j["trials"] = ordered_json{{"T", config.trials}, {"ks_mode", config.ks_mode}};
  return j;
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces
// ---------------------------------------------------------------------------

inline Dataset materialize_input(const PipelineConfig& config) {
  InputSpec input;
  if (config.input) {
    input = *config.input;
  } else if (method_task(config.method) == Task::regression) {
    input = SyntheticRegressionInput{};
  } else {
    input = SyntheticClassificationInput{};
  }
  if (const auto* csv = std::get_if<CsvInput>(&input)) {
    return load_csv(csv->path, csv->target, csv->task);
  }
  if (const auto* reg = std::get_if<SyntheticRegressionInput>(&input)) {
    return make_synthetic_regression(reg->n, reg->noise, config.seed);
  }
  const auto& cls = std::get<SyntheticClassificationInput>(input);
  return make_synthetic_classification(cls.n, cls.n_classes, cls.blobs, config.seed);
}

/// Owns every fitted model a run needs, so calibrations can reference them
/// for the lifetime of the pipeline.
struct FittedModels {
  std::optional<KnnRegressor> point;     // f
  std::optional<KnnRegressor> residual;  // r
  std::optional<QuantileModel> lower;    // t_{alpha/2}
  std::optional<QuantileModel> upper;    // t_{1-alpha/2}
  std::optional<SoftmaxClassifier> classifier;
};

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
}

inline ordered_json quantile_to_json(const ConformalQuantile& q) {
  ordered_json j;
  j["q_hat"] = q.degenerate ? ordered_json(nullptr) : ordered_json(q.q_hat);
  j["rank"] = q.rank;
  j["n_cal"] = q.n_cal;
  j["degenerate"] = q.degenerate;
  return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// cmd_run: split -> fit -> calibrate -> predict -> report
// ---------------------------------------------------------------------------

struct RunResult {
  CoverageReport report;
  ordered_json report_json;
  std::string predictions_csv;
  std::vector<ConformalQuantile> quantiles;
};

inline RunResult cmd_run(const PipelineConfig& config) {
  validate(config);
  const Dataset data = materialize_input(config);
  if (data.task != method_task(config.method)) {
    throw std::invalid_argument("cmd_run: method '" + std::string(method_name(config.method)) +
                                "' expects a " + task_name(method_task(config.method)) +
                                " dataset");
  }
  const auto fractions =
      config.fractions.empty() ? default_fractions(config.method) : config.fractions;
  const SplitIndices parts = split(data, fractions, config.seed ^ detail::kSplitSeedTag);
  const bool four_way = parts.parts.size() == 4;
  const auto& train_idx = parts.parts[0];
  const auto& cal_idx = four_way ? parts.parts[2] : parts.parts[1];
  const auto& val_idx = four_way ? parts.parts[3] : parts.parts[2];

  const Dataset train = subset(data, train_idx);
  const Dataset cal = subset(data, cal_idx);
  const Dataset val = subset(data, val_idx);

  FittedModels models;
  RunResult result;
  ordered_json& report = result.report_json;
  report["schema_version"] = kSchemaVersion;
  report["method"] = method_name(config.method);
  report["task"] = task_name(data.task);
  report["alpha"] = config.alpha;
  report["seed"] = config.seed;
  report["n"] = data.size();
  report["n_train"] = train_idx.size();
  if (four_way) {
    report["n_cal1"] = parts.parts[1].size();
    report["n_cal2"] = cal_idx.size();
  } else {
    report["n_cal"] = cal_idx.size();
  }
  report["n_val"] = val_idx.size();

  std::string csv;
  if (data.task == Task::regression) {
    RegressionCalibration calib;
    if (config.method == Method::naive_reg) {
      models.point = knn_fit(train, config.model.knn_k);
      calib = calibrate_naive(*models.point, cal, config.alpha);
    } else if (config.method == Method::crf) {
      const Dataset cal1 = subset(data, parts.parts[1]);
      models.point = knn_fit(train, config.model.knn_k);
      models.residual = fit_residual_model(*models.point, cal1, config.model.knn_k);
      calib = calibrate_crf(*models.point, *models.residual, cal, config.alpha);
    } else {
      models.lower = quantile_fit(train, config.alpha / 2.0, config.model.qr_steps,
                                  config.model.qr_step_size, config.seed);
      models.upper = quantile_fit(train, 1.0 - config.alpha / 2.0, config.model.qr_steps,
                                  config.model.qr_step_size, config.seed);
      calib = calibrate_cqr(*models.lower, *models.upper, cal, config.alpha);
    }
    result.quantiles.push_back(calib.quantile);

    std::size_t crossing_count = 0;
    std::vector<PredictionInterval> intervals(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
      intervals[i] = predict_interval(calib, val.point(i), &crossing_count);
    }
    std::optional<double> constant_width;
    if (config.method == Method::naive_reg && !calib.quantile.degenerate) {
      constant_width = 2.0 * calib.quantile.q_hat;
    }
    result.report = summarize_regression(
        intervals, val.targets, constant_width,
        config.method == Method::cqr ? std::optional<std::size_t>(crossing_count) : std::nullopt);

    csv = "index,lower,upper,truth,covered\n";
    for (std::size_t i = 0; i < val.size(); ++i) {
      csv += std::to_string(val_idx[i]);
      csv += ',';
      csv += detail::format_double(intervals[i].lower);
      csv += ',';
      csv += detail::format_double(intervals[i].upper);
      csv += ',';
      csv += detail::format_double(val.targets[i]);
      csv += ',';
      csv += intervals[i].contains(val.targets[i]) ? '1' : '0';
      csv += '\n';
    }
  } else {
    models.classifier = softmax_fit(train, config.model.softmax_steps,
                                    config.model.softmax_step_size, config.seed);
    std::vector<ClassProbabilities> cal_probs(cal.size());
    for (std::size_t i = 0; i < cal.size(); ++i) {
      cal_probs[i] = models.classifier->predict(cal.point(i));
    }
    const auto cal_labels = cal.class_labels();

    ClassificationCalibration calib;
    if (config.method == Method::naive_cls) {
      calib = calibrate_naive_cls(cal_probs, cal_labels, config.alpha);
    } else if (config.method == Method::class_balanced) {
      calib = calibrate_class_balanced(cal_probs, cal_labels, config.alpha);
    } else {
      calib = calibrate_aps(cal_probs, cal_labels, config.alpha);
    }
    result.quantiles = calib.quantiles;

    const auto val_labels = val.class_labels();
    std::vector<PredictionSet> sets(val.size());
    for (std::size_t i = 0; i < val.size(); ++i) {
      sets[i] = predict_set(calib, models.classifier->predict(val.point(i)));
    }
    result.report = summarize_classification(sets, val_labels, data.n_classes);

    csv = "index,set,truth,covered\n";
    for (std::size_t i = 0; i < val.size(); ++i) {
      csv += std::to_string(val_idx[i]);
      csv += ',';
      for (std::size_t c = 0; c < sets[i].classes.size(); ++c) {
        if (c > 0) csv += ';';
        csv += std::to_string(sets[i].classes[c]);
      }
      csv += ',';
      csv += std::to_string(val_labels[i]);
      csv += ',';
      csv += sets[i].contains(val_labels[i]) ? '1' : '0';
      csv += '\n';
    }
  }
  result.predictions_csv = csv;

  if (result.quantiles.size() == 1) {
    const auto& q = result.quantiles[0];
    report["q_hat"] = q.degenerate ? ordered_json(nullptr) : ordered_json(q.q_hat);
    report["rank"] = q.rank;
    report["degenerate"] = q.degenerate;
  } else {
    ordered_json q_list = ordered_json::array();
    ordered_json rank_list = ordered_json::array();
    ordered_json degen_list = ordered_json::array();
    for (const auto& q : result.quantiles) {
      q_list.push_back(q.degenerate ? ordered_json(nullptr) : ordered_json(q.q_hat));
      rank_list.push_back(q.rank);
      degen_list.push_back(q.degenerate);
    }
    report["q_hat"] = q_list;
    report["rank"] = rank_list;
    report["degenerate"] = degen_list;
  }

  const CoverageReport& summary = result.report;
  report["empirical_coverage"] = summary.empirical_coverage;
  if (summary.mean_width) {
    report["mean_width"] = *summary.mean_width;
    report["width_stddev"] = *summary.width_stddev;
    report["min_width"] = *summary.min_width;
    report["max_width"] = *summary.max_width;
  }
  if (summary.crossing_count) report["crossing_count"] = *summary.crossing_count;
  if (summary.mean_set_size) {
    report["mean_set_size"] = *summary.mean_set_size;
    report["set_size_stddev"] = *summary.set_size_stddev;
    report["set_size_histogram"] = *summary.set_size_hist;
    report["per_class_coverage"] = *summary.per_class_coverage;
    report["empty_set_rate"] = *summary.empty_set_rate;
  }

  if (!config.out_dir.empty()) {
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);
    detail::write_text_file(dir / "report.json", report.dump(2) + "\n");
    detail::write_text_file(dir / "predictions.csv", csv);
  }
  return result;
}

// ---------------------------------------------------------------------------
// cmd_trials: repeated re-calibration against the Beta law
// ---------------------------------------------------------------------------

struct TrialsResult {
  TrialDistribution trials;
  KsResult ks;
  ordered_json beta_json;
  ordered_json ks_json;
};

/// Per-pool-point statistics that make each trial a gather + quantile + count
/// instead of a refit: the calibration score, the coverage statistic compared
/// against q_hat, and whether that comparison is strict.
struct TrialStatistics {
  std::vector<double> cal_score;
  std::vector<double> coverage_stat;
  bool strict = false;          // covered <=> stat < q (APS); otherwise <=
  std::vector<int> labels;      // class-balanced only
  int n_classes = 0;
};

inline TrialStatistics precompute_trial_statistics(const PipelineConfig& config,
                                                   const Dataset& pool,
                                                   const FittedModels& models) {
  TrialStatistics stats;
  const std::size_t n = pool.size();
  stats.cal_score.resize(n);
  stats.coverage_stat.resize(n);
  switch (config.method) {
    case Method::naive_reg:
      for (std::size_t i = 0; i < n; ++i) {
        stats.cal_score[i] = score_absolute(*models.point, pool.point(i), pool.targets[i]);
      }
      stats.coverage_stat = stats.cal_score;
      break;
    case Method::crf:
      for (std::size_t i = 0; i < n; ++i) {
        stats.cal_score[i] =
            score_normalized(*models.point, *models.residual, pool.point(i), pool.targets[i]);
      }
      stats.coverage_stat = stats.cal_score;
      break;
    case Method::cqr:
      for (std::size_t i = 0; i < n; ++i) {
        stats.cal_score[i] = score_cqr(*models.lower, *models.upper, pool.point(i),
                                       pool.targets[i]);
      }
      stats.coverage_stat = stats.cal_score;
      break;
    case Method::naive_cls:
    case Method::class_balanced: {
      stats.labels = pool.class_labels();
      stats.n_classes = pool.n_classes;
      for (std::size_t i = 0; i < n; ++i) {
        stats.cal_score[i] =
            score_softmax_naive(models.classifier->predict(pool.point(i)), stats.labels[i]);
      }
      stats.coverage_stat = stats.cal_score;
      break;
    }
    case Method::aps: {
      stats.labels = pool.class_labels();
      stats.n_classes = pool.n_classes;
      stats.strict = true;  // y is in the set iff the mass before it is < q_hat
      for (std::size_t i = 0; i < n; ++i) {
        const ClassProbabilities probs = models.classifier->predict(pool.point(i));
        const double through = score_aps(probs, stats.labels[i]);
        stats.cal_score[i] = through;
        stats.coverage_stat[i] =
            through - probs.probs[static_cast<std::size_t>(stats.labels[i])];
      }
      break;
    }
  }
  return stats;
}

/// Trial function over precomputed statistics. For class-balanced methods the
/// per-class quantiles are rebuilt from the drawn calibration indices.
inline TrialFn make_trial_fn(const PipelineConfig& config, const TrialStatistics& stats) {
  const double alpha = config.alpha;
  const bool class_balanced = config.method == Method::class_balanced;
  return [&stats, alpha, class_balanced](std::span<const std::size_t> cal,
                                         std::span<const std::size_t> val) {
    std::size_t covered = 0;
    if (class_balanced) {
      std::vector<std::vector<double>> per_class(static_cast<std::size_t>(stats.n_classes));
      for (std::size_t i : cal) {
        per_class[static_cast<std::size_t>(stats.labels[i])].push_back(stats.cal_score[i]);
      }
      std::vector<double> thresholds(static_cast<std::size_t>(stats.n_classes));
      for (int y = 0; y < stats.n_classes; ++y) {
        auto& scores = per_class[static_cast<std::size_t>(y)];
        if (scores.empty()) {
          thresholds[static_cast<std::size_t>(y)] = std::numeric_limits<double>::infinity();
          continue;
        }
        thresholds[static_cast<std::size_t>(y)] = conformal_quantile(scores, alpha).q_hat;
      }
      for (std::size_t i : val) {
        if (stats.coverage_stat[i] <= thresholds[static_cast<std::size_t>(stats.labels[i])]) {
          ++covered;
        }
      }
    } else {
      std::vector<double> scores;
      scores.reserve(cal.size());
      for (std::size_t i : cal) scores.push_back(stats.cal_score[i]);
      const double q = conformal_quantile(scores, alpha).q_hat;
      for (std::size_t i : val) {
        const double s = stats.coverage_stat[i];
        if (stats.strict ? s < q : s <= q) ++covered;
      }
    }
    return static_cast<double>(covered) / static_cast<double>(val.size());
  };
}

inline TrialsResult cmd_trials(const PipelineConfig& config, std::size_t t) {
  validate(config);
  if (t < 20) throw std::invalid_argument("cmd_trials: T too small for KS (need at least 20)");
  const Dataset data = materialize_input(config);
  const auto fractions =
      config.fractions.empty() ? default_fractions(config.method) : config.fractions;
  const SplitIndices parts = split(data, fractions, config.seed ^ detail::kSplitSeedTag);
  const bool four_way = parts.parts.size() == 4;
  const auto& cal_idx = four_way ? parts.parts[2] : parts.parts[1];
  const auto& val_idx = four_way ? parts.parts[3] : parts.parts[2];

  const Dataset train = subset(data, parts.parts[0]);
  FittedModels models;
  if (config.method == Method::naive_reg) {
    models.point = knn_fit(train, config.model.knn_k);
  } else if (config.method == Method::crf) {
    const Dataset cal1 = subset(data, parts.parts[1]);
    models.point = knn_fit(train, config.model.knn_k);
    models.residual = fit_residual_model(*models.point, cal1, config.model.knn_k);
  } else if (config.method == Method::cqr) {
    models.lower = quantile_fit(train, config.alpha / 2.0, config.model.qr_steps,
                                config.model.qr_step_size, config.seed);
    models.upper = quantile_fit(train, 1.0 - config.alpha / 2.0, config.model.qr_steps,
                                config.model.qr_step_size, config.seed);
  } else {
    models.classifier = softmax_fit(train, config.model.softmax_steps,
                                    config.model.softmax_step_size, config.seed);
  }

  std::vector<std::size_t> pool_idx;
  pool_idx.reserve(cal_idx.size() + val_idx.size());
  pool_idx.insert(pool_idx.end(), cal_idx.begin(), cal_idx.end());
  pool_idx.insert(pool_idx.end(), val_idx.begin(), val_idx.end());
  const Dataset pool = subset(data, pool_idx);

  const TrialStatistics stats = precompute_trial_statistics(config, pool, models);
  const TrialConfig trial_config{cal_idx.size(), val_idx.size(), config.alpha};
  TrialsResult result;
  result.trials = run_trials(trial_config, pool, t, config.seed ^ detail::kTrialsSeedTag,
                             make_trial_fn(config, stats));
  result.ks = config.ks_mode == "two-sample"
                  ? ks_two_sample_vs_beta(result.trials, config.seed ^ detail::kKsSeedTag)
                  : ks_statistic_vs_beta(result.trials);

  const BetaParams& beta = result.trials.beta;
  result.beta_json = ordered_json{{"schema_version", kSchemaVersion},
                                  {"a", beta.a},
                                  {"b", beta.b},
                                  {"l", beta.l},
                                  {"n_cal", beta.n_cal},
                                  {"alpha", beta.alpha},
                                  {"mean", beta.mean()}};
  result.ks_json = ordered_json{{"schema_version", kSchemaVersion},
                                {"mode", config.ks_mode},
                                {"statistic", result.ks.statistic},
                                {"critical_5pct", result.ks.critical_5pct},
                                {"pass", result.ks.pass},
                                {"note", result.ks.note}};

  if (!config.out_dir.empty()) {
    const std::filesystem::path dir(config.out_dir);
    std::filesystem::create_directories(dir);

    std::string coverages = "trial,coverage\n";
    for (std::size_t j = 0; j < result.trials.coverages.size(); ++j) {
      coverages += std::to_string(j + 1);
      coverages += ',';
      coverages += detail::format_double(result.trials.coverages[j]);
      coverages += '\n';
    }
    detail::write_text_file(dir / "coverages.csv", coverages);
    detail::write_text_file(dir / "beta.json", result.beta_json.dump(2) + "\n");
    detail::write_text_file(dir / "ks.json", result.ks_json.dump(2) + "\n");

    std::string hist = "bin_left,bin_right,count,beta_pdf_at_midpoint\n";
    for (const auto& bin : coverage_histogram(result.trials)) {
      hist += detail::format_double(bin.left);
      hist += ',';
      hist += detail::format_double(bin.right);
      hist += ',';
      hist += std::to_string(bin.count);
      hist += ',';
      hist += detail::format_double(bin.beta_pdf_mid);
      hist += '\n';
    }
    detail::write_text_file(dir / "histogram.csv", hist);

    std::string qq = "level,empirical,theoretical\n";
    for (const auto& pair : qq_pairs(result.trials)) {
      qq += detail::format_double(pair.level);
      qq += ',';
      qq += detail::format_double(pair.empirical);
      qq += ',';
      qq += detail::format_double(pair.theoretical);
      qq += '\n';
    }
    detail::write_text_file(dir / "qq.csv", qq);
  }
  return result;
}

// ---------------------------------------------------------------------------
// cmd_synth and cmd_compare
// ---------------------------------------------------------------------------

/// Writes the configured synthetic dataset as CSV next to a meta JSON
/// recording the generator parameters and seed.
inline std::filesystem::path cmd_synth(const PipelineConfig& config) {
  if (config.out_dir.empty()) throw std::invalid_argument("cmd_synth: --out directory required");
  const Dataset data = materialize_input(config);
  const std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / "synthetic.csv";
  save_csv(data, csv_path.string());

  ordered_json meta;
  meta["schema_version"] = kSchemaVersion;
  meta["seed"] = config.seed;
  InputSpec input;
  if (config.input) {
    input = *config.input;
  } else if (method_task(config.method) == Task::regression) {
    input = SyntheticRegressionInput{};
  } else {
    input = SyntheticClassificationInput{};
  }
  meta["generator"] = input_to_json(input);
  meta["n"] = data.size();
  meta["columns"] = data.dim();
  meta["target"] = data.target_name;
  meta["task"] = task_name(data.task);
  detail::write_text_file(dir / "synthetic.meta.json", meta.dump(2) + "\n");
  return csv_path;
}

/// Merges run reports into one table; row order follows the argument order.
inline ordered_json cmd_compare(std::span<const std::string> report_paths) {
  if (report_paths.empty()) throw std::invalid_argument("cmd_compare: no report files given");
  ordered_json table = ordered_json::array();
  for (const auto& path : report_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cmd_compare: cannot open '" + path + "'");
    nlohmann::json report;
    try {
      in >> report;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("cmd_compare: malformed report '" + path + "': " + e.what());
    }
    ordered_json row;
    row["method"] = report.value("method", "?");
    row["empirical_coverage"] = report.value("empirical_coverage", 0.0);
    if (report.contains("mean_width")) {
      row["mean_width_or_size"] = report.at("mean_width");
    } else if (report.contains("mean_set_size")) {
      row["mean_width_or_size"] = report.at("mean_set_size");
    } else {
      row["mean_width_or_size"] = nullptr;
    }
    if (report.contains("per_class_coverage")) {
      const auto coverages = report.at("per_class_coverage").get<std::vector<double>>();
      row["per_class_min_coverage"] = *std::min_element(coverages.begin(), coverages.end());
    } else {
      row["per_class_min_coverage"] = nullptr;
    }
    table.push_back(row);
  }
  return table;
}

}  // namespace icp
