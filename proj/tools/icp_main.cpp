// Command-line frontend: synth, run, trials, compare.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "icp/icp.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<double> alpha;
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> trials;
  std::vector<double> fractions;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file (flags override its values)");
  cmd->add_option("--alpha", flags.alpha, "miscoverage rate in (0, 1)");
  cmd->add_option("--method", flags.method,
                  "naive-reg | crf | cqr | naive-cls | class-balanced | aps");
  cmd->add_option("--seed", flags.seed, "64-bit seed");
  cmd->add_option("--out", flags.out, "output directory");
  cmd->add_option("--trials", flags.trials, "number of trials T");
  cmd->add_option("--fractions", flags.fractions,
                  "split fractions, e.g. 0.5,0.25,0.25 (4 values for crf)")
      ->delimiter(',');
}

icp::PipelineConfig build_config(const CommonFlags& flags) {
  nlohmann::json j;
  if (!flags.config_path.empty()) {
    std::ifstream in(flags.config_path);
    if (!in) throw std::runtime_error("cannot open config '" + flags.config_path + "'");
    in >> j;
  }
  if (!j.contains("method")) j["method"] = flags.method.value_or("naive-reg");
  icp::PipelineConfig config = icp::config_from_json(j);
  if (flags.method) config.method = icp::parse_method(*flags.method);
  if (flags.alpha) config.alpha = *flags.alpha;
  if (flags.seed) config.seed = *flags.seed;
  if (flags.out) config.out_dir = *flags.out;
  if (flags.trials) config.trials = *flags.trials;
  if (!flags.fractions.empty()) config.fractions = flags.fractions;
  return config;
}

int run_command(const CommonFlags& flags) {
  const icp::PipelineConfig config = build_config(flags);
  const icp::RunResult result = icp::cmd_run(config);
  std::cout << "method=" << icp::method_name(config.method) << " alpha=" << config.alpha
            << " seed=" << config.seed << " n_val=" << result.report.n_val
            << " coverage=" << result.report.empirical_coverage;
  if (result.quantiles.size() == 1) {
    std::cout << " q_hat=";
    if (result.quantiles[0].degenerate) {
      std::cout << "inf";
    } else {
      std::cout << result.quantiles[0].q_hat;
    }
  }
  if (result.report.mean_width) std::cout << " mean_width=" << *result.report.mean_width;
  if (result.report.mean_set_size) std::cout << " mean_set_size=" << *result.report.mean_set_size;
  if (result.report.crossing_count) std::cout << " crossing_count=" << *result.report.crossing_count;
  std::cout << '\n';
  if (!config.out_dir.empty()) {
    std::cout << "wrote report.json and predictions.csv to " << config.out_dir << '\n';
  }
  return 0;
}

int trials_command(const CommonFlags& flags) {
  const icp::PipelineConfig config = build_config(flags);
  const icp::TrialsResult result = icp::cmd_trials(config, config.trials);
  std::cout << "method=" << icp::method_name(config.method) << " alpha=" << config.alpha
            << " T=" << result.trials.trial_count << " trial_mean=" << result.trials.mean()
            << " beta_mean=" << result.trials.beta.mean() << " ks_D=" << result.ks.statistic
            << " ks_critical=" << result.ks.critical_5pct
            << " ks_pass=" << (result.ks.pass ? "true" : "false") << '\n';
  if (!config.out_dir.empty()) {
    std::cout << "wrote coverages.csv, beta.json, ks.json, histogram.csv, qq.csv to "
              << config.out_dir << '\n';
  }
  return 0;
}

int synth_command(const CommonFlags& flags) {
  const icp::PipelineConfig config = build_config(flags);
  const auto path = icp::cmd_synth(config);
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

int compare_command(const CommonFlags& flags, const std::vector<std::string>& reports) {
  const icp::ordered_json table = icp::cmd_compare(reports);
  std::cout << "method,empirical_coverage,mean_width_or_size,per_class_min_coverage\n";
  for (const auto& row : table) {
    std::cout << row.at("method").get<std::string>() << ','
              << row.at("empirical_coverage").dump() << ','
              << row.at("mean_width_or_size").dump() << ','
              << row.at("per_class_min_coverage").dump() << '\n';
  }
  if (flags.out) {
    std::string csv = "method,empirical_coverage,mean_width_or_size,per_class_min_coverage\n";
    for (const auto& row : table) {
      csv += row.at("method").get<std::string>();
      csv += ',';
      csv += row.at("empirical_coverage").dump();
      csv += ',';
      csv += row.at("mean_width_or_size").dump();
      csv += ',';
      csv += row.at("per_class_min_coverage").dump();
      csv += '\n';
    }
    std::filesystem::create_directories(*flags.out);
    icp::detail::write_text_file(std::filesystem::path(*flags.out) / "compare.csv", csv);
    std::cout << "wrote compare.csv to " << *flags.out << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inductive conformal prediction toolkit"};
  app.require_subcommand(1);

  CommonFlags run_flags, trials_flags, synth_flags, compare_flags;
  std::vector<std::string> report_paths;

  CLI::App* run = app.add_subcommand("run", "one calibrate/predict/report pipeline");
  add_common_flags(run, run_flags);
  CLI::App* trials = app.add_subcommand("trials", "T-trial coverage study against the Beta law");
  add_common_flags(trials, trials_flags);
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic dataset as CSV");
  add_common_flags(synth, synth_flags);
  CLI::App* compare = app.add_subcommand("compare", "merge run reports into one table");
  add_common_flags(compare, compare_flags);
  compare->add_option("reports", report_paths, "report.json files")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(run_flags);
    if (trials->parsed()) return trials_command(trials_flags);
    if (synth->parsed()) return synth_command(synth_flags);
    if (compare->parsed()) return compare_command(compare_flags, report_paths);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
