// dbsadam: train, compare and sweep optimizers on a Bi-LSTM classifier.
#include <CLI11.hpp>

#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "dbsadam/experiment.hpp"
#include "dbsadam/report.hpp"

namespace {

using namespace dbsadam;

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> settings;
  std::optional<std::string> optimizer;
  std::optional<std::uint64_t> seed;
  std::optional<double> beta;
  std::optional<double> alpha;
  std::optional<double> lr;
  std::optional<std::string> dataset;
  std::optional<std::string> schema;
  std::optional<std::string> output;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("-c,--config", o.config_path, "key = value config file");
  app->add_option("-s,--set", o.settings, "override one key (key=value); repeatable");
  app->add_option("--optimizer", o.optimizer, "optimizer (train) or comma list (compare)");
  app->add_option("--seed", o.seed, "run seed");
  app->add_option("--beta", o.beta, "DBS-Adam EMA decay");
  app->add_option("--alpha", o.alpha, "DBS-Adam gradient-norm weight");
  app->add_option("--lr", o.lr, "base learning rate");
  app->add_option("--dataset", o.dataset, "'synthetic' or CSV path");
  app->add_option("--schema", o.schema, "schema file for a CSV dataset");
  app->add_option("-o,--output", o.output, "output directory");
  app->add_option("-j,--threads", o.threads, "parallel runs (0 = all cores)");
}

std::string number_text(double v) { return format_double(v); }

ExperimentConfig build_config(const CommonOptions& o, bool optimizer_is_list) {
  ExperimentConfig c;
  if (!o.config_path.empty()) apply_config_file(c, o.config_path);
  for (const auto& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
  }
  if (o.optimizer) apply_setting(c, optimizer_is_list ? "optimizers" : "optimizer", *o.optimizer);
  if (o.seed) apply_setting(c, "seeds", std::to_string(*o.seed));
  if (o.beta) apply_setting(c, "ema_beta", number_text(*o.beta));
  if (o.alpha) apply_setting(c, "alpha_mix", number_text(*o.alpha));
  if (o.lr) apply_setting(c, "lr", number_text(*o.lr));
  if (o.dataset) apply_setting(c, "dataset", *o.dataset);
  if (o.schema) apply_setting(c, "schema", *o.schema);
  if (o.output) apply_setting(c, "output_dir", *o.output);
  if (o.threads) apply_setting(c, "threads", std::to_string(*o.threads));
  c.validate();
  return c;
}

void print_run(const RunResult& r) {
  const auto& m = r.test_metrics;
  std::cerr << std::fixed << std::setprecision(4) << r.label << " seed " << r.seed
            << ": accuracy " << m.accuracy << " f1 " << m.f1_weighted << " loss " << m.loss
            << " (best epoch " << r.best_epoch << " of " << r.epochs_run() << ", "
            << std::setprecision(1) << r.wall_seconds << " s)\n";
}

int cmd_train(const CommonOptions& o) {
  const ExperimentConfig c = build_config(o, false);
  const RawDataset source = load_source(c);
  ComparisonReport report;
  report.kind = "train";
  report.labels = {to_string(c.optimizer)};
  report.seeds = {c.training.seeds.front()};
  report.runs.push_back(train(c, source, report.seeds.front()));
  print_run(report.runs.back());
  std::vector<MetricsReport> metrics{report.runs.back().test_metrics};
  report.aggregates.push_back(aggregate_runs(metrics));
  emit_report(report, c.output_dir);
  std::cout << "wrote " << c.output_dir << "/report.json\n";
  return 0;
}

int cmd_compare(const CommonOptions& o) {
  const ExperimentConfig c = build_config(o, true);
  const ComparisonReport report = compare_optimizers(c);
  for (const auto& r : report.runs) print_run(r);
  emit_report(report, c.output_dir);
  print_summary(report_to_json(report), std::cout);
  return 0;
}

int cmd_sweep(const CommonOptions& o, const std::string& betas, const std::string& alphas) {
  CommonOptions copy = o;
  if (!betas.empty()) copy.settings.push_back("beta_grid=" + betas);
  if (!alphas.empty()) copy.settings.push_back("alpha_grid=" + alphas);
  const ExperimentConfig c = build_config(copy, false);
  const ComparisonReport report = sensitivity_sweep(c);
  for (const auto& r : report.runs) print_run(r);
  emit_report(report, c.output_dir);
  print_summary(report_to_json(report), std::cout);
  return 0;
}

void print_distribution(const std::string& title, const LabeledDataset& d) {
  const ClassDistribution dist = class_distribution(d);
  std::cout << title << " (" << d.size() << " rows)\n";
  for (std::size_t c = 0; c < dist.counts.size(); ++c) {
    std::cout << "  " << std::left << std::setw(24) << d.class_names[c] << std::right
              << std::setw(8) << dist.counts[c] << std::setw(10) << std::fixed
              << std::setprecision(2) << dist.percentages[c] << "%\n";
  }
}

int cmd_resample(const CommonOptions& o, const std::string& csv_out) {
  const ExperimentConfig c = build_config(o, false);
  const RawDataset source = load_source(c);
  if (source.raw_rows > 0) {
    std::cout << "loaded " << source.size() << " of " << source.raw_rows << " rows ("
              << source.dropped_rows << " dropped, " << source.filtered_rows << " filtered)\n";
  }
  const PreparedData d = prepare_data(c, source, c.training.seeds.front());
  print_distribution("training split before " + to_string(c.resampler.kind), d.train_raw);
  print_distribution("training split after " + to_string(c.resampler.kind), d.train);
  if (!csv_out.empty()) {
    write_dataset_csv(d.train, csv_out);
    std::cout << "wrote " << csv_out << "\n";
  }
  return 0;
}

int cmd_report(const std::string& path) {
  std::filesystem::path p = path;
  if (std::filesystem::is_directory(p)) p /= "report.json";
  print_summary(load_report(p), std::cout);
  return 0;
}

int cmd_keys() {
  for (const auto& [key, description] : config_reference()) {
    std::cout << std::left << std::setw(22) << key << description << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Difficulty-scaled Adam and baseline optimizers on a Bi-LSTM classifier"};
  app.require_subcommand(1);

  CommonOptions train_opts, compare_opts, sweep_opts, resample_opts;
  auto* train_cmd = app.add_subcommand("train", "train one model and write a report");
  add_common(train_cmd, train_opts);
  auto* compare_cmd = app.add_subcommand("compare", "every optimizer x seed, with paired t-tests");
  add_common(compare_cmd, compare_opts);
  auto* sweep_cmd = app.add_subcommand("sweep", "DBS-Adam over the beta x alpha grid");
  add_common(sweep_cmd, sweep_opts);
  std::string beta_grid, alpha_grid;
  sweep_cmd->add_option("--betas", beta_grid, "comma list overriding beta_grid");
  sweep_cmd->add_option("--alphas", alpha_grid, "comma list overriding alpha_grid");
  auto* resample_cmd = app.add_subcommand("resample", "show class balance before and after resampling");
  add_common(resample_cmd, resample_opts);
  std::string resample_csv;
  resample_cmd->add_option("--csv", resample_csv, "write the resampled training split here");
  auto* report_cmd = app.add_subcommand("report", "summarize a report.json");
  std::string report_path;
  report_cmd->add_option("path", report_path, "report.json or its directory")->required();
  auto* keys_cmd = app.add_subcommand("keys", "list every config key");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train_cmd) return cmd_train(train_opts);
    if (*compare_cmd) return cmd_compare(compare_opts);
    if (*sweep_cmd) return cmd_sweep(sweep_opts, beta_grid, alpha_grid);
    if (*resample_cmd) return cmd_resample(resample_opts, resample_csv);
    if (*report_cmd) return cmd_report(report_path);
    if (*keys_cmd) return cmd_keys();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
