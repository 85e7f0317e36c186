#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbsadam/dataset_io.hpp"
#include "dbsadam/evaluation.hpp"
#include "dbsadam/losses.hpp"
#include "dbsadam/models.hpp"
#include "dbsadam/optimizers.hpp"
#include "dbsadam/resampling.hpp"

namespace dbsadam {

enum class ResamplerKind { none, smote_enn, adasyn };
std::string to_string(ResamplerKind kind);
ResamplerKind parse_resampler_kind(const std::string& name);

struct ResamplerSpec {
  ResamplerKind kind = ResamplerKind::smote_enn;
  std::size_t smote_k = 5;
  std::size_t enn_k = 3;
  std::size_t adasyn_k = 5;
};

struct TrainingSpec {
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  std::size_t patience = 6;
  std::vector<std::uint64_t> seeds{42, 123, 456, 789, 1024};
  double test_fraction = 0.2;
  /// Stratified share of the training portion held out for early stopping.
  double validation_fraction = 0.1;
};

/// Everything a run needs. Populate from defaults, then apply_setting() per key.
struct ExperimentConfig {
  /// "synthetic" or a CSV path.
  std::string dataset = "synthetic";
  std::string schema_path;
  std::vector<std::string> drop_labels;
  SyntheticSpec synthetic;
  std::size_t sequence_length = 1;

  ResamplerSpec resampler;
  NetworkShape model;  // input_width and classes are filled from the data
  LossConfig loss;
  bool auto_class_weights = true;

  OptimizerKind optimizer = OptimizerKind::dbs_adam;
  /// Optimizer entries for compare: "name" or "name:key=value;key=value".
  std::vector<std::string> optimizers{"dbs_adam", "amsgrad", "adamw", "adabound", "adam"};
  OptimizerConfig optimizer_config;
  DifficultyConfig difficulty;
  std::optional<double> pinned_difficulty;

  TrainingSpec training;

  Vector beta_grid{0.8, 0.9, 0.95, 0.99};
  Vector alpha_grid{0.3, 0.5, 0.7};
  std::vector<std::uint64_t> sweep_seeds{42, 123};

  std::string output_dir = "results";
  std::size_t threads = 1;

  void validate() const;
};

/// Set one documented key. Throws ConfigError for unknown keys or bad values.
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);
/// `key = value` lines with `#` comments.
void apply_config_text(ExperimentConfig& config, const std::string& text);
void apply_config_file(ExperimentConfig& config, const std::string& path);
/// Every key apply_setting accepts, with a one-line description.
std::vector<std::pair<std::string, std::string>> config_reference();

/// Config for one comparison entry such as "dbs_adam:pinned_difficulty=0.5".
ExperimentConfig config_for_entry(const ExperimentConfig& base, const std::string& entry);

/// Raw data for the configured source, loaded once and shared across runs.
RawDataset load_source(const ExperimentConfig& config);

/// Per-seed data after splitting, encoding and (training-only) resampling.
struct PreparedData {
  LabeledDataset train;       // after resampling
  LabeledDataset train_raw;   // before resampling
  LabeledDataset validation;
  LabeledDataset test;
  SplitIndices test_split;    // rows of the source data
  FeatureEncoder encoder;
};

PreparedData prepare_data(const ExperimentConfig& config, const RawDataset& source,
                          std::uint64_t seed);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct RunResult {
  std::string label;  // optimizer entry
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  MetricsReport test_metrics;
  ConfusionMatrix confusion;
  std::vector<double> lr_trace;  // per batch, DBS-Adam only
  double lr_min = 0.0;
  double lr_mean = 0.0;
  double lr_max = 0.0;
  std::size_t train_rows_before_resampling = 0;
  std::size_t train_rows = 0;
  double wall_seconds = 0.0;
  double ema_beta = 0.0;
  double alpha_mix = 0.0;

  std::size_t epochs_run() const { return epochs.size(); }
};

/// Build the sequence view of every row of a dataset.
std::vector<Matrix> to_sequences(const LabeledDataset& data, std::size_t steps);

/// One full training run. Errors are rethrown with seed/epoch/batch context.
RunResult train(const ExperimentConfig& config, const RawDataset& source, std::uint64_t seed,
                const std::string& label = "");
RunResult train(const ExperimentConfig& config, std::uint64_t seed);

struct PairwiseEntry {
  std::size_t a = 0;  // index into ComparisonReport::labels
  std::size_t b = 0;
  std::string metric;
  SignificanceResult result;
};

struct GridCell {
  double ema_beta = 0.0;
  double alpha_mix = 0.0;
  std::vector<MetricSummary> metrics;
};

struct ComparisonReport {
  std::string kind;  // "train", "compare" or "sweep"
  std::vector<std::string> labels;
  std::vector<std::uint64_t> seeds;
  std::vector<RunResult> runs;
  std::vector<std::vector<MetricSummary>> aggregates;  // per label
  std::vector<PairwiseEntry> pairwise;
  std::vector<GridCell> grid;
};

/// Metrics that receive pairwise significance entries.
const std::vector<std::string>& compared_metrics();

/// Every (entry, seed) run; splits depend on the seed only. Runs may execute in
/// parallel (config.threads); results are stored in (entry, seed) order.
ComparisonReport compare_optimizers(const ExperimentConfig& config);
ComparisonReport compare_optimizers(const ExperimentConfig& config, const RawDataset& source);

/// DBS-Adam over the beta x alpha grid, sweep_seeds per cell.
ComparisonReport sensitivity_sweep(const ExperimentConfig& config);
ComparisonReport sensitivity_sweep(const ExperimentConfig& config, const RawDataset& source);

}  // namespace dbsadam
