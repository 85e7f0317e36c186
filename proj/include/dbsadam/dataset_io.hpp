#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dbsadam/numerics.hpp"
#include "dbsadam/resampling.hpp"

namespace dbsadam {

/// Raised for malformed configuration, schema, or input files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ColumnRole { feature_categorical, feature_numeric, label, ignore };

ColumnRole parse_column_role(const std::string& name);
std::string to_string(ColumnRole role);

/// Column name -> role, plus label values to exclude at load time.
struct Schema {
  std::vector<std::pair<std::string, ColumnRole>> columns;
  std::vector<std::string> drop_labels;

  /// `column = role` lines; `drop_labels = a, b` is accepted as well. `#` starts a comment.
  static Schema parse(const std::string& text);
  static Schema load(const std::string& path);
  std::string label_column() const;
};

/// Parsed but not yet encoded data: categorical cells as strings, numeric cells as doubles.
struct RawDataset {
  std::vector<std::string> categorical_names;
  std::vector<std::string> numeric_names;
  std::vector<std::vector<std::string>> categorical;  // [row][categorical column]
  Matrix numeric;                                     // rows x numeric columns
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t raw_rows = 0;       // data rows in the file
  std::size_t dropped_rows = 0;   // missing or invalid values in used columns
  std::size_t filtered_rows = 0;  // removed by drop_labels

  std::size_t size() const { return labels.size(); }
  RawDataset subset(std::span<const std::size_t> rows) const;
};

/// RFC-4180 style: comma separated, double-quoted fields may contain commas,
/// doubled quotes, and newlines.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

/// Load a header-row CSV under `schema`. Rows with a blank or unparsable used cell
/// are dropped and counted. Labels map to dense ids in first-appearance order.
RawDataset load_csv_dataset(const std::string& path, const Schema& schema);
RawDataset load_csv_text(const std::string& text, const Schema& schema);

/// One-hot for categorical columns, z-score for numeric ones; all statistics fit
/// on the rows passed to fit().
class FeatureEncoder {
 public:
  /// Standard deviations at or below this are treated as 1 (constant columns map to 0).
  static constexpr double kStdFloor = 1e-12;

  void fit(const RawDataset& train);
  LabeledDataset transform(const RawDataset& data) const;

  std::size_t output_width() const;
  /// Count of unseen categories encountered by transform() so far.
  std::size_t unseen_categories() const { return unseen_; }

  nlohmann::ordered_json to_json() const;
  static FeatureEncoder from_json(const nlohmann::ordered_json& j);

 private:
  std::vector<std::string> categorical_names_;
  std::vector<std::vector<std::string>> categories_;  // per column, first-appearance order
  std::vector<std::string> numeric_names_;
  Vector means_;
  Vector stddevs_;
  std::vector<std::string> class_names_;
  mutable std::size_t unseen_ = 0;
  bool fitted_ = false;
};

/// Gaussian classes with pairwise mean distance `separation` (in units of the unit
/// noise sigma), drawn deterministically from `seed`.
struct SyntheticSpec {
  std::size_t samples = 1000;
  std::size_t features = 12;
  Vector priors{0.70, 0.25, 0.05};
  double separation = 4.0;
  std::uint64_t seed = 2024;
};

RawDataset generate_synthetic(const SyntheticSpec& spec);

/// Write features and label name as CSV (header f0..f{F-1},label).
void write_dataset_csv(const LabeledDataset& data, const std::string& path);

}  // namespace dbsadam
