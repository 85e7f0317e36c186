#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbsadam/numerics.hpp"

namespace dbsadam {

/// Feature matrix with one integer class label per row.
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  std::size_t width() const { return features.cols(); }

  void validate() const;
  std::vector<std::size_t> class_counts() const;
  /// Rows of class `cls`, in order.
  std::vector<std::size_t> members(int cls) const;
  /// New dataset holding the given rows, in the given order.
  LabeledDataset subset(std::span<const std::size_t> rows) const;
  void append(std::span<const double> row, int label);
};

struct Neighbor {
  std::size_t index;
  double distance;
};

/// Exact Euclidean k-NN over the rows of a matrix. Ties break by lower row index.
class NeighborIndex {
 public:
  explicit NeighborIndex(const Matrix& points) : points_(&points) {}

  /// k nearest rows to an arbitrary point.
  std::vector<Neighbor> query(std::span<const double> point, std::size_t k) const;
  /// k nearest rows to row `row`, never including `row` itself.
  std::vector<Neighbor> query_row(std::size_t row, std::size_t k) const;

 private:
  std::vector<Neighbor> search(std::span<const double> point, std::size_t k,
                               std::optional<std::size_t> exclude) const;
  const Matrix* points_;
};

struct SmoteOptions {
  std::size_t k = 5;
  /// Fixes the interpolation coefficient instead of drawing it (testing hook).
  std::optional<double> fixed_lambda;
};

/// One synthetic row and where it came from (row indices refer to the input dataset).
struct SyntheticOrigin {
  std::size_t base;
  std::size_t neighbor;
  double lambda;
};

struct SyntheticRows {
  Matrix rows;
  std::vector<SyntheticOrigin> origins;
};

/// x_syn = x_i + lambda * (x_nn - x_i) with x_nn among the k same-class neighbours of x_i.
SyntheticRows smote_generate(const LabeledDataset& data, int target_class,
                             std::size_t n_synthetic, const SmoteOptions& options,
                             SeededRng& rng);

struct EnnResult {
  LabeledDataset cleaned;
  std::vector<std::size_t> removed;
};

/// Drop every row whose k-NN vote (self excluded) does not strictly favour its own label.
EnnResult enn_filter(const LabeledDataset& data, std::size_t k = 3);

struct SmoteEnnReport {
  LabeledDataset data;
  std::vector<std::size_t> synthetic_per_class;
  std::vector<std::size_t> removed_per_class;
};

/// Oversample every class to the majority count with SMOTE, then ENN-clean the union.
SmoteEnnReport smote_enn(const LabeledDataset& data, std::size_t smote_k, std::size_t enn_k,
                         SeededRng& rng);

struct AdasynResult {
  SyntheticRows synthetic;
  std::vector<std::size_t> minority_rows;  // x_i, as rows of the input
  Vector ratio;                            // r_i
  Vector density;                          // Gamma_i
  std::vector<std::size_t> allocation;     // g_i
  bool no_boundary = false;                // sum r_i == 0; nothing generated
};

/// Adaptive synthetic sampling for `target_class`, `total` synthetic rows requested.
AdasynResult adasyn_generate(const LabeledDataset& data, int target_class, std::size_t total,
                             std::size_t k, SeededRng& rng);

/// Balance every non-majority class with ADASYN (G = majority - class count).
LabeledDataset adasyn_balance(const LabeledDataset& data, std::size_t k, SeededRng& rng);

struct ClassDistribution {
  std::vector<std::size_t> counts;
  Vector percentages;
};

ClassDistribution class_distribution(const LabeledDataset& data);

}  // namespace dbsadam
