#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dbsadam/numerics.hpp"
#include "dbsadam/resampling.hpp"

namespace dbsadam {

/// counts[true][predicted].
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes = 0) : classes_(classes), counts_(classes * classes, 0) {}

  std::size_t classes() const { return classes_; }
  std::size_t& at(std::size_t truth, std::size_t predicted) { return counts_[truth * classes_ + predicted]; }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_[truth * classes_ + predicted]; }
  std::size_t total() const;
  std::size_t trace() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t classes_;
  std::vector<std::size_t> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct MetricsReport {
  std::vector<ClassMetrics> per_class;
  double accuracy = 0.0;
  double precision_weighted = 0.0;
  double recall_weighted = 0.0;
  double f1_weighted = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  double loss = 0.0;

  /// Named scalar metrics in a fixed order; the comparison harness aggregates these.
  std::vector<std::pair<std::string, double>> scalars() const;
};

/// Zero denominators yield 0 for the affected rate.
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm,
                                     std::span<const double> per_sample_losses = {});

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Per class, floor(count * fraction) rows go to test; the rounding remainder stays
/// in train. Order within each side follows the seeded permutation.
SplitIndices stratified_split_indices(std::span<const int> labels, std::size_t classes,
                                      double test_fraction, SeededRng& rng);

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
  SplitIndices indices;
};

DatasetSplit stratified_split(const LabeledDataset& data, double test_fraction, SeededRng& rng);

struct SignificanceResult {
  double mean_difference = 0.0;
  double t_statistic = 0.0;
  double p_value = 1.0;
  double cohens_d = 0.0;
  std::size_t degrees_of_freedom = 0;
  bool significant = false;
  /// Differences had zero variance but a nonzero mean.
  bool degenerate_variance = false;
};

inline constexpr double kSignificanceLevel = 0.05;

/// Two-sided paired t-test on a - b; also fills cohens_d.
SignificanceResult paired_t_test(std::span<const double> a, std::span<const double> b);

/// Paired effect size mean(d) / sd(d). Zero variance: 0 when mean is 0, otherwise
/// +/-infinity (the caller should check degenerate_variance from paired_t_test).
double cohens_d(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double regularized_incomplete_beta(double a, double b, double x);

/// P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  std::optional<double> stddev;  // absent with fewer than 2 runs
  std::vector<double> values;
};

/// Mean and sample standard deviation of every scalar metric across runs.
std::vector<MetricSummary> aggregate_runs(std::span<const MetricsReport> runs);

double mean(std::span<const double> x);
/// Sample (n-1) standard deviation.
double sample_stddev(std::span<const double> x);

}  // namespace dbsadam
