#include "dbsadam/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dbsadam {

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (auto c : counts_) s += c;
  return s;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t s = 0;
  for (std::size_t c = 0; c < classes_; ++c) s += at(c, c);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 std::size_t classes) {
  if (truth.size() != predicted.size()) {
    throw DimensionError(std::to_string(truth.size()) + " labels but " +
                         std::to_string(predicted.size()) + " predictions");
  }
  ConfusionMatrix cm(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (int v : {truth[i], predicted[i]}) {
      if (v < 0 || static_cast<std::size_t>(v) >= classes) {
        throw std::out_of_range("label " + std::to_string(v) + " at position " +
                                std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
      }
    }
    ++cm.at(static_cast<std::size_t>(truth[i]), static_cast<std::size_t>(predicted[i]));
  }
  return cm;
}

std::vector<std::pair<std::string, double>> MetricsReport::scalars() const {
  return {{"accuracy", accuracy},
          {"precision", precision_weighted},
          {"recall", recall_weighted},
          {"f1", f1_weighted},
          {"precision_macro", precision_macro},
          {"recall_macro", recall_macro},
          {"f1_macro", f1_macro},
          {"loss", loss}};
}

namespace {
double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm,
                                     std::span<const double> per_sample_losses) {
  MetricsReport r;
  const std::size_t classes = cm.classes();
  const std::size_t total = cm.total();
  r.per_class.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t predicted = 0;
    std::size_t support = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      predicted += cm.at(k, c);
      support += cm.at(c, k);
    }
    auto& m = r.per_class[c];
    m.support = support;
    m.precision = ratio(cm.at(c, c), predicted);
    m.recall = ratio(cm.at(c, c), support);
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
  }
  r.accuracy = ratio(cm.trace(), total);
  for (const auto& m : r.per_class) {
    const double w = ratio(m.support, total);
    r.precision_weighted += w * m.precision;
    r.recall_weighted += w * m.recall;
    r.f1_weighted += w * m.f1;
    r.precision_macro += m.precision;
    r.recall_macro += m.recall;
    r.f1_macro += m.f1;
  }
  if (classes > 0) {
    r.precision_macro /= static_cast<double>(classes);
    r.recall_macro /= static_cast<double>(classes);
    r.f1_macro /= static_cast<double>(classes);
  }
  if (!per_sample_losses.empty()) r.loss = mean(per_sample_losses);
  return r;
}

SplitIndices stratified_split_indices(std::span<const int> labels, std::size_t classes,
                                      double test_fraction, SeededRng& rng) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test fraction must lie in [0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  }
  SplitIndices out;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    if (rows.size() < 2 && test_fraction > 0.0) {
      throw std::invalid_argument("stratified split: class " + std::to_string(c) + " has " +
                                  std::to_string(rows.size()) + " sample; need at least 2");
    }
    rng.shuffle(rows);
    const auto n_test = static_cast<std::size_t>(
        std::floor(static_cast<double>(rows.size()) * test_fraction + 1e-9));
    out.test.insert(out.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  rng.shuffle(out.train);
  rng.shuffle(out.test);
  return out;
}

DatasetSplit stratified_split(const LabeledDataset& data, double test_fraction, SeededRng& rng) {
  data.validate();
  DatasetSplit s;
  s.indices = stratified_split_indices(data.labels, data.num_classes(), test_fraction, rng);
  s.train = data.subset(s.indices.train);
  s.test = data.subset(s.indices.test);
  return s;
}

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean of an empty sequence");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_stddev(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("sample standard deviation needs n >= 2");
  const double mu = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

namespace {

// Continued fraction for I_x(a, b), modified Lentz. Converges quickly for
// x < (a + 1) / (a + b + 2); relative accuracy ~1e-15 at exit.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("incomplete beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be > 0");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

namespace {

Vector differences(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("paired samples differ in length: " + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()));
  }
  if (a.size() < 2) throw std::invalid_argument("paired comparison needs at least 2 pairs");
  Vector d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

}  // namespace

SignificanceResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  const Vector d = differences(a, b);
  const std::size_t n = d.size();
  SignificanceResult r;
  r.degrees_of_freedom = n - 1;
  r.mean_difference = mean(d);
  const double sd = sample_stddev(d);
  if (sd == 0.0) {
    if (r.mean_difference == 0.0) {
      r.t_statistic = 0.0;
      r.p_value = 1.0;
      r.cohens_d = 0.0;
    } else {
      r.degenerate_variance = true;
      r.t_statistic = std::copysign(std::numeric_limits<double>::infinity(), r.mean_difference);
      r.p_value = 0.0;
      r.cohens_d = r.t_statistic;
    }
  } else {
    r.t_statistic = r.mean_difference * std::sqrt(static_cast<double>(n)) / sd;
    r.p_value = student_t_two_sided_p(r.t_statistic, static_cast<double>(n - 1));
    r.cohens_d = r.mean_difference / sd;
  }
  r.significant = r.p_value < kSignificanceLevel;
  return r;
}

double cohens_d(std::span<const double> a, std::span<const double> b) {
  const Vector d = differences(a, b);
  const double mu = mean(d);
  const double sd = sample_stddev(d);
  if (sd == 0.0) {
    return mu == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mu);
  }
  return mu / sd;
}

std::vector<MetricSummary> aggregate_runs(std::span<const MetricsReport> runs) {
  std::vector<MetricSummary> out;
  if (runs.empty()) return out;
  for (const auto& [name, value] : runs.front().scalars()) out.push_back({name, 0.0, std::nullopt, {}});
  for (const auto& run : runs) {
    const auto s = run.scalars();
    for (std::size_t k = 0; k < s.size(); ++k) out[k].values.push_back(s[k].second);
  }
  for (auto& m : out) {
    m.mean = mean(m.values);
    if (m.values.size() >= 2) m.stddev = sample_stddev(m.values);
  }
  return out;
}

}  // namespace dbsadam
