#include "dbsadam/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace dbsadam {

void LabeledDataset::validate() const {
  if (features.rows() != labels.size()) {
    throw DimensionError(std::to_string(features.rows()) + " feature rows for " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_names.size()) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(class_names.size()) + ")");
    }
  }
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<std::size_t> LabeledDataset::members(int cls) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == cls) out.push_back(i);
  }
  return out;
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out;
  out.class_names = class_names;
  out.features = Matrix(0, features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.append(features.row(r), labels[r]);
  return out;
}

void LabeledDataset::append(std::span<const double> row, int label) {
  features.append_row(row);
  labels.push_back(label);
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    s += d * d;
  }
  return s;
}

}  // namespace

std::vector<Neighbor> NeighborIndex::search(std::span<const double> point, std::size_t k,
                                            std::optional<std::size_t> exclude) const {
  const std::size_t n = points_->rows();
  const std::size_t available = exclude ? n - 1 : n;
  if (k == 0 || k > available) {
    throw std::out_of_range("k-NN: k = " + std::to_string(k) + " with " +
                            std::to_string(available) + " candidate rows");
  }
  if (point.size() != points_->cols()) {
    throw DimensionError("k-NN: query of width " + std::to_string(point.size()) +
                         " against rows of width " + std::to_string(points_->cols()));
  }
  std::vector<Neighbor> all;
  all.reserve(available);
  for (std::size_t i = 0; i < n; ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({i, squared_distance(point, points_->row(i))});
  }
  auto closer = [](const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  };
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), closer);
  all.resize(k);
  for (auto& nb : all) nb.distance = std::sqrt(nb.distance);
  return all;
}

std::vector<Neighbor> NeighborIndex::query(std::span<const double> point, std::size_t k) const {
  return search(point, k, std::nullopt);
}

std::vector<Neighbor> NeighborIndex::query_row(std::size_t row, std::size_t k) const {
  if (row >= points_->rows()) throw std::out_of_range("k-NN: row out of range");
  return search(points_->row(row), k, row);
}

namespace {

void check_class(const LabeledDataset& data, int cls) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= data.num_classes()) {
    throw std::out_of_range("class " + std::to_string(cls) + " outside [0, " +
                            std::to_string(data.num_classes()) + ")");
  }
}

/// Same-class neighbour lists: for each member, the dataset rows of its k nearest
/// fellow members.
std::vector<std::vector<std::size_t>> class_neighbors(const LabeledDataset& data,
                                                      std::span<const std::size_t> members,
                                                      std::size_t k) {
  const LabeledDataset cls = data.subset(members);
  const NeighborIndex index(cls.features);
  std::vector<std::vector<std::size_t>> out(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (const auto& nb : index.query_row(i, k)) out[i].push_back(members[nb.index]);
  }
  return out;
}

void interpolate(const LabeledDataset& data, std::size_t base, std::size_t neighbor,
                 std::optional<double> fixed_lambda, SeededRng& rng, SyntheticRows& out) {
  const double lambda = fixed_lambda ? *fixed_lambda : rng.uniform();
  auto xi = data.features.row(base);
  auto xn = data.features.row(neighbor);
  Vector row(xi.size());
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = xi[j] + lambda * (xn[j] - xi[j]);
  out.rows.append_row(row);
  out.origins.push_back({base, neighbor, lambda});
}

}  // namespace

SyntheticRows smote_generate(const LabeledDataset& data, int target_class,
                             std::size_t n_synthetic, const SmoteOptions& options,
                             SeededRng& rng) {
  data.validate();
  check_class(data, target_class);
  const auto members = data.members(target_class);
  if (members.size() < 2) {
    throw std::invalid_argument("SMOTE: class " + std::to_string(target_class) + " has " +
                                std::to_string(members.size()) + " samples; need at least 2");
  }
  if (options.k == 0 || options.k > members.size() - 1) {
    throw std::invalid_argument("SMOTE: k = " + std::to_string(options.k) + " but class " +
                                std::to_string(target_class) + " has " +
                                std::to_string(members.size()) + " samples");
  }
  SyntheticRows out;
  out.rows = Matrix(0, data.width());
  if (n_synthetic == 0) return out;
  const auto neighbors = class_neighbors(data, members, options.k);
  for (std::size_t s = 0; s < n_synthetic; ++s) {
    const auto i = static_cast<std::size_t>(rng.below(members.size()));
    const auto& nbrs = neighbors[i];
    const std::size_t nn = nbrs[static_cast<std::size_t>(rng.below(nbrs.size()))];
    interpolate(data, members[i], nn, options.fixed_lambda, rng, out);
  }
  return out;
}

EnnResult enn_filter(const LabeledDataset& data, std::size_t k) {
  data.validate();
  if (k == 0 || data.size() < k + 1) {
    throw std::invalid_argument("ENN: need k >= 1 and more than k rows (k = " + std::to_string(k) +
                                ", rows = " + std::to_string(data.size()) + ")");
  }
  const NeighborIndex index(data.features);
  std::vector<std::size_t> kept;
  EnnResult result;
  std::vector<std::size_t> votes(data.num_classes());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (const auto& nb : index.query_row(i, k)) ++votes[static_cast<std::size_t>(data.labels[nb.index])];
    const auto own = static_cast<std::size_t>(data.labels[i]);
    bool agrees = true;
    for (std::size_t c = 0; c < votes.size(); ++c) {
      if (c != own && votes[c] >= votes[own]) agrees = false;
    }
    (agrees ? kept : result.removed).push_back(i);
  }
  result.cleaned = data.subset(kept);
  return result;
}

SmoteEnnReport smote_enn(const LabeledDataset& data, std::size_t smote_k, std::size_t enn_k,
                         SeededRng& rng) {
  data.validate();
  const auto counts = data.class_counts();
  const std::size_t majority = *std::max_element(counts.begin(), counts.end());
  SmoteEnnReport report;
  report.synthetic_per_class.assign(data.num_classes(), 0);
  report.removed_per_class.assign(data.num_classes(), 0);

  LabeledDataset combined = data;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0 || counts[c] >= majority) continue;
    const auto cls = static_cast<int>(c);
    if (counts[c] < 2) {
      throw std::invalid_argument("SMOTE-ENN: class '" + data.class_names[c] + "' has " +
                                  std::to_string(counts[c]) + " sample(s); need at least 2");
    }
    SmoteOptions opts;
    // Small classes cannot supply k distinct neighbours.
    opts.k = std::min(smote_k, counts[c] - 1);
    SeededRng class_rng = rng.split(c);
    const auto synth = smote_generate(data, cls, majority - counts[c], opts, class_rng);
    for (std::size_t r = 0; r < synth.rows.rows(); ++r) combined.append(synth.rows.row(r), cls);
    report.synthetic_per_class[c] = synth.rows.rows();
  }
  EnnResult cleaned = enn_filter(combined, enn_k);
  for (std::size_t r : cleaned.removed) {
    ++report.removed_per_class[static_cast<std::size_t>(combined.labels[r])];
  }
  report.data = std::move(cleaned.cleaned);
  return report;
}

AdasynResult adasyn_generate(const LabeledDataset& data, int target_class, std::size_t total,
                             std::size_t k, SeededRng& rng) {
  data.validate();
  check_class(data, target_class);
  AdasynResult result;
  result.synthetic.rows = Matrix(0, data.width());
  result.minority_rows = data.members(target_class);
  const std::size_t m = result.minority_rows.size();
  if (m < 2) {
    throw std::invalid_argument("ADASYN: class " + std::to_string(target_class) + " has " +
                                std::to_string(m) + " samples; need at least 2");
  }
  const NeighborIndex index(data.features);
  result.ratio.resize(m);
  double ratio_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t other = 0;
    for (const auto& nb : index.query_row(result.minority_rows[i], k)) {
      if (data.labels[nb.index] != target_class) ++other;
    }
    result.ratio[i] = static_cast<double>(other) / static_cast<double>(k);
    ratio_sum += result.ratio[i];
  }
  result.density.assign(m, 0.0);
  result.allocation.assign(m, 0);
  if (ratio_sum == 0.0) {
    result.no_boundary = true;
    std::cerr << "warning: ADASYN found no class-" << target_class
              << " sample bordering another class; no synthetic rows generated\n";
    return result;
  }
  for (std::size_t i = 0; i < m; ++i) {
    result.density[i] = result.ratio[i] / ratio_sum;
    result.allocation[i] =
        static_cast<std::size_t>(std::floor(result.density[i] * static_cast<double>(total) + 0.5));
  }
  const auto neighbors = class_neighbors(data, result.minority_rows, std::min(k, m - 1));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t s = 0; s < result.allocation[i]; ++s) {
      const auto& nbrs = neighbors[i];
      const std::size_t nn = nbrs[static_cast<std::size_t>(rng.below(nbrs.size()))];
      interpolate(data, result.minority_rows[i], nn, std::nullopt, rng, result.synthetic);
    }
  }
  return result;
}

LabeledDataset adasyn_balance(const LabeledDataset& data, std::size_t k, SeededRng& rng) {
  const auto counts = data.class_counts();
  const std::size_t majority = *std::max_element(counts.begin(), counts.end());
  LabeledDataset out = data;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0 || counts[c] >= majority) continue;
    SeededRng class_rng = rng.split(c);
    const auto res =
        adasyn_generate(data, static_cast<int>(c), majority - counts[c], k, class_rng);
    for (std::size_t r = 0; r < res.synthetic.rows.rows(); ++r) {
      out.append(res.synthetic.rows.row(r), static_cast<int>(c));
    }
  }
  return out;
}

ClassDistribution class_distribution(const LabeledDataset& data) {
  ClassDistribution d;
  d.counts = data.class_counts();
  d.percentages.assign(d.counts.size(), 0.0);
  if (data.size() == 0) return d;
  for (std::size_t c = 0; c < d.counts.size(); ++c) {
    d.percentages[c] = 100.0 * static_cast<double>(d.counts[c]) / static_cast<double>(data.size());
  }
  return d;
}

}  // namespace dbsadam
