#include "dbsadam/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace dbsadam {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool parse_number(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

ColumnRole parse_column_role(const std::string& name) {
  if (name == "feature_categorical" || name == "categorical") return ColumnRole::feature_categorical;
  if (name == "feature_numeric" || name == "numeric") return ColumnRole::feature_numeric;
  if (name == "label") return ColumnRole::label;
  if (name == "ignore") return ColumnRole::ignore;
  throw ConfigError("unknown column role '" + name + "'");
}

std::string to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::feature_categorical: return "feature_categorical";
    case ColumnRole::feature_numeric: return "feature_numeric";
    case ColumnRole::label: return "label";
    case ColumnRole::ignore: return "ignore";
  }
  return "ignore";
}

Schema Schema::parse(const std::string& text) {
  Schema schema;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("schema line " + std::to_string(line_no) + ": expected 'column = role'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "drop_labels") {
      schema.drop_labels = split_list(value);
      continue;
    }
    schema.columns.emplace_back(key, parse_column_role(value));
  }
  std::size_t labels = 0;
  for (const auto& [name, role] : schema.columns) labels += role == ColumnRole::label;
  if (labels != 1) throw ConfigError("schema must declare exactly one label column");
  return schema;
}

Schema Schema::load(const std::string& path) { return parse(read_file(path)); }

std::string Schema::label_column() const {
  for (const auto& [name, role] : columns) {
    if (role == ColumnRole::label) return name;
  }
  throw ConfigError("schema has no label column");
}

RawDataset RawDataset::subset(std::span<const std::size_t> rows) const {
  RawDataset out;
  out.categorical_names = categorical_names;
  out.numeric_names = numeric_names;
  out.class_names = class_names;
  out.numeric = Matrix(0, numeric.cols());
  for (std::size_t r : rows) {
    out.categorical.push_back(categorical[r]);
    out.numeric.append_row(numeric.row(r));
    out.labels.push_back(labels[r]);
  }
  out.raw_rows = rows.size();
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        in_quotes = true;
        row_has_content = true;
        break;
      case ',':
        row.push_back(std::move(field));
        field.clear();
        row_has_content = true;
        break;
      case '\r':
        break;
      case '\n':
        if (row_has_content || !field.empty()) {
          row.push_back(std::move(field));
          rows.push_back(std::move(row));
        }
        row.clear();
        field.clear();
        row_has_content = false;
        break;
      default:
        field += ch;
        row_has_content = true;
    }
  }
  if (in_quotes) throw ConfigError("CSV ends inside a quoted field");
  if (row_has_content || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

RawDataset load_csv_text(const std::string& text, const Schema& schema) {
  auto table = parse_csv(text);
  if (table.empty()) throw ConfigError("CSV has no header row");
  const auto& header = table.front();
  std::map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) position[trim(header[c])] = c;

  RawDataset data;
  std::vector<std::size_t> cat_cols, num_cols;
  std::size_t label_col = 0;
  for (const auto& [name, role] : schema.columns) {
    const auto it = position.find(name);
    if (it == position.end()) {
      if (role == ColumnRole::ignore) continue;
      throw ConfigError("schema column '" + name + "' not present in CSV header");
    }
    switch (role) {
      case ColumnRole::feature_categorical:
        cat_cols.push_back(it->second);
        data.categorical_names.push_back(name);
        break;
      case ColumnRole::feature_numeric:
        num_cols.push_back(it->second);
        data.numeric_names.push_back(name);
        break;
      case ColumnRole::label:
        label_col = it->second;
        break;
      case ColumnRole::ignore:
        break;
    }
  }

  data.numeric = Matrix(0, num_cols.size());
  std::map<std::string, int> class_ids;
  Vector numeric_row(num_cols.size());
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& row = table[r];
    ++data.raw_rows;
    auto cell = [&](std::size_t c) { return c < row.size() ? trim(row[c]) : std::string(); };

    const std::string label = cell(label_col);
    bool valid = !label.empty();
    std::vector<std::string> cats;
    for (std::size_t c : cat_cols) {
      cats.push_back(cell(c));
      if (cats.back().empty()) valid = false;
    }
    for (std::size_t k = 0; k < num_cols.size() && valid; ++k) {
      valid = parse_number(cell(num_cols[k]), numeric_row[k]);
    }
    if (!valid) {
      ++data.dropped_rows;
      continue;
    }
    if (std::find(schema.drop_labels.begin(), schema.drop_labels.end(), label) !=
        schema.drop_labels.end()) {
      ++data.filtered_rows;
      continue;
    }
    auto [it, inserted] = class_ids.emplace(label, static_cast<int>(data.class_names.size()));
    if (inserted) data.class_names.push_back(label);
    data.labels.push_back(it->second);
    data.categorical.push_back(std::move(cats));
    data.numeric.append_row(numeric_row);
  }
  if (data.labels.empty()) throw ConfigError("no usable rows after cleaning");
  return data;
}

RawDataset load_csv_dataset(const std::string& path, const Schema& schema) {
  return load_csv_text(read_file(path), schema);
}

void FeatureEncoder::fit(const RawDataset& train) {
  if (train.size() == 0) throw std::invalid_argument("FeatureEncoder::fit: empty training set");
  categorical_names_ = train.categorical_names;
  numeric_names_ = train.numeric_names;
  class_names_ = train.class_names;
  categories_.assign(categorical_names_.size(), {});
  for (const auto& row : train.categorical) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      auto& cats = categories_[c];
      if (std::find(cats.begin(), cats.end(), row[c]) == cats.end()) cats.push_back(row[c]);
    }
  }
  const std::size_t n = train.size();
  means_.assign(numeric_names_.size(), 0.0);
  stddevs_.assign(numeric_names_.size(), 1.0);
  for (std::size_t k = 0; k < numeric_names_.size(); ++k) {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) s += train.numeric(r, k);
    const double mu = s / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t r = 0; r < n; ++r) ss += (train.numeric(r, k) - mu) * (train.numeric(r, k) - mu);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    means_[k] = mu;
    stddevs_[k] = sd <= kStdFloor ? 1.0 : sd;
  }
  fitted_ = true;
}

std::size_t FeatureEncoder::output_width() const {
  std::size_t w = numeric_names_.size();
  for (const auto& cats : categories_) w += cats.size();
  return w;
}

LabeledDataset FeatureEncoder::transform(const RawDataset& data) const {
  if (!fitted_) throw std::logic_error("FeatureEncoder::transform before fit");
  if (data.categorical_names != categorical_names_ || data.numeric_names != numeric_names_) {
    throw ConfigError("dataset columns do not match the fitted encoder");
  }
  LabeledDataset out;
  out.class_names = data.class_names;
  out.features = Matrix(data.size(), output_width());
  out.labels = data.labels;
  std::size_t unseen_here = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    auto row = out.features.row(r);
    std::size_t offset = 0;
    for (std::size_t c = 0; c < categories_.size(); ++c) {
      const auto& cats = categories_[c];
      const auto it = std::find(cats.begin(), cats.end(), data.categorical[r][c]);
      if (it != cats.end()) {
        row[offset + static_cast<std::size_t>(it - cats.begin())] = 1.0;
      } else {
        ++unseen_here;
      }
      offset += cats.size();
    }
    for (std::size_t k = 0; k < numeric_names_.size(); ++k) {
      row[offset + k] = (data.numeric(r, k) - means_[k]) / stddevs_[k];
    }
  }
  if (unseen_here > 0) {
    std::cerr << "warning: " << unseen_here
              << " categorical value(s) not seen during fit were encoded as all-zero blocks\n";
  }
  unseen_ += unseen_here;
  return out;
}

nlohmann::ordered_json FeatureEncoder::to_json() const {
  nlohmann::ordered_json j;
  j["categorical"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < categorical_names_.size(); ++c) {
    j["categorical"].push_back({{"column", categorical_names_[c]}, {"categories", categories_[c]}});
  }
  j["numeric"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < numeric_names_.size(); ++k) {
    j["numeric"].push_back({{"column", numeric_names_[k]}, {"mean", means_[k]}, {"std", stddevs_[k]}});
  }
  j["classes"] = class_names_;
  return j;
}

FeatureEncoder FeatureEncoder::from_json(const nlohmann::ordered_json& j) {
  FeatureEncoder e;
  for (const auto& c : j.at("categorical")) {
    e.categorical_names_.push_back(c.at("column").get<std::string>());
    e.categories_.push_back(c.at("categories").get<std::vector<std::string>>());
  }
  for (const auto& n : j.at("numeric")) {
    e.numeric_names_.push_back(n.at("column").get<std::string>());
    e.means_.push_back(n.at("mean").get<double>());
    e.stddevs_.push_back(n.at("std").get<double>());
  }
  e.class_names_ = j.at("classes").get<std::vector<std::string>>();
  e.fitted_ = true;
  return e;
}

RawDataset generate_synthetic(const SyntheticSpec& spec) {
  const std::size_t classes = spec.priors.size();
  if (classes < 2 || classes > spec.features) {
    throw ConfigError("synthetic data needs 2 <= classes <= features");
  }
  double prior_sum = 0.0;
  for (double p : spec.priors) {
    if (!(p > 0.0)) throw ConfigError("synthetic priors must be positive");
    prior_sum += p;
  }
  std::vector<std::size_t> counts(classes);
  std::size_t assigned = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    counts[c] = static_cast<std::size_t>(
        std::llround(spec.priors[c] / prior_sum * static_cast<double>(spec.samples)));
    assigned += counts[c];
  }
  if (assigned >= spec.samples) throw ConfigError("synthetic sample count too small for priors");
  counts[0] = spec.samples - assigned;

  SeededRng rng(spec.seed);
  std::vector<int> labels;
  for (std::size_t c = 0; c < classes; ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  rng.shuffle(labels);

  // Class means a * e_c with a = separation / sqrt(2): every pair sits `separation` apart.
  const double offset = spec.separation / std::sqrt(2.0);
  RawDataset data;
  for (std::size_t f = 0; f < spec.features; ++f) data.numeric_names.push_back("f" + std::to_string(f));
  for (std::size_t c = 0; c < classes; ++c) data.class_names.push_back("class_" + std::to_string(c));
  data.numeric = Matrix(spec.samples, spec.features);
  for (std::size_t r = 0; r < spec.samples; ++r) {
    auto row = data.numeric.row(r);
    for (std::size_t f = 0; f < spec.features; ++f) row[f] = rng.normal();
    row[static_cast<std::size_t>(labels[r])] += offset;
  }
  data.labels = std::move(labels);
  data.categorical.assign(spec.samples, {});
  data.raw_rows = spec.samples;
  return data;
}

void write_dataset_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (std::size_t f = 0; f < data.width(); ++f) out << "f" << f << ',';
  out << "label\n";
  char buf[64];
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.features.row(r)) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, ptr - buf);
      out << ',';
    }
    out << data.class_names[static_cast<std::size_t>(data.labels[r])] << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace dbsadam
