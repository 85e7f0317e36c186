#include "dbsadam/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace dbsadam {

using nlohmann::ordered_json;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

// JSON has no infinities; a degenerate t statistic is written as a string.
ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

ordered_json metrics_json(const MetricsReport& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [name, value] : m.scalars()) j[name] = number(value);
  ordered_json per_class = ordered_json::array();
  for (const auto& c : m.per_class) {
    per_class.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                         {"support", c.support}});
  }
  j["per_class"] = per_class;
  return j;
}

ordered_json summary_json(const std::vector<MetricSummary>& summaries) {
  ordered_json j = ordered_json::object();
  for (const auto& s : summaries) {
    ordered_json e = {{"mean", number(s.mean)}};
    e["std"] = s.stddev ? number(*s.stddev) : ordered_json(nullptr);
    e["values"] = s.values;
    j[s.name] = e;
  }
  return j;
}

ordered_json run_json(const RunResult& r) {
  ordered_json j;
  j["optimizer"] = r.label;
  j["seed"] = r.seed;
  j["ema_beta"] = r.ema_beta;
  j["alpha_mix"] = r.alpha_mix;
  j["train_rows_before_resampling"] = r.train_rows_before_resampling;
  j["train_rows"] = r.train_rows;
  j["best_epoch"] = r.best_epoch;
  j["epochs_run"] = r.epochs_run();
  j["best_validation_loss"] = number(r.best_validation_loss);
  ordered_json epochs = ordered_json::array();
  for (const auto& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"train_loss", number(e.train_loss)},
                      {"validation_loss", number(e.validation_loss)}});
  }
  j["epochs"] = epochs;
  j["test"] = metrics_json(r.test_metrics);
  ordered_json cm = ordered_json::array();
  for (std::size_t t = 0; t < r.confusion.classes(); ++t) {
    ordered_json row = ordered_json::array();
    for (std::size_t p = 0; p < r.confusion.classes(); ++p) row.push_back(r.confusion.at(t, p));
    cm.push_back(row);
  }
  j["confusion"] = cm;
  j["lr"] = {{"min", r.lr_min}, {"mean", r.lr_mean}, {"max", r.lr_max}, {"steps", r.lr_trace.size()}};
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace

ordered_json report_to_json(const ComparisonReport& report) {
  ordered_json j;
  j["kind"] = report.kind;
  j["labels"] = report.labels;
  j["seeds"] = report.seeds;
  ordered_json aggregates = ordered_json::object();
  for (std::size_t i = 0; i < report.aggregates.size() && i < report.labels.size(); ++i) {
    aggregates[report.labels[i]] = summary_json(report.aggregates[i]);
  }
  j["aggregates"] = aggregates;
  ordered_json pairwise = ordered_json::array();
  for (const auto& p : report.pairwise) {
    pairwise.push_back({{"a", report.labels.at(p.a)},
                        {"b", report.labels.at(p.b)},
                        {"metric", p.metric},
                        {"mean_difference", number(p.result.mean_difference)},
                        {"t", number(p.result.t_statistic)},
                        {"df", p.result.degrees_of_freedom},
                        {"p", number(p.result.p_value)},
                        {"cohens_d", number(p.result.cohens_d)},
                        {"significant", p.result.significant},
                        {"degenerate_variance", p.result.degenerate_variance}});
  }
  j["pairwise"] = pairwise;
  if (!report.grid.empty()) {
    ordered_json grid = ordered_json::array();
    for (const auto& cell : report.grid) {
      grid.push_back({{"ema_beta", cell.ema_beta},
                      {"alpha_mix", cell.alpha_mix},
                      {"metrics", summary_json(cell.metrics)}});
    }
    j["grid"] = grid;
  }
  ordered_json runs = ordered_json::array();
  for (const auto& r : report.runs) runs.push_back(run_json(r));
  j["runs"] = runs;
  return j;
}

std::string runs_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << "optimizer,seed,beta,alpha,best_epoch,epochs_run,accuracy,precision,recall,f1,loss,"
         "lr_min,lr_mean,lr_max\n";
  for (const auto& r : report.runs) {
    const auto& m = r.test_metrics;
    out << '"' << r.label << "\"," << r.seed << ',' << format_double(r.ema_beta) << ','
        << format_double(r.alpha_mix) << ',' << r.best_epoch << ',' << r.epochs_run() << ','
        << format_double(m.accuracy) << ',' << format_double(m.precision_weighted) << ','
        << format_double(m.recall_weighted) << ',' << format_double(m.f1_weighted) << ','
        << format_double(m.loss) << ',' << format_double(r.lr_min) << ','
        << format_double(r.lr_mean) << ',' << format_double(r.lr_max) << '\n';
  }
  return out.str();
}

std::string lr_trace_csv(const ComparisonReport& report) {
  std::ostringstream out;
  out << "optimizer,seed,step,lr\n";
  for (const auto& r : report.runs) {
    for (std::size_t s = 0; s < r.lr_trace.size(); ++s) {
      out << '"' << r.label << "\"," << r.seed << ',' << s + 1 << ',' << format_double(r.lr_trace[s])
          << '\n';
    }
  }
  return out.str();
}

void emit_report(const ComparisonReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
  write_file(dir / "report.json", report_to_json(report).dump(2) + "\n");
  write_file(dir / "runs.csv", runs_csv(report));
  write_file(dir / "lr_trace.csv", lr_trace_csv(report));
}

ordered_json load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

namespace {

std::string cell(const ordered_json& v, int precision = 4) {
  if (v.is_number()) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(precision) << v.get<double>();
    return s.str();
  }
  if (v.is_null()) return "-";
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

void print_summary(const ordered_json& report, std::ostream& out) {
  out << "kind: " << report.value("kind", "?") << "\n";
  if (report.contains("seeds")) out << "seeds: " << report["seeds"].dump() << "\n";
  if (report.contains("aggregates")) {
    out << "\n" << std::left << std::setw(40) << "optimizer" << std::setw(20) << "accuracy"
        << std::setw(20) << "f1" << "loss\n";
    for (const auto& [label, metrics] : report["aggregates"].items()) {
      auto pm = [&](const char* name) {
        if (!metrics.contains(name)) return std::string("-");
        const auto& m = metrics[name];
        return cell(m["mean"]) + " +/- " + cell(m["std"]);
      };
      out << std::setw(40) << label << std::setw(20) << pm("accuracy") << std::setw(20) << pm("f1")
          << pm("loss") << "\n";
    }
  }
  if (report.contains("pairwise") && !report["pairwise"].empty()) {
    out << "\npaired t-tests (two-sided, alpha 0.05)\n";
    for (const auto& p : report["pairwise"]) {
      out << "  " << p["a"].get<std::string>() << " vs " << p["b"].get<std::string>() << " ["
          << p["metric"].get<std::string>() << "]: t=" << cell(p["t"], 3) << " p=" << cell(p["p"])
          << " d=" << cell(p["cohens_d"], 3) << (p["significant"].get<bool>() ? " *" : "") << "\n";
    }
  }
}

}  // namespace dbsadam
