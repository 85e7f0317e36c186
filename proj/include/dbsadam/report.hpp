#pragma once

#include <filesystem>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "dbsadam/experiment.hpp"

namespace dbsadam {

/// Deterministic JSON view of a report. Wall-clock times are left out so reruns
/// with the same seeds produce identical bytes.
nlohmann::ordered_json report_to_json(const ComparisonReport& report);

/// One row per run: optimizer, seed, beta, alpha, best_epoch, epochs_run, metrics, lr stats.
std::string runs_csv(const ComparisonReport& report);
/// DBS-Adam learning rate per batch: optimizer, seed, step, lr.
std::string lr_trace_csv(const ComparisonReport& report);

/// Writes report.json, runs.csv and lr_trace.csv under `dir` (created if missing).
void emit_report(const ComparisonReport& report, const std::filesystem::path& dir);

/// Human-readable summary of a report.json document.
void print_summary(const nlohmann::ordered_json& report, std::ostream& out);
nlohmann::ordered_json load_report(const std::filesystem::path& path);

/// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace dbsadam
