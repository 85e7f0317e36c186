#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbsadam/report.hpp"

using namespace dbsadam;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("DBSADAM_TEST_TMP");
  fs::path dir = env ? fs::path(env) : fs::temp_directory_path() / "dbsadam_tests";
  dir /= name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

const ComparisonReport& small_report() {
  static const ComparisonReport report = [] {
    ExperimentConfig c;
    apply_config_text(c,
                      "synthetic.samples = 240\nsynthetic.features = 4\n"
                      "hidden1 = 3\nhidden2 = 3\ndense = 4\n"
                      "max_epochs = 2\npatience = 1\nseeds = 1, 2\n"
                      "optimizers = dbs_adam, adam\n");
    return compare_optimizers(c);
  }();
  return report;
}

}  // namespace

TEST(Report, EmptyReportIsValidJson) {
  ComparisonReport empty;
  empty.kind = "compare";
  const auto j = report_to_json(empty);
  EXPECT_EQ(j.at("kind"), "compare");
  EXPECT_TRUE(j.at("runs").is_array());
  EXPECT_TRUE(j.at("runs").empty());
  EXPECT_TRUE(j.at("pairwise").empty());
  EXPECT_NO_THROW(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(line_count(runs_csv(empty)), 1u);
  EXPECT_EQ(line_count(lr_trace_csv(empty)), 1u);
}

TEST(Report, JsonContents) {
  const auto& r = small_report();
  const auto j = report_to_json(r);
  ASSERT_EQ(j.at("runs").size(), 4u);
  EXPECT_EQ(j.at("labels"), (std::vector<std::string>{"dbs_adam", "adam"}));
  EXPECT_EQ(j.at("pairwise").size(), compared_metrics().size());
  const auto& run = j.at("runs")[0];
  EXPECT_EQ(run.at("optimizer"), "dbs_adam");
  EXPECT_EQ(run.at("epochs").size(), r.runs[0].epochs.size());
  EXPECT_EQ(run.at("lr").at("steps"), r.runs[0].lr_trace.size());
  EXPECT_FALSE(run.contains("wall_seconds"));
  EXPECT_EQ(j.at("aggregates").at("adam").at("accuracy").at("values").size(), 2u);
}

TEST(Report, EmitIsByteIdenticalAcrossWrites) {
  const auto dir_a = scratch("emit_a"), dir_b = scratch("emit_b");
  emit_report(small_report(), dir_a);
  emit_report(small_report(), dir_b);
  for (const char* f : {"report.json", "runs.csv", "lr_trace.csv"}) {
    ASSERT_TRUE(fs::exists(dir_a / f)) << f;
    EXPECT_EQ(slurp(dir_a / f), slurp(dir_b / f)) << f;
  }
  EXPECT_EQ(line_count(slurp(dir_a / "runs.csv")), small_report().runs.size() + 1);
  std::size_t steps = 0;
  for (const auto& run : small_report().runs) steps += run.lr_trace.size();
  EXPECT_EQ(line_count(slurp(dir_a / "lr_trace.csv")), steps + 1);
  EXPECT_EQ(slurp(dir_a / "runs.csv").substr(0, 23), "optimizer,seed,beta,alp");
}

TEST(Report, LoadRoundTripAndSummary) {
  const auto dir = scratch("roundtrip");
  emit_report(small_report(), dir);
  const auto loaded = load_report(dir / "report.json");
  EXPECT_EQ(loaded.dump(), report_to_json(small_report()).dump());
  std::ostringstream out;
  print_summary(loaded, out);
  EXPECT_NE(out.str().find("dbs_adam"), std::string::npos);
  EXPECT_NE(out.str().find("adam"), std::string::npos);
  EXPECT_THROW(load_report(dir / "missing.json"), std::exception);
}

TEST(Report, UnwritablePathNamesThePath) {
  const auto blocker = scratch("blocker");
  fs::create_directories(blocker.parent_path());
  std::ofstream(blocker) << "file, not a directory";
  const fs::path target = blocker / "out";
  try {
    emit_report(small_report(), target);
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find(blocker.string()), std::string::npos) << e.what();
  }
}

TEST(Report, NonFiniteValuesSerializeAsStrings) {
  ComparisonReport r;
  r.kind = "compare";
  r.labels = {"a", "b"};
  PairwiseEntry p;
  p.a = 0;
  p.b = 1;
  p.metric = "accuracy";
  p.result.t_statistic = INFINITY;
  p.result.degenerate_variance = true;
  r.pairwise.push_back(p);
  const auto j = report_to_json(r);
  EXPECT_NO_THROW(nlohmann::json::parse(j.dump()));
  EXPECT_NE(j.dump().find("\"inf\""), std::string::npos);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1e-300), "1e-300");
  EXPECT_EQ(std::stod(format_double(0.30000000000000004)), 0.30000000000000004);
}
