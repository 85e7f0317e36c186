#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "dbsadam/experiment.hpp"

using namespace dbsadam;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  apply_config_text(c,
                    "synthetic.samples = 300\n"
                    "synthetic.features = 6\n"
                    "hidden1 = 4\nhidden2 = 3\ndense = 6\n"
                    "sequence_length = 2\n"
                    "batch_size = 32\nmax_epochs = 3\npatience = 2\n"
                    "seeds = 11, 12\n"
                    "resampler = smote_enn\n"
                    "loss = focal\n");
  return c;
}

const RawDataset& small_source() {
  static const RawDataset source = load_source(small_config());
  return source;
}

void expect_identical(const RunResult& a, const RunResult& b) {
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t e = 0; e < a.epochs.size(); ++e) {
    EXPECT_EQ(a.epochs[e].train_loss, b.epochs[e].train_loss);
    EXPECT_EQ(a.epochs[e].validation_loss, b.epochs[e].validation_loss);
  }
  EXPECT_EQ(a.best_epoch, b.best_epoch);
  EXPECT_EQ(a.test_metrics.scalars(), b.test_metrics.scalars());
  EXPECT_EQ(a.lr_trace, b.lr_trace);
}

}  // namespace

TEST(Config, ParsesKeysAndComments) {
  ExperimentConfig c;
  apply_config_text(c, "# comment\n lr = 0.002  # trailing\noptimizers = adam, dbs_adam:alpha_mix=0.3\n"
                       "class_weights = 1, 2, 3\nfocal_alpha = 0.5\nseeds = 1,2,3\n");
  EXPECT_EQ(c.optimizer_config.base_lr, 0.002);
  EXPECT_EQ(c.optimizers, (std::vector<std::string>{"adam", "dbs_adam:alpha_mix=0.3"}));
  EXPECT_FALSE(c.auto_class_weights);
  EXPECT_EQ(c.loss.class_weights, (Vector{1, 2, 3}));
  EXPECT_EQ(c.loss.alpha, 0.5);
  EXPECT_EQ(c.training.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, Errors) {
  ExperimentConfig c;
  EXPECT_THROW(apply_setting(c, "learning_rate", "0.1"), ConfigError);
  EXPECT_THROW(apply_setting(c, "lr", "fast"), ConfigError);
  EXPECT_THROW(apply_setting(c, "batch_size", "-3"), ConfigError);
  EXPECT_THROW(apply_setting(c, "optimizer", "sgd"), ConfigError);
  EXPECT_THROW(apply_setting(c, "loss", "hinge"), ConfigError);
  EXPECT_THROW(apply_setting(c, "resampler", "tomek"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "lr 0.1\n"), ConfigError);
  EXPECT_THROW(apply_config_file(c, "/nonexistent/x.conf"), ConfigError);

  auto invalid = [](const std::string& key, const std::string& value) {
    ExperimentConfig bad;
    apply_setting(bad, key, value);
    EXPECT_THROW(bad.validate(), ConfigError) << key << "=" << value;
  };
  invalid("seeds", "1,1");
  invalid("patience", "50");
  invalid("test_fraction", "1");
  invalid("dropout", "1");
  invalid("lr", "0");
  invalid("ema_beta", "1");
  invalid("pinned_difficulty", "2");
  invalid("dataset", "data.csv");
}

TEST(Config, ReferenceListsEveryKey) {
  std::set<std::string> keys;
  for (const auto& [k, d] : config_reference()) {
    keys.insert(k);
    EXPECT_FALSE(d.empty());
  }
  for (const char* k : {"lr", "ema_beta", "alpha_mix", "optimizers", "resampler", "pinned_difficulty"})
    EXPECT_TRUE(keys.count(k)) << k;
}

TEST(Config, EntrySyntax) {
  const ExperimentConfig base;
  const auto c = config_for_entry(base, "dbs_adam:ema_beta=0.8;alpha_mix=0.3");
  EXPECT_EQ(c.optimizer, OptimizerKind::dbs_adam);
  EXPECT_EQ(c.difficulty.ema_beta, 0.8);
  EXPECT_EQ(c.difficulty.alpha_mix, 0.3);
  EXPECT_EQ(config_for_entry(base, "amsgrad").optimizer, OptimizerKind::amsgrad);
  EXPECT_THROW(config_for_entry(base, "nadam"), ConfigError);
  EXPECT_THROW(config_for_entry(base, "adam:lr"), ConfigError);
}

TEST(Train, SameSeedIsBitIdentical) {
  const auto c = small_config();
  expect_identical(train(c, small_source(), 11), train(c, small_source(), 11));
  const auto other = train(c, small_source(), 12);
  EXPECT_NE(other.epochs.front().train_loss, train(c, small_source(), 11).epochs.front().train_loss);
}

TEST(Train, PatienceZeroStopsAtFirstNonImprovement) {
  auto c = small_config();
  apply_setting(c, "patience", "0");
  apply_setting(c, "max_epochs", "20");
  apply_setting(c, "lr", "0.05");
  const auto r = train(c, small_source(), 11);
  ASSERT_LT(r.best_epoch, 20u);
  EXPECT_EQ(r.epochs_run(), r.best_epoch + 1);
  for (std::size_t e = 1; e < r.best_epoch; ++e)
    EXPECT_LT(r.epochs[e].validation_loss, r.epochs[e - 1].validation_loss);
}

TEST(Train, BestEpochHasLowestValidationLoss) {
  auto c = small_config();
  apply_setting(c, "max_epochs", "6");
  const auto r = train(c, small_source(), 12);
  double lowest = INFINITY;
  for (const auto& e : r.epochs) lowest = std::min(lowest, e.validation_loss);
  EXPECT_EQ(r.best_validation_loss, lowest);
  EXPECT_EQ(r.epochs[r.best_epoch - 1].validation_loss, lowest);
}

TEST(Prepare, TestRowsNeverResampled) {
  auto c = small_config();
  apply_setting(c, "synthetic.priors", "0.8,0.15,0.05");
  const RawDataset& source = small_source();
  const PreparedData d = prepare_data(c, source, 11);
  const LabeledDataset expected_test = d.encoder.transform(source.subset(d.test_split.test));
  ASSERT_EQ(d.test.size(), expected_test.size());
  for (std::size_t r = 0; r < d.test.size(); ++r) {
    EXPECT_EQ(d.test.labels[r], expected_test.labels[r]);
    for (std::size_t f = 0; f < d.test.width(); ++f) EXPECT_EQ(d.test.features(r, f), expected_test.features(r, f));
  }
  std::set<std::vector<double>> train_rows;
  for (std::size_t r = 0; r < d.train.size(); ++r) {
    const auto row = d.train.features.row(r);
    train_rows.insert({row.begin(), row.end()});
  }
  for (std::size_t r = 0; r < d.test.size(); ++r) {
    const auto row = d.test.features.row(r);
    EXPECT_FALSE(train_rows.count({row.begin(), row.end()}));
  }
  ExperimentConfig none = c;
  apply_setting(none, "resampler", "none");
  const PreparedData plain = prepare_data(none, source, 11);
  EXPECT_EQ(plain.test_split.test, d.test_split.test);
  EXPECT_EQ(plain.train.size(), plain.train_raw.size());
  EXPECT_NE(d.train.size(), d.train_raw.size());
}

TEST(Prepare, EncoderFitOnTrainingPortionOnly) {
  const auto c = small_config();
  const RawDataset& source = small_source();
  const PreparedData d = prepare_data(c, source, 11);
  FeatureEncoder own;
  own.fit(source.subset(d.test_split.train));
  EXPECT_EQ(own.to_json().dump(), d.encoder.to_json().dump());
}

TEST(Train, LrTraceWithinDifficultyBounds) {
  auto c = small_config();
  apply_setting(c, "lr", "0.01");
  const auto r = train(c, small_source(), 11);
  ASSERT_GT(r.lr_trace.size(), c.difficulty.warmup_batches);
  for (std::size_t i = 0; i < c.difficulty.warmup_batches; ++i) EXPECT_EQ(r.lr_trace[i], 0.01 * 0.5);
  for (double lr : r.lr_trace) {
    EXPECT_GE(lr, 0.01 * c.difficulty.d_min);
    EXPECT_LE(lr, 0.01 * c.difficulty.d_max);
  }
  EXPECT_LE(r.lr_min, r.lr_mean);
  EXPECT_LE(r.lr_mean, r.lr_max);

  apply_setting(c, "optimizer", "adam");
  const auto a = train(c, small_source(), 11);
  EXPECT_TRUE(a.lr_trace.empty());
  EXPECT_EQ(a.lr_mean, 0.01);
}

TEST(Compare, PinnedDifficultyMatchesScaledAdam) {
  auto c = small_config();
  apply_setting(c, "optimizers", "dbs_adam:pinned_difficulty=0.5,adam:lr=0.0005");
  const auto report = compare_optimizers(c, small_source());
  ASSERT_EQ(report.runs.size(), 4u);
  for (std::size_t s = 0; s < 2; ++s) {
    const auto& dbs = report.runs[s];
    const auto& adam = report.runs[2 + s];
    EXPECT_EQ(dbs.test_metrics.scalars(), adam.test_metrics.scalars());
    ASSERT_EQ(dbs.epochs.size(), adam.epochs.size());
    for (std::size_t e = 0; e < dbs.epochs.size(); ++e)
      EXPECT_EQ(dbs.epochs[e].validation_loss, adam.epochs[e].validation_loss);
  }
  for (const auto& p : report.pairwise) {
    EXPECT_EQ(p.result.t_statistic, 0.0) << p.metric;
    EXPECT_EQ(p.result.p_value, 1.0) << p.metric;
    EXPECT_EQ(p.result.cohens_d, 0.0) << p.metric;
  }
}

TEST(Compare, PairwiseCountSplitsAndOrdering) {
  auto c = small_config();
  apply_setting(c, "max_epochs", "2");
  apply_setting(c, "optimizers", "adam,amsgrad,adamw");
  apply_setting(c, "threads", "3");
  const auto report = compare_optimizers(c, small_source());
  EXPECT_EQ(report.labels.size(), 3u);
  EXPECT_EQ(report.pairwise.size(), 3u * compared_metrics().size());
  ASSERT_EQ(report.runs.size(), 6u);
  for (std::size_t l = 0; l < 3; ++l) {
    for (std::size_t s = 0; s < 2; ++s) {
      const auto& r = report.runs[l * 2 + s];
      EXPECT_EQ(r.label, report.labels[l]);
      EXPECT_EQ(r.seed, report.seeds[s]);
      EXPECT_EQ(r.train_rows, report.runs[s].train_rows);
      EXPECT_EQ(r.train_rows_before_resampling, report.runs[s].train_rows_before_resampling);
      EXPECT_EQ(r.test_metrics.per_class.size(), report.runs[s].test_metrics.per_class.size());
    }
  }
  ExperimentConfig serial = c;
  apply_setting(serial, "threads", "1");
  const auto again = compare_optimizers(serial, small_source());
  for (std::size_t i = 0; i < report.runs.size(); ++i) expect_identical(report.runs[i], again.runs[i]);
}

TEST(Compare, SelfComparisonIsNull) {
  auto c = small_config();
  apply_setting(c, "max_epochs", "2");
  apply_setting(c, "optimizers", "adam,adam");
  const auto report = compare_optimizers(c, small_source());
  for (const auto& p : report.pairwise) {
    EXPECT_EQ(p.result.t_statistic, 0.0);
    EXPECT_EQ(p.result.p_value, 1.0);
    EXPECT_EQ(p.result.cohens_d, 0.0);
  }
}

TEST(Compare, NeedsTwoOptimizersAndSeeds) {
  auto c = small_config();
  apply_setting(c, "optimizers", "adam");
  EXPECT_THROW(compare_optimizers(c, small_source()), ConfigError);
  c = small_config();
  apply_setting(c, "seeds", "5");
  EXPECT_THROW(compare_optimizers(c, small_source()), ConfigError);
}

TEST(Sweep, DefaultGridHasTwelveCells) {
  auto c = small_config();
  apply_setting(c, "max_epochs", "1");
  apply_setting(c, "patience", "1");
  apply_setting(c, "sweep_seeds", "11");
  apply_setting(c, "threads", "0");
  const auto report = sensitivity_sweep(c, small_source());
  ASSERT_EQ(report.grid.size(), 12u);
  EXPECT_EQ(report.runs.size(), 12u);
  EXPECT_EQ(report.grid.front().ema_beta, 0.8);
  EXPECT_EQ(report.grid.front().alpha_mix, 0.3);
  EXPECT_EQ(report.grid.back().ema_beta, 0.99);
  EXPECT_EQ(report.grid.back().alpha_mix, 0.7);
  EXPECT_EQ(report.labels.front(), "dbs_adam:ema_beta=0.8;alpha_mix=0.3");
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(report.runs[i].ema_beta, report.grid[i].ema_beta);
    EXPECT_EQ(report.runs[i].alpha_mix, report.grid[i].alpha_mix);
  }
}

TEST(Sweep, SingleCell) {
  auto c = small_config();
  apply_setting(c, "max_epochs", "1");
  apply_setting(c, "patience", "1");
  apply_setting(c, "beta_grid", "0.9");
  apply_setting(c, "alpha_grid", "0.5");
  const auto report = sensitivity_sweep(c, small_source());
  ASSERT_EQ(report.grid.size(), 1u);
  EXPECT_EQ(report.runs.size(), c.sweep_seeds.size());
  EXPECT_FALSE(report.grid[0].metrics.empty());
  apply_setting(c, "beta_grid", "");
  EXPECT_THROW(sensitivity_sweep(c, small_source()), ConfigError);
}

TEST(Train, ErrorsCarryRunContext) {
  auto c = small_config();
  apply_setting(c, "lr", "1e300");
  apply_setting(c, "optimizer", "adam");
  try {
    train(c, small_source(), 11);
    GTEST_SKIP() << "training stayed finite";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("seed 11"), std::string::npos) << msg;
    EXPECT_NE(msg.find("epoch"), std::string::npos) << msg;
    EXPECT_NE(msg.find("batch"), std::string::npos) << msg;
  }
}
