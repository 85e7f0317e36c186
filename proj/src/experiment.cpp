#include "dbsadam/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace dbsadam {

std::string to_string(ResamplerKind kind) {
  switch (kind) {
    case ResamplerKind::none: return "none";
    case ResamplerKind::smote_enn: return "smote_enn";
    case ResamplerKind::adasyn: return "adasyn";
  }
  return "none";
}

ResamplerKind parse_resampler_kind(const std::string& name) {
  if (name == "none") return ResamplerKind::none;
  if (name == "smote_enn") return ResamplerKind::smote_enn;
  if (name == "adasyn") return ResamplerKind::adasyn;
  throw ConfigError("unknown resampler '" + name + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const std::string v = trim(value);
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const std::string v = trim(value);
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return out;
}

Vector to_doubles(const std::string& key, const std::string& value) {
  Vector out;
  for (const auto& item : split(value, ',')) out.push_back(to_double(key, item));
  return out;
}

std::vector<std::uint64_t> to_u64s(const std::string& key, const std::string& value) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(value, ',')) out.push_back(to_u64(key, item));
  return out;
}

template <typename Fn>
auto wrap_parse(const std::string& key, Fn fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError("'" + key + "': " + e.what());
  }
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

struct KeyInfo {
  std::string description;
  Setter set;
};

const std::map<std::string, KeyInfo>& key_table() {
  static const std::map<std::string, KeyInfo> table = [] {
    std::map<std::string, KeyInfo> t;
    auto add = [&](const std::string& k, const std::string& d, Setter s) { t[k] = {d, std::move(s)}; };
    using C = ExperimentConfig;
    using S = const std::string&;
    add("dataset", "'synthetic' or a CSV path", [](C& c, S, S v) { c.dataset = trim(v); });
    add("schema", "schema file mapping CSV column -> role", [](C& c, S, S v) { c.schema_path = trim(v); });
    add("drop_labels", "comma list of label values removed at load", [](C& c, S, S v) { c.drop_labels = split(v, ','); });
    add("synthetic.samples", "rows of the synthetic benchmark", [](C& c, S k, S v) { c.synthetic.samples = to_u64(k, v); });
    add("synthetic.features", "feature count of the synthetic benchmark", [](C& c, S k, S v) { c.synthetic.features = to_u64(k, v); });
    add("synthetic.priors", "comma list of class priors", [](C& c, S k, S v) { c.synthetic.priors = to_doubles(k, v); });
    add("synthetic.separation", "pairwise class-mean distance in noise sigmas", [](C& c, S k, S v) { c.synthetic.separation = to_double(k, v); });
    add("synthetic.seed", "generator seed (fixed across runs)", [](C& c, S k, S v) { c.synthetic.seed = to_u64(k, v); });
    add("sequence_length", "timesteps each feature row is chunked into", [](C& c, S k, S v) { c.sequence_length = to_u64(k, v); });
    add("resampler", "none | smote_enn | adasyn", [](C& c, S, S v) { c.resampler.kind = parse_resampler_kind(trim(v)); });
    add("smote_k", "SMOTE neighbours", [](C& c, S k, S v) { c.resampler.smote_k = to_u64(k, v); });
    add("enn_k", "ENN neighbours", [](C& c, S k, S v) { c.resampler.enn_k = to_u64(k, v); });
    add("adasyn_k", "ADASYN neighbours", [](C& c, S k, S v) { c.resampler.adasyn_k = to_u64(k, v); });
    add("hidden1", "units of the first Bi-LSTM", [](C& c, S k, S v) { c.model.hidden1 = to_u64(k, v); });
    add("hidden2", "units of the second Bi-LSTM", [](C& c, S k, S v) { c.model.hidden2 = to_u64(k, v); });
    add("dense", "units of the ReLU dense layer", [](C& c, S k, S v) { c.model.dense = to_u64(k, v); });
    add("dropout", "dropout rate between layers", [](C& c, S k, S v) { c.model.dropout_rate = to_double(k, v); });
    add("aggregation", "last | mean over the second Bi-LSTM's outputs", [](C& c, S k, S v) { c.model.aggregation = wrap_parse(k, [&] { return parse_aggregation(trim(v)); }); });
    add("loss", "cross_entropy | weighted_cross_entropy | focal", [](C& c, S k, S v) { c.loss.kind = wrap_parse(k, [&] { return parse_loss_kind(trim(v)); }); });
    add("focal_gamma", "focal focusing exponent", [](C& c, S k, S v) { c.loss.gamma = to_double(k, v); });
    add("focal_alpha", "focal alpha: one value, or one per class", [](C& c, S k, S v) {
      const Vector a = to_doubles(k, v);
      if (a.size() == 1) { c.loss.alpha = a[0]; c.loss.alpha_per_class.clear(); }
      else c.loss.alpha_per_class = a;
    });
    add("class_weights", "'auto' (N / (N_c * C) on the training split) or a comma list", [](C& c, S k, S v) {
      if (trim(v) == "auto") { c.auto_class_weights = true; c.loss.class_weights.clear(); }
      else { c.auto_class_weights = false; c.loss.class_weights = to_doubles(k, v); }
    });
    add("optimizer", "adam | amsgrad | adamw | adabound | dbs_adam", [](C& c, S k, S v) { c.optimizer = wrap_parse(k, [&] { return parse_optimizer_kind(trim(v)); }); });
    add("optimizers", "comma list of compare entries, e.g. adam,dbs_adam:alpha_mix=0.3", [](C& c, S, S v) { c.optimizers = split(v, ','); });
    add("lr", "base learning rate", [](C& c, S k, S v) { c.optimizer_config.base_lr = to_double(k, v); });
    add("beta1", "first-moment decay", [](C& c, S k, S v) { c.optimizer_config.beta1 = to_double(k, v); });
    add("beta2", "second-moment decay", [](C& c, S k, S v) { c.optimizer_config.beta2 = to_double(k, v); });
    add("epsilon", "Adam denominator epsilon", [](C& c, S k, S v) { c.optimizer_config.epsilon = to_double(k, v); });
    add("epsilon_placement", "outside_sqrt | inside_sqrt", [](C& c, S, S v) {
      const std::string p = trim(v);
      if (p == "outside_sqrt") c.optimizer_config.epsilon_placement = EpsilonPlacement::outside_sqrt;
      else if (p == "inside_sqrt") c.optimizer_config.epsilon_placement = EpsilonPlacement::inside_sqrt;
      else throw ConfigError("unknown epsilon_placement '" + p + "'");
    });
    add("weight_decay", "AdamW decoupled decay", [](C& c, S k, S v) { c.optimizer_config.weight_decay = to_double(k, v); });
    add("adabound_final_lr", "AdaBound limit rate", [](C& c, S k, S v) { c.optimizer_config.adabound_final_lr = to_double(k, v); });
    add("adabound_gamma", "AdaBound bound convergence speed", [](C& c, S k, S v) { c.optimizer_config.adabound_gamma = to_double(k, v); });
    add("ema_beta", "DBS-Adam EMA decay", [](C& c, S k, S v) { c.difficulty.ema_beta = to_double(k, v); });
    add("alpha_mix", "DBS-Adam weight of the gradient-norm signal", [](C& c, S k, S v) { c.difficulty.alpha_mix = to_double(k, v); });
    add("clip_k", "z-score clip bound K", [](C& c, S k, S v) { c.difficulty.clip_k = to_double(k, v); });
    add("d_min", "lower difficulty bound", [](C& c, S k, S v) { c.difficulty.d_min = to_double(k, v); });
    add("d_max", "upper difficulty bound", [](C& c, S k, S v) { c.difficulty.d_max = to_double(k, v); });
    add("norm_epsilon", "z-score denominator epsilon", [](C& c, S k, S v) { c.difficulty.norm_epsilon = to_double(k, v); });
    add("warmup_batches", "batches emitting the neutral difficulty", [](C& c, S k, S v) { c.difficulty.warmup_batches = to_u64(k, v); });
    add("grad_norm_mode", "global_l2 | mean_per_tensor", [](C& c, S k, S v) { c.difficulty.grad_norm_mode = wrap_parse(k, [&] { return parse_grad_norm_mode(trim(v)); }); });
    add("pinned_difficulty", "force DBS-Adam's difficulty to a constant ('none' to clear)", [](C& c, S k, S v) {
      if (trim(v) == "none") c.pinned_difficulty.reset();
      else c.pinned_difficulty = to_double(k, v);
    });
    add("batch_size", "mini-batch size", [](C& c, S k, S v) { c.training.batch_size = to_u64(k, v); });
    add("max_epochs", "epoch limit", [](C& c, S k, S v) { c.training.max_epochs = to_u64(k, v); });
    add("patience", "early-stopping patience in epochs", [](C& c, S k, S v) { c.training.patience = to_u64(k, v); });
    add("seeds", "comma list of run seeds", [](C& c, S k, S v) { c.training.seeds = to_u64s(k, v); });
    add("test_fraction", "stratified test share", [](C& c, S k, S v) { c.training.test_fraction = to_double(k, v); });
    add("validation_fraction", "stratified share of train used for early stopping", [](C& c, S k, S v) { c.training.validation_fraction = to_double(k, v); });
    add("beta_grid", "sweep values of ema_beta", [](C& c, S k, S v) { c.beta_grid = to_doubles(k, v); });
    add("alpha_grid", "sweep values of alpha_mix", [](C& c, S k, S v) { c.alpha_grid = to_doubles(k, v); });
    add("sweep_seeds", "seeds per sweep cell", [](C& c, S k, S v) { c.sweep_seeds = to_u64s(k, v); });
    add("output_dir", "directory for report files", [](C& c, S, S v) { c.output_dir = trim(v); });
    add("threads", "parallel runs (0 = hardware concurrency)", [](C& c, S k, S v) { c.threads = to_u64(k, v); });
    return t;
  }();
  return table;
}

}  // namespace

void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value) {
  const auto& table = key_table();
  const auto it = table.find(trim(key));
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second.set(config, it->first, value);
}

void apply_config_text(ExperimentConfig& config, const std::string& text) {
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
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
  }
}

void apply_config_file(ExperimentConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_config_text(config, ss.str());
}

std::vector<std::pair<std::string, std::string>> config_reference() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [k, info] : key_table()) out.emplace_back(k, info.description);
  return out;
}

void ExperimentConfig::validate() const {
  auto check = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  check(training.batch_size >= 1, "batch_size must be >= 1");
  check(training.max_epochs >= 1, "max_epochs must be >= 1");
  check(training.patience <= training.max_epochs, "patience must not exceed max_epochs");
  check(!training.seeds.empty(), "seeds must not be empty");
  check(std::set<std::uint64_t>(training.seeds.begin(), training.seeds.end()).size() ==
            training.seeds.size(),
        "seeds must be distinct");
  check(training.test_fraction > 0.0 && training.test_fraction < 1.0, "test_fraction must lie in (0, 1)");
  check(training.validation_fraction >= 0.0 && training.validation_fraction < 1.0,
        "validation_fraction must lie in [0, 1)");
  check(sequence_length >= 1, "sequence_length must be >= 1");
  check(dataset == "synthetic" || !schema_path.empty(), "a CSV dataset needs a schema");
  wrap_parse("optimizer", [&] { optimizer_config.validate(); return 0; });
  wrap_parse("difficulty", [&] { difficulty.validate(); return 0; });
  if (pinned_difficulty) {
    check(*pinned_difficulty >= difficulty.d_min && *pinned_difficulty <= difficulty.d_max,
          "pinned_difficulty must lie in [d_min, d_max]");
  }
  check(model.dropout_rate >= 0.0 && model.dropout_rate < 1.0, "dropout must lie in [0, 1)");
  check(model.hidden1 > 0 && model.hidden2 > 0 && model.dense > 0, "layer widths must be positive");
}

ExperimentConfig config_for_entry(const ExperimentConfig& base, const std::string& entry) {
  ExperimentConfig c = base;
  const auto colon = entry.find(':');
  const std::string name = trim(entry.substr(0, colon));
  c.optimizer = wrap_parse("optimizers", [&] { return parse_optimizer_kind(name); });
  if (colon != std::string::npos) {
    for (const auto& kv : split(entry.substr(colon + 1), ';')) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("optimizer entry '" + entry + "': expected key=value");
      apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
  return c;
}

RawDataset load_source(const ExperimentConfig& config) {
  if (config.dataset == "synthetic") return generate_synthetic(config.synthetic);
  Schema schema = Schema::load(config.schema_path);
  for (const auto& l : config.drop_labels) schema.drop_labels.push_back(l);
  return load_csv_dataset(config.dataset, schema);
}

PreparedData prepare_data(const ExperimentConfig& config, const RawDataset& source,
                          std::uint64_t seed) {
  const SeededRng root(seed);
  PreparedData d;
  SeededRng split_rng = root.split(1);
  d.test_split = stratified_split_indices(source.labels, source.class_names.size(),
                                          config.training.test_fraction, split_rng);
  const RawDataset raw_train = source.subset(d.test_split.train);
  const RawDataset raw_test = source.subset(d.test_split.test);
  d.encoder.fit(raw_train);
  LabeledDataset train_all = d.encoder.transform(raw_train);
  d.test = d.encoder.transform(raw_test);

  if (config.training.validation_fraction > 0.0) {
    SeededRng val_rng = root.split(2);
    DatasetSplit inner = stratified_split(train_all, config.training.validation_fraction, val_rng);
    d.train_raw = std::move(inner.train);
    d.validation = std::move(inner.test);
  } else {
    d.train_raw = std::move(train_all);
    d.validation.class_names = d.train_raw.class_names;
    d.validation.features = Matrix(0, d.train_raw.width());
  }

  SeededRng resample_rng = root.split(3);
  switch (config.resampler.kind) {
    case ResamplerKind::none:
      d.train = d.train_raw;
      break;
    case ResamplerKind::smote_enn:
      d.train = smote_enn(d.train_raw, config.resampler.smote_k, config.resampler.enn_k, resample_rng).data;
      break;
    case ResamplerKind::adasyn:
      d.train = adasyn_balance(d.train_raw, config.resampler.adasyn_k, resample_rng);
      break;
  }
  return d;
}

std::vector<Matrix> to_sequences(const LabeledDataset& data, std::size_t steps) {
  std::vector<Matrix> out;
  out.reserve(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) out.push_back(row_to_sequence(data.features.row(r), steps));
  return out;
}

namespace {

struct Evaluation {
  Vector losses;
  std::vector<int> predictions;
};

Evaluation evaluate(const SequenceNetwork& net, const std::vector<Matrix>& seqs,
                    std::span<const int> labels, const LossConfig& loss) {
  Evaluation e;
  if (seqs.empty()) return e;
  const Matrix logits = network_forward(net, seqs, Mode::eval);
  const Matrix probs = softmax_rows(logits);
  e.losses = per_sample_losses(loss, probs, labels);
  e.predictions.resize(seqs.size());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    e.predictions[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return e;
}

}  // namespace

RunResult train(const ExperimentConfig& config, const RawDataset& source, std::uint64_t seed,
                const std::string& label) {
  config.validate();
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  result.label = label.empty() ? to_string(config.optimizer) : label;
  result.seed = seed;
  result.ema_beta = config.difficulty.ema_beta;
  result.alpha_mix = config.difficulty.alpha_mix;

  const PreparedData data = prepare_data(config, source, seed);
  result.train_rows_before_resampling = data.train_raw.size();
  result.train_rows = data.train.size();

  const std::size_t steps = config.sequence_length;
  NetworkShape shape = config.model;
  shape.input_width = (data.train.width() + steps - 1) / steps;
  shape.classes = data.train.num_classes();

  const SeededRng root(seed);
  SeededRng init_rng = root.split(4);
  SeededRng shuffle_rng = root.split(5);
  SeededRng dropout_rng = root.split(6);
  SequenceNetwork net(shape, init_rng);

  LossConfig loss = config.loss;
  if (loss.kind == LossKind::weighted_cross_entropy && config.auto_class_weights) {
    loss.class_weights = default_class_weights(data.train.class_counts());
  }
  loss.validate(shape.classes);

  Optimizer optimizer(config.optimizer, config.optimizer_config, config.difficulty);
  if (config.pinned_difficulty) optimizer.tracker().pin(*config.pinned_difficulty);
  const bool trace_lr = config.optimizer == OptimizerKind::dbs_adam;

  const auto train_seq = to_sequences(data.train, steps);
  const auto val_seq = to_sequences(data.validation, steps);
  const auto test_seq = to_sequences(data.test, steps);
  const bool have_validation = !val_seq.empty();

  std::vector<std::size_t> order(train_seq.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double best_loss = std::numeric_limits<double>::infinity();
  Vector best_params = net.params().flatten();
  std::size_t since_best = 0;
  std::vector<Matrix> batch;
  std::vector<int> batch_labels;
  ForwardCache cache;

  for (std::size_t epoch = 1; epoch <= config.training.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.training.batch_size, ++batch_index) {
      try {
        const std::size_t end = std::min(order.size(), start + config.training.batch_size);
        batch.clear();
        batch_labels.clear();
        for (std::size_t k = start; k < end; ++k) {
          batch.push_back(train_seq[order[k]]);
          batch_labels.push_back(data.train.labels[order[k]]);
        }
        const Matrix logits = network_forward(net, batch, Mode::train, &dropout_rng, &cache);
        const Vector sample_losses = per_sample_losses(loss, softmax_rows(logits), batch_labels);
        const double batch_loss = batch_mean_loss(sample_losses);
        if (!std::isfinite(batch_loss)) throw NonFiniteError("batch loss is not finite");
        const Matrix d_logits = loss_gradient(loss, logits, batch_labels);
        const GradientSet grads = network_backward(net, cache, d_logits);
        const double lr = optimizer.step(net.params().views(), grads.views(), batch_loss);
        if (trace_lr) result.lr_trace.push_back(lr);
        for (double l : sample_losses) loss_sum += l;
      } catch (const std::exception& e) {
        throw std::runtime_error("run '" + result.label + "' seed " + std::to_string(seed) +
                                 " epoch " + std::to_string(epoch) + " batch " +
                                 std::to_string(batch_index) + ": " + e.what());
      }
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(order.size(), 1));
    record.validation_loss = have_validation
                                 ? batch_mean_loss(evaluate(net, val_seq, data.validation.labels, loss).losses)
                                 : record.train_loss;
    result.epochs.push_back(record);

    if (record.validation_loss < best_loss) {
      best_loss = record.validation_loss;
      best_params = net.params().flatten();
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.training.patience) {
      break;
    }
  }

  net.params().assign(best_params);
  result.best_validation_loss = best_loss;

  const Evaluation test = evaluate(net, test_seq, data.test.labels, loss);
  result.confusion = confusion_matrix(data.test.labels, test.predictions, shape.classes);
  result.test_metrics = metrics_from_confusion(result.confusion, test.losses);

  if (!result.lr_trace.empty()) {
    const auto [lo, hi] = std::minmax_element(result.lr_trace.begin(), result.lr_trace.end());
    result.lr_min = *lo;
    result.lr_max = *hi;
    result.lr_mean = mean(result.lr_trace);
  } else {
    result.lr_min = result.lr_mean = result.lr_max = config.optimizer_config.base_lr;
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

RunResult train(const ExperimentConfig& config, std::uint64_t seed) {
  const RawDataset source = load_source(config);
  return train(config, source, seed);
}

const std::vector<std::string>& compared_metrics() {
  static const std::vector<std::string> metrics{"accuracy", "precision", "recall", "f1", "loss"};
  return metrics;
}

namespace {

struct Job {
  ExperimentConfig config;
  std::string label;
  std::uint64_t seed;
};

std::vector<RunResult> run_jobs(const std::vector<Job>& jobs, const RawDataset& source,
                                std::size_t threads) {
  std::vector<RunResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = train(jobs[i].config, source, jobs[i].seed, jobs[i].label);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t n = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  n = std::min(n, std::max<std::size_t>(jobs.size(), 1));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::vector<double> metric_values(const std::vector<RunResult>& runs, std::size_t first,
                                  std::size_t count, const std::string& metric) {
  std::vector<double> out;
  for (std::size_t i = first; i < first + count; ++i) {
    for (const auto& [name, value] : runs[i].test_metrics.scalars()) {
      if (name == metric) out.push_back(value);
    }
  }
  return out;
}

std::vector<MetricSummary> aggregate_slice(const std::vector<RunResult>& runs, std::size_t first,
                                           std::size_t count) {
  std::vector<MetricsReport> reports;
  for (std::size_t i = first; i < first + count; ++i) reports.push_back(runs[i].test_metrics);
  return aggregate_runs(reports);
}

}  // namespace

ComparisonReport compare_optimizers(const ExperimentConfig& config, const RawDataset& source) {
  config.validate();
  if (config.optimizers.size() < 2) throw ConfigError("compare needs at least 2 optimizers");
  if (config.training.seeds.size() < 2) throw ConfigError("compare needs at least 2 seeds");
  ComparisonReport report;
  report.kind = "compare";
  report.labels = config.optimizers;
  report.seeds = config.training.seeds;

  std::vector<Job> jobs;
  for (const auto& entry : config.optimizers) {
    const ExperimentConfig c = config_for_entry(config, entry);
    c.validate();
    for (auto seed : config.training.seeds) jobs.push_back({c, entry, seed});
  }
  report.runs = run_jobs(jobs, source, config.threads);

  const std::size_t per = report.seeds.size();
  for (std::size_t l = 0; l < report.labels.size(); ++l) {
    report.aggregates.push_back(aggregate_slice(report.runs, l * per, per));
  }
  for (std::size_t a = 0; a < report.labels.size(); ++a) {
    for (std::size_t b = a + 1; b < report.labels.size(); ++b) {
      for (const auto& metric : compared_metrics()) {
        PairwiseEntry e;
        e.a = a;
        e.b = b;
        e.metric = metric;
        e.result = paired_t_test(metric_values(report.runs, a * per, per, metric),
                                 metric_values(report.runs, b * per, per, metric));
        report.pairwise.push_back(e);
      }
    }
  }
  return report;
}

ComparisonReport compare_optimizers(const ExperimentConfig& config) {
  return compare_optimizers(config, load_source(config));
}

ComparisonReport sensitivity_sweep(const ExperimentConfig& config, const RawDataset& source) {
  config.validate();
  if (config.beta_grid.empty() || config.alpha_grid.empty()) throw ConfigError("sweep grids must not be empty");
  if (config.sweep_seeds.empty()) throw ConfigError("sweep_seeds must not be empty");
  ComparisonReport report;
  report.kind = "sweep";
  report.seeds = config.sweep_seeds;

  std::vector<Job> jobs;
  for (double beta : config.beta_grid) {
    for (double alpha : config.alpha_grid) {
      ExperimentConfig c = config;
      c.optimizer = OptimizerKind::dbs_adam;
      c.difficulty.ema_beta = beta;
      c.difficulty.alpha_mix = alpha;
      c.validate();
      std::ostringstream label;
      label << "dbs_adam:ema_beta=" << beta << ";alpha_mix=" << alpha;
      report.labels.push_back(label.str());
      for (auto seed : config.sweep_seeds) jobs.push_back({c, label.str(), seed});
      report.grid.push_back({beta, alpha, {}});
    }
  }
  report.runs = run_jobs(jobs, source, config.threads);
  const std::size_t per = report.seeds.size();
  for (std::size_t cell = 0; cell < report.grid.size(); ++cell) {
    report.aggregates.push_back(aggregate_slice(report.runs, cell * per, per));
    report.grid[cell].metrics = report.aggregates.back();
  }
  return report;
}

ComparisonReport sensitivity_sweep(const ExperimentConfig& config) {
  return sensitivity_sweep(config, load_source(config));
}

}  // namespace dbsadam
