#include "dbsadam/optimizers.hpp"

#include <algorithm>
#include <cmath>

namespace dbsadam {

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::adam: return "adam";
    case OptimizerKind::amsgrad: return "amsgrad";
    case OptimizerKind::adamw: return "adamw";
    case OptimizerKind::adabound: return "adabound";
    case OptimizerKind::dbs_adam: return "dbs_adam";
  }
  return "unknown";
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "amsgrad") return OptimizerKind::amsgrad;
  if (name == "adamw") return OptimizerKind::adamw;
  if (name == "adabound") return OptimizerKind::adabound;
  if (name == "dbs_adam") return OptimizerKind::dbs_adam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

std::string to_string(GradNormMode mode) {
  return mode == GradNormMode::global_l2 ? "global_l2" : "mean_per_tensor";
}

GradNormMode parse_grad_norm_mode(const std::string& name) {
  if (name == "global_l2") return GradNormMode::global_l2;
  if (name == "mean_per_tensor") return GradNormMode::mean_per_tensor;
  throw std::invalid_argument("unknown grad_norm_mode '" + name + "'");
}

void OptimizerConfig::validate() const {
  if (!(base_lr > 0.0)) throw std::invalid_argument("base_lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(adabound_final_lr > 0.0)) throw std::invalid_argument("adabound_final_lr must be > 0");
  if (!(adabound_gamma > 0.0)) throw std::invalid_argument("adabound_gamma must be > 0");
}

void OptimizerState::ensure_shape(const GradViews& grads, bool with_v_max) {
  if (m.empty() && v.empty()) {
    for (const auto& g : grads) {
      m.emplace_back(g.size(), 0.0);
      v.emplace_back(g.size(), 0.0);
    }
  }
  if (with_v_max && v_max.empty()) {
    for (const auto& g : grads) v_max.emplace_back(g.size(), 0.0);
  }
  if (m.size() != grads.size() || v.size() != grads.size()) {
    throw DimensionError("optimizer state holds " + std::to_string(m.size()) +
                         " tensors, gradient has " + std::to_string(grads.size()));
  }
  for (std::size_t k = 0; k < grads.size(); ++k) {
    if (m[k].size() != grads[k].size() || v[k].size() != grads[k].size() ||
        (with_v_max && v_max[k].size() != grads[k].size())) {
      throw DimensionError("optimizer state tensor " + std::to_string(k) + " has " +
                           std::to_string(m[k].size()) + " entries, gradient has " +
                           std::to_string(grads[k].size()));
    }
  }
}

namespace {

void check_inputs(const ParamViews& params, const GradViews& grads) {
  if (params.size() != grads.size()) {
    throw DimensionError(std::to_string(params.size()) + " parameter tensors but " +
                         std::to_string(grads.size()) + " gradient tensors");
  }
  std::size_t flat = 0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (params[k].size() != grads[k].size()) {
      throw DimensionError("tensor " + std::to_string(k) + ": " +
                           std::to_string(params[k].size()) + " parameters, " +
                           std::to_string(grads[k].size()) + " gradient entries");
    }
    for (std::size_t i = 0; i < grads[k].size(); ++i, ++flat) {
      if (!std::isfinite(grads[k][i])) {
        throw NonFiniteError("non-finite gradient at tensor " + std::to_string(k) + " index " +
                             std::to_string(i) + " (flat index " + std::to_string(flat) + ")");
      }
    }
  }
}

double denominator(double v_hat, const OptimizerConfig& config) {
  return config.epsilon_placement == EpsilonPlacement::outside_sqrt
             ? std::sqrt(v_hat) + config.epsilon
             : std::sqrt(v_hat + config.epsilon);
}

struct BiasCorrection {
  double first;
  double second;
};

BiasCorrection advance(OptimizerState& state, const OptimizerConfig& config) {
  ++state.t;
  const auto t = static_cast<double>(state.t);
  return {1.0 - std::pow(config.beta1, t), 1.0 - std::pow(config.beta2, t)};
}

void update_moments(double g, double& m, double& v, const OptimizerConfig& config) {
  m = config.beta1 * m + (1.0 - config.beta1) * g;
  v = config.beta2 * v + (1.0 - config.beta2) * g * g;
}

}  // namespace

void adam_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
               const OptimizerConfig& config, std::optional<double> lr_override) {
  check_inputs(params, grads);
  state.ensure_shape(grads, false);
  const double lr = lr_override.value_or(config.base_lr);
  const auto bc = advance(state, config);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      update_moments(grads[k][i], m[i], v[i], config);
      const double m_hat = m[i] / bc.first;
      const double v_hat = v[i] / bc.second;
      params[k][i] -= lr * m_hat / denominator(v_hat, config);
    }
  }
}

void adam_step(Vector& params, const Vector& grads, OptimizerState& state,
               const OptimizerConfig& config, std::optional<double> lr_override) {
  adam_step(ParamViews{std::span<double>(params)}, GradViews{std::span<const double>(grads)},
            state, config, lr_override);
}

void amsgrad_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
                  const OptimizerConfig& config) {
  check_inputs(params, grads);
  state.ensure_shape(grads, true);
  const auto bc = advance(state, config);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    auto& v_max = state.v_max[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      update_moments(grads[k][i], m[i], v[i], config);
      const double m_hat = m[i] / bc.first;
      v_max[i] = std::max(v_max[i], v[i] / bc.second);
      params[k][i] -= config.base_lr * m_hat / denominator(v_max[i], config);
    }
  }
}

void adamw_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
                const OptimizerConfig& config) {
  check_inputs(params, grads);
  state.ensure_shape(grads, false);
  const double lr = config.base_lr;
  const auto bc = advance(state, config);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      update_moments(grads[k][i], m[i], v[i], config);
      const double m_hat = m[i] / bc.first;
      const double v_hat = v[i] / bc.second;
      const double decay = lr * config.weight_decay * params[k][i];
      params[k][i] -= lr * m_hat / denominator(v_hat, config);
      params[k][i] -= decay;
    }
  }
}

RateBounds adabound_bounds(const OptimizerConfig& config, std::uint64_t t) {
  if (t == 0) throw std::invalid_argument("adabound_bounds: t must be >= 1");
  const double gt = config.adabound_gamma * static_cast<double>(t);
  return {config.adabound_final_lr * (1.0 - 1.0 / (gt + 1.0)),
          config.adabound_final_lr * (1.0 + 1.0 / gt)};
}

void adabound_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
                   const OptimizerConfig& config) {
  check_inputs(params, grads);
  state.ensure_shape(grads, false);
  const auto bc = advance(state, config);
  const RateBounds bounds = adabound_bounds(config, state.t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& m = state.m[k];
    auto& v = state.v[k];
    for (std::size_t i = 0; i < params[k].size(); ++i) {
      update_moments(grads[k][i], m[i], v[i], config);
      const double m_hat = m[i] / bc.first;
      const double v_hat = v[i] / bc.second;
      const double rate =
          std::clamp(config.base_lr / denominator(v_hat, config), bounds.lower, bounds.upper);
      params[k][i] -= rate * m_hat;
    }
  }
}

double gradient_norm(const GradViews& grads, GradNormMode mode) {
  if (mode == GradNormMode::global_l2) {
    double sq = 0.0;
    for (const auto& g : grads) {
      const double n = l2_norm(g);
      sq += n * n;
    }
    return std::sqrt(sq);
  }
  if (grads.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : grads) total += l2_norm(g);
  return total / static_cast<double>(grads.size());
}

void DifficultyConfig::validate() const {
  if (!(ema_beta >= 0.0 && ema_beta < 1.0)) throw std::invalid_argument("ema_beta must lie in [0, 1)");
  if (!(alpha_mix >= 0.0 && alpha_mix <= 1.0)) throw std::invalid_argument("alpha_mix must lie in [0, 1]");
  if (!(clip_k > 0.0)) throw std::invalid_argument("clip_k must be > 0");
  if (!(d_min > 0.0 && d_min <= d_max)) throw std::invalid_argument("need 0 < d_min <= d_max");
  if (!(norm_epsilon > 0.0)) throw std::invalid_argument("norm_epsilon must be > 0");
}

DifficultyTracker::DifficultyTracker(DifficultyConfig config) : config_(config) {
  config_.validate();
}

double DifficultyTracker::neutral() const { return std::clamp(0.5, config_.d_min, config_.d_max); }

void DifficultyTracker::pin(double difficulty) {
  if (!(difficulty >= config_.d_min && difficulty <= config_.d_max)) {
    throw std::invalid_argument("pinned difficulty outside [d_min, d_max]");
  }
  pinned_ = difficulty;
}

double DifficultyTracker::observe_batch(double grad_norm, double batch_loss) {
  if (!(grad_norm >= 0.0) || !std::isfinite(grad_norm)) {
    throw std::invalid_argument("gradient norm must be finite and >= 0, got " +
                                std::to_string(grad_norm));
  }
  if (!std::isfinite(batch_loss)) throw NonFiniteError("batch loss is not finite");

  const double b = config_.ema_beta;
  if (batches_seen_ == 0) {
    mu_g_ = grad_norm;
    mu_l_ = batch_loss;
    sigma_g_ = 0.0;
    sigma_l_ = 0.0;
  } else {
    // mu <- b*mu + (1-b)*x, written so that x == mu leaves mu bit-identical.
    mu_g_ += (1.0 - b) * (grad_norm - mu_g_);
    sigma_g_ = b * sigma_g_ + (1.0 - b) * std::abs(grad_norm - mu_g_);
    mu_l_ += (1.0 - b) * (batch_loss - mu_l_);
    sigma_l_ = b * sigma_l_ + (1.0 - b) * std::abs(batch_loss - mu_l_);
  }
  ++batches_seen_;

  if (pinned_) return *pinned_;
  if (batches_seen_ <= config_.warmup_batches) return neutral();
  return score(grad_norm, batch_loss);
}

double DifficultyTracker::score(double grad_norm, double batch_loss) const {
  const double k = config_.clip_k;
  const double z_g = (grad_norm - mu_g_) / (sigma_g_ + config_.norm_epsilon);
  const double z_l = (batch_loss - mu_l_) / (sigma_l_ + config_.norm_epsilon);
  const double g_hat = (std::clamp(z_g, -k, k) + k) / (2.0 * k);
  const double l_hat = (std::clamp(z_l, -k, k) + k) / (2.0 * k);
  const double mixed = config_.alpha_mix * g_hat + (1.0 - config_.alpha_mix) * l_hat;
  return std::clamp(mixed, config_.d_min, config_.d_max);
}

double scaled_learning_rate(const DifficultyTracker& tracker, double base_lr, double difficulty) {
  const auto& c = tracker.config();
  if (!(difficulty >= c.d_min && difficulty <= c.d_max)) {
    throw std::invalid_argument("difficulty " + std::to_string(difficulty) +
                                " outside [d_min, d_max]");
  }
  return base_lr * difficulty;
}

double dbs_adam_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
                     const OptimizerConfig& config, DifficultyTracker& tracker,
                     double batch_loss) {
  check_inputs(params, grads);
  const double g_norm = gradient_norm(grads, tracker.config().grad_norm_mode);
  const double difficulty = tracker.observe_batch(g_norm, batch_loss);
  const double lr = scaled_learning_rate(tracker, config.base_lr, difficulty);
  adam_step(params, grads, state, config, lr);
  return lr;
}

Optimizer::Optimizer(OptimizerKind kind, OptimizerConfig config, DifficultyConfig difficulty)
    : kind_(kind), config_(config), tracker_(difficulty) {
  config_.validate();
}

double Optimizer::step(const ParamViews& params, const GradViews& grads, double batch_loss) {
  switch (kind_) {
    case OptimizerKind::adam:
      adam_step(params, grads, state_, config_);
      return config_.base_lr;
    case OptimizerKind::amsgrad:
      amsgrad_step(params, grads, state_, config_);
      return config_.base_lr;
    case OptimizerKind::adamw:
      adamw_step(params, grads, state_, config_);
      return config_.base_lr;
    case OptimizerKind::adabound:
      adabound_step(params, grads, state_, config_);
      return config_.base_lr;
    case OptimizerKind::dbs_adam:
      return dbs_adam_step(params, grads, state_, config_, tracker_, batch_loss);
  }
  return config_.base_lr;
}

}  // namespace dbsadam
