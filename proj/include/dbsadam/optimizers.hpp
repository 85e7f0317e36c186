#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dbsadam/numerics.hpp"

namespace dbsadam {

/// Mutable views of every parameter tensor, in a fixed order.
using ParamViews = std::vector<std::span<double>>;
/// Read-only views of the matching gradient tensors.
using GradViews = std::vector<std::span<const double>>;

enum class OptimizerKind { adam, amsgrad, adamw, adabound, dbs_adam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

/// Where epsilon enters the Adam denominator.
enum class EpsilonPlacement {
  outside_sqrt,  ///< sqrt(v_hat) + eps
  inside_sqrt,   ///< sqrt(v_hat + eps)
};

struct OptimizerConfig {
  double base_lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double weight_decay = 0.01;  // AdamW only
  double adabound_final_lr = 0.1;
  double adabound_gamma = 1e-3;
  EpsilonPlacement epsilon_placement = EpsilonPlacement::outside_sqrt;

  void validate() const;
};

/// Moment buffers shaped like the parameter set, plus the step counter.
struct OptimizerState {
  std::vector<Vector> m;
  std::vector<Vector> v;
  std::vector<Vector> v_max;  // AMSGrad only
  std::uint64_t t = 0;

  /// Allocate zeroed buffers matching `params` if not yet allocated; otherwise
  /// verify shapes.
  void ensure_shape(const GradViews& grads, bool with_v_max);
};

void adam_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
               const OptimizerConfig& config, std::optional<double> lr_override = std::nullopt);
void amsgrad_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
                  const OptimizerConfig& config);
void adamw_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
                const OptimizerConfig& config);
void adabound_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
                   const OptimizerConfig& config);

/// Lower and upper AdaBound step-size bounds at step t >= 1.
struct RateBounds {
  double lower;
  double upper;
};
RateBounds adabound_bounds(const OptimizerConfig& config, std::uint64_t t);

// Single-tensor conveniences used by tests and small problems.
void adam_step(Vector& params, const Vector& grads, OptimizerState& state,
               const OptimizerConfig& config, std::optional<double> lr_override = std::nullopt);

enum class GradNormMode { global_l2, mean_per_tensor };

std::string to_string(GradNormMode mode);
GradNormMode parse_grad_norm_mode(const std::string& name);

/// Batch gradient norm G_t.
double gradient_norm(const GradViews& grads, GradNormMode mode);

struct DifficultyConfig {
  double ema_beta = 0.95;
  double alpha_mix = 0.5;
  double clip_k = 5.0;
  double d_min = 0.1;
  double d_max = 1.0;
  double norm_epsilon = 1e-8;
  std::uint64_t warmup_batches = 10;
  GradNormMode grad_norm_mode = GradNormMode::global_l2;

  void validate() const;
};

/// Running EMA statistics of gradient norm and batch loss, and the mapping from
/// a (G_t, L_t) pair to a clipped difficulty in [d_min, d_max].
class DifficultyTracker {
 public:
  explicit DifficultyTracker(DifficultyConfig config = {});

  /// Update the statistics with one batch and return its clipped difficulty.
  /// Returns the neutral clip(0.5) while fewer than warmup_batches have been seen,
  /// and the pinned value whenever one is set.
  double observe_batch(double grad_norm, double batch_loss);

  /// Difficulty of (G, L) against the current statistics, without updating them.
  double score(double grad_norm, double batch_loss) const;

  /// Force every subsequent observe_batch to return `difficulty` (statistics still
  /// update). Must lie in [d_min, d_max].
  void pin(double difficulty);
  void unpin() { pinned_.reset(); }

  const DifficultyConfig& config() const { return config_; }
  double mu_g() const { return mu_g_; }
  double sigma_g() const { return sigma_g_; }
  double mu_l() const { return mu_l_; }
  double sigma_l() const { return sigma_l_; }
  std::uint64_t batches_seen() const { return batches_seen_; }
  double neutral() const;

 private:
  DifficultyConfig config_;
  double mu_g_ = 0.0;
  double sigma_g_ = 0.0;
  double mu_l_ = 0.0;
  double sigma_l_ = 0.0;
  std::uint64_t batches_seen_ = 0;
  std::optional<double> pinned_;
};

/// eta_t = eta_0 * D_t.
double scaled_learning_rate(const DifficultyTracker& tracker, double base_lr, double difficulty);

/// One DBS-Adam update: G_t from `grads`, difficulty from the tracker, then Adam
/// at eta_t. Returns eta_t.
double dbs_adam_step(const ParamViews& params, const GradViews& grads, OptimizerState& state,
                     const OptimizerConfig& config, DifficultyTracker& tracker,
                     double batch_loss);

/// Runtime-selected optimizer owning its state (and tracker for DBS-Adam).
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, OptimizerConfig config, DifficultyConfig difficulty = {});

  /// Apply one update. `batch_loss` is only consulted by DBS-Adam. Returns the
  /// learning rate used for this step.
  double step(const ParamViews& params, const GradViews& grads, double batch_loss);

  OptimizerKind kind() const { return kind_; }
  const OptimizerConfig& config() const { return config_; }
  const OptimizerState& state() const { return state_; }
  DifficultyTracker& tracker() { return tracker_; }
  const DifficultyTracker& tracker() const { return tracker_; }

 private:
  OptimizerKind kind_;
  OptimizerConfig config_;
  OptimizerState state_;
  DifficultyTracker tracker_;
};

}  // namespace dbsadam
