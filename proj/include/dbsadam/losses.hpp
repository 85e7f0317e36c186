#pragma once

#include <span>
#include <string>

#include "dbsadam/numerics.hpp"

namespace dbsadam {

/// Floor applied to every probability before taking its log.
inline constexpr double kProbabilityFloor = 1e-12;

enum class LossKind { cross_entropy, weighted_cross_entropy, focal };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::focal;
  /// w_c for weighted cross-entropy; must be strictly positive, one per class.
  Vector class_weights;
  double gamma = 2.0;
  /// Uniform focal alpha, used when alpha_per_class is empty.
  double alpha = 0.25;
  Vector alpha_per_class;

  void validate(std::size_t num_classes) const;
};

/// Numerically stable softmax (max-subtracted).
Vector softmax(std::span<const double> logits);
/// Row-wise softmax of an N x C logit matrix.
Matrix softmax_rows(const Matrix& logits);

Matrix one_hot(std::span<const int> labels, std::size_t num_classes);

/// Per-sample loss terms; labels are class indices (the one-hot position).
Vector per_sample_losses(const LossConfig& config, const Matrix& probs,
                         std::span<const int> labels);

/// L = (1/M) * sum of per-sample losses. Throws on an empty batch.
double batch_mean_loss(std::span<const double> per_sample);

double cross_entropy(const Matrix& probs, std::span<const int> labels);
double weighted_cross_entropy(const Matrix& probs, std::span<const int> labels,
                              std::span<const double> weights);
double focal_loss(const Matrix& probs, std::span<const int> labels, double gamma,
                  double alpha = 0.25);
double focal_loss(const Matrix& probs, std::span<const int> labels, double gamma,
                  std::span<const double> alpha_per_class);

/// Mean loss of a logit batch under `config`.
double loss_value(const LossConfig& config, const Matrix& logits, std::span<const int> labels);

/// d(mean loss)/d(logits), N x C. Includes the 1/N of the batch mean.
Matrix loss_gradient(const LossConfig& config, const Matrix& logits,
                     std::span<const int> labels);

/// w_c = N / (N_c * C). Throws if any count is zero.
Vector default_class_weights(std::span<const std::size_t> class_counts);

}  // namespace dbsadam
