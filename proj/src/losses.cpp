#include "dbsadam/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dbsadam {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::cross_entropy: return "cross_entropy";
    case LossKind::weighted_cross_entropy: return "weighted_cross_entropy";
    case LossKind::focal: return "focal";
  }
  return "unknown";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "cross_entropy") return LossKind::cross_entropy;
  if (name == "weighted_cross_entropy") return LossKind::weighted_cross_entropy;
  if (name == "focal") return LossKind::focal;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

void LossConfig::validate(std::size_t num_classes) const {
  if (kind == LossKind::weighted_cross_entropy) {
    if (class_weights.size() != num_classes) {
      throw DimensionError("class weight vector has " + std::to_string(class_weights.size()) +
                           " entries for " + std::to_string(num_classes) + " classes");
    }
    for (double w : class_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument("class weights must be strictly positive");
      }
    }
  }
  if (kind == LossKind::focal) {
    if (!(gamma >= 0.0)) throw std::invalid_argument("focal gamma must be >= 0");
    if (!alpha_per_class.empty() && alpha_per_class.size() != num_classes) {
      throw DimensionError("focal alpha vector has " + std::to_string(alpha_per_class.size()) +
                           " entries for " + std::to_string(num_classes) + " classes");
    }
  }
}

Vector softmax(std::span<const double> logits) {
  Vector out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& x : out) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : out) x /= sum;
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const Vector p = softmax(logits.row(i));
    std::copy(p.begin(), p.end(), out.row(i).begin());
  }
  return out;
}

Matrix one_hot(std::span<const int> labels, std::size_t num_classes) {
  Matrix out(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw std::out_of_range("label " + std::to_string(labels[i]) + " outside [0, " +
                              std::to_string(num_classes) + ")");
    }
    out(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

namespace {

void check_batch(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size()) {
    throw DimensionError("batch of " + std::to_string(probs.rows()) + " predictions with " +
                         std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(probs.cols()) + ")");
    }
  }
}

double alpha_for(const LossConfig& config, std::size_t cls) {
  return config.alpha_per_class.empty() ? config.alpha : config.alpha_per_class[cls];
}

double floored_log(double p) { return std::log(std::max(p, kProbabilityFloor)); }

}  // namespace

Vector per_sample_losses(const LossConfig& config, const Matrix& probs,
                         std::span<const int> labels) {
  check_batch(probs, labels);
  config.validate(probs.cols());
  Vector out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const double p = probs(i, y);
    switch (config.kind) {
      case LossKind::cross_entropy:
        out[i] = -floored_log(p);
        break;
      case LossKind::weighted_cross_entropy:
        out[i] = -config.class_weights[y] * floored_log(p);
        break;
      case LossKind::focal: {
        const double modulator = config.gamma == 0.0 ? 1.0 : std::pow(1.0 - p, config.gamma);
        out[i] = -alpha_for(config, y) * modulator * floored_log(p);
        break;
      }
    }
  }
  return out;
}

double batch_mean_loss(std::span<const double> per_sample) {
  if (per_sample.empty()) throw std::invalid_argument("batch_mean_loss: empty batch");
  double s = 0.0;
  for (double x : per_sample) s += x;
  return s / static_cast<double>(per_sample.size());
}

double cross_entropy(const Matrix& probs, std::span<const int> labels) {
  LossConfig c;
  c.kind = LossKind::cross_entropy;
  return batch_mean_loss(per_sample_losses(c, probs, labels));
}

double weighted_cross_entropy(const Matrix& probs, std::span<const int> labels,
                              std::span<const double> weights) {
  LossConfig c;
  c.kind = LossKind::weighted_cross_entropy;
  c.class_weights.assign(weights.begin(), weights.end());
  return batch_mean_loss(per_sample_losses(c, probs, labels));
}

double focal_loss(const Matrix& probs, std::span<const int> labels, double gamma,
                  double alpha) {
  LossConfig c;
  c.kind = LossKind::focal;
  c.gamma = gamma;
  c.alpha = alpha;
  return batch_mean_loss(per_sample_losses(c, probs, labels));
}

double focal_loss(const Matrix& probs, std::span<const int> labels, double gamma,
                  std::span<const double> alpha_per_class) {
  LossConfig c;
  c.kind = LossKind::focal;
  c.gamma = gamma;
  c.alpha_per_class.assign(alpha_per_class.begin(), alpha_per_class.end());
  return batch_mean_loss(per_sample_losses(c, probs, labels));
}

double loss_value(const LossConfig& config, const Matrix& logits, std::span<const int> labels) {
  return batch_mean_loss(per_sample_losses(config, softmax_rows(logits), labels));
}

Matrix loss_gradient(const LossConfig& config, const Matrix& logits,
                     std::span<const int> labels) {
  const Matrix probs = softmax_rows(logits);
  check_batch(probs, labels);
  config.validate(probs.cols());
  const double inv_n = 1.0 / static_cast<double>(labels.size());
  Matrix grad(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const double p = probs(i, y);
    // Every loss here depends on the logits only through p = softmax_y, so
    // dL/dz_j = dL/dp * p * (delta_jy - p_j). Below the log floor, d log/dp = 0.
    const bool floored = p < kProbabilityFloor;
    double coeff = 0.0;  // dL/dp * p
    switch (config.kind) {
      case LossKind::cross_entropy:
        coeff = floored ? 0.0 : -1.0;
        break;
      case LossKind::weighted_cross_entropy:
        coeff = floored ? 0.0 : -config.class_weights[y];
        break;
      case LossKind::focal: {
        const double a = alpha_for(config, y);
        const double g = config.gamma;
        const double log_p = floored_log(p);
        const double one_minus = 1.0 - p;
        // d/dp [ -a (1-p)^g log p ] * p
        double term_mod = 0.0;
        if (g != 0.0 && log_p != 0.0) term_mod = a * g * std::pow(one_minus, g - 1.0) * log_p * p;
        const double term_log =
            floored ? 0.0 : -a * (g == 0.0 ? 1.0 : std::pow(one_minus, g));
        coeff = term_mod + term_log;
        break;
      }
    }
    for (std::size_t j = 0; j < probs.cols(); ++j) {
      const double delta = (j == y) ? 1.0 : 0.0;
      grad(i, j) = coeff * (delta - probs(i, j)) * inv_n;
    }
  }
  return grad;
}

Vector default_class_weights(std::span<const std::size_t> class_counts) {
  const std::size_t classes = class_counts.size();
  const std::size_t total = std::accumulate(class_counts.begin(), class_counts.end(),
                                            std::size_t{0});
  Vector w(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    if (class_counts[c] == 0) {
      throw std::invalid_argument("class " + std::to_string(c) +
                                  " has no samples; its weight is undefined");
    }
    w[c] = static_cast<double>(total) /
           (static_cast<double>(class_counts[c]) * static_cast<double>(classes));
  }
  return w;
}

}  // namespace dbsadam
