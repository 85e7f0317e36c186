#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dbsadam/losses.hpp"
#include "dbsadam/models.hpp"

namespace dbsadam::gradcheck {

struct GradCheckCase {
  NetworkShape shape;
  std::vector<Matrix> batch;
  std::vector<int> labels;
  LossConfig loss;
  std::uint64_t dropout_seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t parameters = 0;
};

// Relative error |a - b| / max(|a|, |b|, floor). The floor keeps coordinates whose
// true gradient is ~0 from dividing round-off by round-off.
inline constexpr double kRelativeErrorFloor = 1e-6;
inline constexpr double kKinkMargin = 1e-2;

inline GradCheckCase random_case(SeededRng& rng, LossKind loss_kind, std::size_t hidden1 = 3,
                                 std::size_t hidden2 = 2, std::size_t steps = 4,
                                 std::size_t batch = 2) {
  GradCheckCase c;
  c.shape.input_width = 2 + rng.below(3);
  c.shape.hidden1 = hidden1;
  c.shape.hidden2 = hidden2;
  c.shape.dense = 3;
  c.shape.classes = 3;
  c.shape.dropout_rate = rng.bernoulli(0.5) ? 0.3 : 0.0;
  c.shape.aggregation = rng.bernoulli(0.5) ? Aggregation::last : Aggregation::mean;
  for (std::size_t n = 0; n < batch; ++n) {
    Matrix seq(steps, c.shape.input_width);
    for (auto& v : seq.values()) v = rng.normal();
    c.batch.push_back(seq);
    c.labels.push_back(static_cast<int>(rng.below(c.shape.classes)));
  }
  c.loss.kind = loss_kind;
  c.loss.class_weights = {0.7, 1.9, 1.2};
  c.loss.gamma = 2.0;
  c.loss.alpha = 0.25;
  c.dropout_seed = rng.next_u64();
  return c;
}

// Analytic BPTT gradient against central differences of the same forward pass.
// Train mode with a re-seeded dropout stream, so every evaluation sees the same masks.
// One Richardson step, (4 D(h/2) - D(h)) / 3, removes the h^2 truncation term that
// otherwise dominates on coordinates with large third derivatives.
inline GradCheckResult check_network_gradient(const GradCheckCase& c, SeededRng& init_rng,
                                              double h = 2e-4) {
  SequenceNetwork net(c.shape, init_rng);
  const Mode mode = c.shape.dropout_rate > 0.0 ? Mode::train : Mode::eval;
  // Glorot init leaves biases at exactly 0, which can park a ReLU on its kink when
  // dropout zeroes the pooled vector. Jitter every parameter to a generic point, and
  // redraw while any dense pre-activation sits close enough to 0 for a finite
  // difference step to cross the kink.
  const Vector base = net.params().flatten();
  for (int attempt = 0; attempt < 100; ++attempt) {
    Vector theta = base;
    for (double& v : theta) v += 0.1 * init_rng.normal();
    net.params().assign(theta);
    ForwardCache probe_cache;
    SeededRng dropout(c.dropout_seed);
    network_forward(net, c.batch, mode, &dropout, &probe_cache);
    double margin = 1.0;
    for (const auto& s : probe_cache.samples) {
      for (double v : s.dense_pre) margin = std::min(margin, std::abs(v));
    }
    if (margin >= kKinkMargin) break;
  }

  auto loss_at = [&](const Vector& theta, ForwardCache* cache, Matrix* logits_out) {
    SequenceNetwork probe(c.shape, net.params());
    probe.params().assign(theta);
    SeededRng dropout(c.dropout_seed);
    const Matrix logits = network_forward(probe, c.batch, mode, &dropout, cache);
    if (logits_out) *logits_out = logits;
    return loss_value(c.loss, logits, c.labels);
  };

  const Vector theta = net.params().flatten();
  ForwardCache cache;
  Matrix logits;
  loss_at(theta, &cache, &logits);
  const GradientSet grads = network_backward(net, cache, loss_gradient(c.loss, logits, c.labels));
  const Vector analytic = grads.flatten();

  GradCheckResult r;
  r.parameters = theta.size();
  Vector probe = theta;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    auto central = [&](double step) {
      probe[k] = theta[k] + step;
      const double up = loss_at(probe, nullptr, nullptr);
      probe[k] = theta[k] - step;
      const double down = loss_at(probe, nullptr, nullptr);
      probe[k] = theta[k];
      return (up - down) / (2.0 * step);
    };
    const double numeric = (4.0 * central(h / 2.0) - central(h)) / 3.0;
    const double scale = std::max({std::abs(numeric), std::abs(analytic[k]), kRelativeErrorFloor});
    const double err = std::abs(numeric - analytic[k]) / scale;
    if (err > r.max_relative_error) {
      r.max_relative_error = err;
      r.worst_index = k;
      r.worst_analytic = analytic[k];
      r.worst_numeric = numeric;
    }
  }
  return r;
}

}  // namespace dbsadam::gradcheck
