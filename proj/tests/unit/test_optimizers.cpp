#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dbsadam/optimizers.hpp"

using namespace dbsadam;

namespace {

// Gradient of f(x) = 0.5 * sum a_i (x_i - c_i)^2.
struct Quadratic {
  Vector a, c;
  Vector grad(const Vector& x) const {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = a[i] * (x[i] - c[i]);
    return g;
  }
};

Quadratic random_quadratic(SeededRng& rng, std::size_t n) {
  Quadratic q;
  for (std::size_t i = 0; i < n; ++i) {
    q.a.push_back(rng.uniform(0.1, 10.0));
    q.c.push_back(rng.uniform(-2.0, 2.0));
  }
  return q;
}

ParamViews views(Vector& v) { return {std::span<double>(v)}; }
GradViews gviews(const Vector& g) { return {std::span<const double>(g)}; }

}  // namespace

TEST(Adam, FirstStepHandDerived) {
  // m1 = 0.01, v1 = 1e-5, m_hat = 0.1, v_hat = 0.01, step = 0.001 * 0.1 / (0.1 + 1e-7).
  Vector theta{1.0};
  OptimizerState state;
  adam_step(theta, Vector{0.1}, state, OptimizerConfig{});
  EXPECT_NEAR(theta[0], 1.0 - 0.001 * 0.1 / (0.1 + 1e-7), 1e-15);
  EXPECT_NEAR(theta[0], 0.999, 1e-9);
  EXPECT_EQ(state.t, 1u);
}

TEST(Adam, FirstStepMagnitudeAcrossGradientScales) {
  const OptimizerConfig cfg;
  for (double g = 1e-6; g <= 1e6 * 1.0001; g *= 10.0) {
    for (double sign : {1.0, -1.0}) {
      Vector theta{0.0};
      OptimizerState state;
      adam_step(theta, Vector{sign * g}, state, cfg);
      // Bias correction cancels at t = 1, leaving eta * |g| / (|g| + eps).
      const double step = std::abs(theta[0]);
      EXPECT_NEAR(step, cfg.base_lr * g / (g + cfg.epsilon), 1e-18) << g;
      EXPECT_LE(step, cfg.base_lr) << g;
      if (g >= 1e-4) EXPECT_GE(step, 0.999 * cfg.base_lr) << g;
      EXPECT_EQ(theta[0] < 0.0, sign > 0.0);
    }
  }
}

TEST(Adam, EpsilonInsideSqrtChangesDenominator) {
  OptimizerConfig cfg;
  cfg.epsilon_placement = EpsilonPlacement::inside_sqrt;
  cfg.epsilon = 1e-4;
  Vector theta{0.0};
  OptimizerState state;
  adam_step(theta, Vector{0.01}, state, cfg);
  EXPECT_NEAR(theta[0], -0.001 * 0.01 / std::sqrt(1e-4 + 1e-4), 1e-15);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Vector theta{1.0, -2.0};
  OptimizerState state;
  adam_step(theta, Vector{0.0, 0.0}, state, OptimizerConfig{});
  EXPECT_EQ(theta, (Vector{1.0, -2.0}));
}

TEST(Adam, RejectsNonFiniteAndMismatchedGradients) {
  Vector theta{1.0, 2.0};
  OptimizerState state;
  try {
    adam_step(theta, Vector{0.0, std::nan("")}, state, OptimizerConfig{});
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos) << e.what();
  }
  EXPECT_THROW(adam_step(theta, Vector{0.0}, state, OptimizerConfig{}), DimensionError);
}

TEST(Adam, ConvergesOnQuadratic) {
  SeededRng rng(1);
  const Quadratic q = random_quadratic(rng, 5);
  Vector x(5, 0.0);
  OptimizerState state;
  OptimizerConfig cfg;
  cfg.base_lr = 0.01;
  for (int i = 0; i < 5000; ++i) adam_step(x, q.grad(x), state, cfg);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(x[i], q.c[i], 2 * cfg.base_lr);
}

TEST(AmsGrad, EqualsAdamWhileSecondMomentIsNondecreasing) {
  // Growing gradients keep v_hat monotone, so the max never binds.
  OptimizerConfig cfg;
  Vector a{0.5, -0.3}, b = a;
  OptimizerState sa, sb;
  for (int t = 1; t <= 30; ++t) {
    const Vector g{0.1 * t, -0.2 * t};
    adam_step(views(a), gviews(g), sa, cfg);
    amsgrad_step(views(b), gviews(g), sb, cfg);
  }
  EXPECT_NEAR(a[0], b[0], 1e-15);
  EXPECT_NEAR(a[1], b[1], 1e-15);
}

TEST(AmsGrad, VMaxNeverDecreases) {
  SeededRng rng(2);
  Vector x{1.0, 1.0, 1.0};
  OptimizerState s;
  Vector prev(3, 0.0);
  for (int t = 0; t < 200; ++t) {
    const Vector g{rng.normal() * 10.0 / (t + 1), rng.normal(), rng.normal() * t};
    amsgrad_step(views(x), gviews(g), s, OptimizerConfig{});
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_GE(s.v_max[0][i], prev[i]);
      prev[i] = s.v_max[0][i];
    }
  }
}

TEST(AdamW, ZeroDecayEqualsAdam) {
  OptimizerConfig cfg;
  cfg.weight_decay = 0.0;
  SeededRng rng(3);
  Vector a{0.3, -0.7, 1.1}, b = a;
  OptimizerState sa, sb;
  for (int t = 0; t < 40; ++t) {
    const Vector g{rng.normal(), rng.normal(), rng.normal()};
    adam_step(views(a), gviews(g), sa, cfg);
    adamw_step(views(b), gviews(g), sb, cfg);
  }
  EXPECT_EQ(a, b);
}

TEST(AdamW, DecayIsDecoupledFromGradient) {
  OptimizerConfig cfg;
  cfg.weight_decay = 0.1;
  Vector x{2.0};
  OptimizerState s;
  adamw_step(views(x), gviews(Vector{0.0}), s, cfg);
  EXPECT_NEAR(x[0], 2.0 - 0.001 * 0.1 * 2.0, 1e-15);
}

TEST(AdaBound, BoundsApproachFinalRate) {
  const OptimizerConfig cfg;
  const RateBounds b = adabound_bounds(cfg, 1000000);
  EXPECT_NEAR(b.lower / cfg.adabound_final_lr, 1.0, 0.002);
  EXPECT_NEAR(b.upper / cfg.adabound_final_lr, 1.0, 0.002);
  EXPECT_NEAR(b.lower, 0.1 * (1.0 - 1.0 / 1001.0), 1e-15);
  EXPECT_NEAR(b.upper, 0.1 * (1.0 + 1.0 / 1000.0), 1e-15);
  EXPECT_THROW(adabound_bounds(cfg, 0), std::invalid_argument);
}

TEST(AdaBound, EffectiveRateStaysInsideBounds) {
  SeededRng rng(4);
  OptimizerConfig cfg;
  cfg.adabound_gamma = 0.05;
  Vector x(6);
  for (auto& v : x) v = rng.normal();
  OptimizerState s;
  for (int t = 1; t <= 300; ++t) {
    Vector g(6);
    for (std::size_t i = 0; i < 6; ++i) g[i] = rng.normal() * std::pow(10.0, static_cast<double>(i) - 3.0);
    const Vector before = x;
    adabound_step(views(x), gviews(g), s, cfg);
    const RateBounds b = adabound_bounds(cfg, s.t);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.t));
    for (std::size_t i = 0; i < 6; ++i) {
      const double m_hat = s.m[0][i] / bc1;
      if (std::abs(m_hat) < 1e-12) continue;
      const double rate = (before[i] - x[i]) / m_hat;
      // Rounding of theta limits how exactly the rate can be recovered.
      const double slack = 4.0 * std::numeric_limits<double>::epsilon() *
                           std::max(std::abs(before[i]), std::abs(x[i])) / std::abs(m_hat);
      EXPECT_GE(rate, b.lower - slack) << "t=" << t << " i=" << i;
      EXPECT_LE(rate, b.upper + slack) << "t=" << t << " i=" << i;
    }
  }
}

TEST(GradientNorm, Modes) {
  const Vector a{3.0, 4.0}, b{0.0, 0.0, 12.0};
  const GradViews g{a, b};
  EXPECT_DOUBLE_EQ(gradient_norm(g, GradNormMode::global_l2), 13.0);
  EXPECT_DOUBLE_EQ(gradient_norm(g, GradNormMode::mean_per_tensor), 8.5);
}

TEST(Difficulty, WarmupReturnsNeutral) {
  DifficultyConfig cfg;
  DifficultyTracker tr(cfg);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(tr.observe_batch(1.0 + i, 5.0 * i), 0.5);
  EXPECT_EQ(tr.batches_seen(), 10u);
  cfg.d_min = 0.6;
  DifficultyTracker high(cfg);
  EXPECT_EQ(high.observe_batch(1.0, 1.0), 0.6);
  EXPECT_EQ(scaled_learning_rate(tr, 0.001, tr.neutral()), 0.001 * 0.5);
}

TEST(Difficulty, FirstObservationSeedsMean) {
  DifficultyTracker tr;
  tr.observe_batch(2.0, 3.0);
  EXPECT_EQ(tr.mu_g(), 2.0);
  EXPECT_EQ(tr.mu_l(), 3.0);
  EXPECT_EQ(tr.sigma_g(), 0.0);
  tr.observe_batch(4.0, 3.0);
  EXPECT_NEAR(tr.mu_g(), 2.0 + 0.05 * 2.0, 1e-15);
  EXPECT_NEAR(tr.sigma_g(), 0.05 * std::abs(4.0 - 2.1), 1e-15);
}

TEST(Difficulty, AtTheMeanIsExactlyHalf) {
  DifficultyTracker tr;
  SeededRng rng(5);
  for (int i = 0; i < 30; ++i) tr.observe_batch(rng.uniform(0.5, 2.0), rng.uniform(0.1, 1.0));
  EXPECT_EQ(tr.score(tr.mu_g(), tr.mu_l()), 0.5);
  EXPECT_EQ(tr.observe_batch(tr.mu_g(), tr.mu_l()), 0.5);
}

TEST(Difficulty, SaturationAndLowerClip) {
  DifficultyConfig cfg;
  cfg.warmup_batches = 0;
  DifficultyTracker tr(cfg);
  for (int i = 0; i < 20; ++i) tr.observe_batch(1.0 + 0.01 * (i % 2), 1.0 + 0.01 * (i % 3));
  EXPECT_EQ(tr.score(1e6, 1e6), 1.0);
  cfg.alpha_mix = 1.0;
  DifficultyTracker only_g(cfg);
  for (int i = 0; i < 20; ++i) only_g.observe_batch(1.0 + 0.01 * (i % 2), 1.0);
  EXPECT_EQ(only_g.score(0.0, 1.0), cfg.d_min);
}

TEST(Difficulty, StaysInBoundsOnRandomStreams) {
  SeededRng rng(6);
  for (int s = 0; s < 200; ++s) {
    DifficultyConfig cfg;
    cfg.ema_beta = rng.uniform(0.0, 0.999);
    cfg.alpha_mix = rng.uniform();
    cfg.d_min = rng.uniform(0.01, 0.5);
    cfg.d_max = rng.uniform(cfg.d_min, 2.0);
    cfg.warmup_batches = rng.below(5);
    DifficultyTracker tr(cfg);
    for (int i = 0; i < 50; ++i) {
      const double g = std::exp(rng.uniform(-20.0, 20.0));
      const double l = rng.uniform(-5.0, 5.0) * std::exp(rng.uniform(-5.0, 5.0));
      const double d = tr.observe_batch(g, l);
      ASSERT_GE(d, cfg.d_min);
      ASSERT_LE(d, cfg.d_max);
    }
  }
}

TEST(Difficulty, MonotoneInBothSignals) {
  DifficultyTracker tr;
  SeededRng rng(7);
  for (int i = 0; i < 40; ++i) tr.observe_batch(rng.uniform(0.5, 1.5), rng.uniform(0.2, 0.8));
  for (int i = 0; i < 500; ++i) {
    const double g = rng.uniform(0.0, 3.0), l = rng.uniform(0.0, 2.0);
    const double dg = rng.uniform(0.0, 1.0), dl = rng.uniform(0.0, 1.0);
    EXPECT_GE(tr.score(g + dg, l), tr.score(g, l));
    EXPECT_GE(tr.score(g, l + dl), tr.score(g, l));
  }
}

TEST(Difficulty, RejectsBadInputs) {
  DifficultyTracker tr;
  EXPECT_THROW(tr.observe_batch(-1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(tr.observe_batch(std::nan(""), 1.0), std::invalid_argument);
  EXPECT_THROW(tr.observe_batch(1.0, INFINITY), NonFiniteError);
  EXPECT_THROW(tr.pin(1.5), std::invalid_argument);
  EXPECT_THROW(scaled_learning_rate(tr, 0.001, 0.05), std::invalid_argument);
  DifficultyConfig bad;
  bad.d_min = 0.0;
  EXPECT_THROW(DifficultyTracker{bad}, std::invalid_argument);
}

TEST(DbsAdam, PinnedEqualsAdamAtScaledRate) {
  SeededRng rng(8);
  for (double c : {0.1, 0.5, 1.0}) {
    const Quadratic q = random_quadratic(rng, 8);
    Vector a(8), b(8);
    for (std::size_t i = 0; i < 8; ++i) a[i] = b[i] = rng.normal();
    OptimizerConfig cfg;
    OptimizerConfig scaled = cfg;
    scaled.base_lr = cfg.base_lr * c;
    OptimizerState sa, sb;
    DifficultyTracker tr;
    tr.pin(c);
    for (int t = 0; t < 50; ++t) {
      const Vector ga = q.grad(a), gb = q.grad(b);
      const double lr = dbs_adam_step(views(a), gviews(ga), sa, cfg, tr, 0.5 * dot(ga, ga));
      EXPECT_EQ(lr, cfg.base_lr * c);
      adam_step(views(b), gviews(gb), sb, scaled);
    }
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
}

TEST(DbsAdam, LearningRateWithinScaledBounds) {
  SeededRng rng(9);
  Optimizer opt(OptimizerKind::dbs_adam, OptimizerConfig{});
  Vector x{1.0, -1.0};
  for (int t = 0; t < 200; ++t) {
    const Vector g{rng.normal() * (1 + t % 7), rng.normal()};
    const double lr = opt.step(views(x), gviews(g), rng.uniform(0.0, 3.0));
    EXPECT_GE(lr, 0.001 * 0.1 - 1e-18);
    EXPECT_LE(lr, 0.001 * 1.0 + 1e-18);
  }
  EXPECT_EQ(opt.tracker().batches_seen(), 200u);
}

TEST(Optimizer, DispatchMatchesFreeFunctions) {
  for (auto kind : {OptimizerKind::adam, OptimizerKind::amsgrad, OptimizerKind::adamw,
                    OptimizerKind::adabound}) {
    Optimizer opt(kind, OptimizerConfig{});
    Vector a{0.4, 0.2}, b = a;
    OptimizerState s;
    for (int t = 0; t < 5; ++t) {
      const Vector g{0.3 - 0.1 * t, 0.05 * t};
      EXPECT_EQ(opt.step(views(a), gviews(g), 1.0), 0.001);
      switch (kind) {
        case OptimizerKind::adam: adam_step(views(b), gviews(g), s, OptimizerConfig{}); break;
        case OptimizerKind::amsgrad: amsgrad_step(views(b), gviews(g), s, OptimizerConfig{}); break;
        case OptimizerKind::adamw: adamw_step(views(b), gviews(g), s, OptimizerConfig{}); break;
        default: adabound_step(views(b), gviews(g), s, OptimizerConfig{}); break;
      }
    }
    EXPECT_EQ(a, b) << to_string(kind);
  }
}

TEST(OptimizerConfig, ValidatesRanges) {
  OptimizerConfig c;
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.base_lr = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_THROW(parse_optimizer_kind("sgd"), std::invalid_argument);
  EXPECT_EQ(parse_optimizer_kind("dbs_adam"), OptimizerKind::dbs_adam);
}
