// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "test_util.hpp"
#include "ttr/error.hpp"
#include "ttr/gradcheck.hpp"
#include "ttr/memo.hpp"
#include "ttr/objectives.hpp"
#include "ttr/ops.hpp"
#include "ttr/train.hpp"

namespace ttr {
namespace {

using testing::random_image;
using testing::random_tensor;
using D = Tensor<double>;

D probs(std::size_t b, std::size_t c, std::vector<double> v) { return D({b, c}, std::move(v)); }

D random_probs(std::size_t b, std::size_t c, std::uint64_t seed, double scale = 3.0) {
  return softmax(random_tensor({b, c}, seed, scale, false));
}

// Plain-loop oracles in double precision.
double h_ref(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p) {
    if (v > kProbEpsilon) h -= v * std::log(v);
  }
  return h;
}

std::vector<double> row(const D& p, std::size_t i) {
  const std::size_t c = p.dim(1);
  return {p.values().begin() + static_cast<std::ptrdiff_t>(i * c),
          p.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * c)};
}

double cross_ref(const std::vector<double>& p, const std::vector<double>& q) {
  double h = 0.0;
  for (std::size_t y = 0; y < p.size(); ++y) h -= p[y] * std::log(std::max(q[y], kProbEpsilon));
  return h;
}

TEST(MarginalDistribution, AveragesRows) {
  const auto bar = marginal_distribution(probs(3, 2, {0.7, 0.3, 0.5, 0.5, 0.6, 0.4}));
  EXPECT_NEAR(bar.values()[0], 0.6, 1e-15);
  EXPECT_NEAR(bar.values()[1], 0.4, 1e-15);
  const auto half = marginal_distribution(probs(2, 2, {1, 0, 0, 1}));
  EXPECT_EQ(half.values()[0], 0.5);
  const auto single = random_probs(1, 5, 3);
  const auto same = marginal_distribution(single);
  for (std::size_t y = 0; y < 5; ++y) EXPECT_EQ(same.values()[y], single.values()[y]);
}

TEST(MarginalEntropy, KnownValues) {
  EXPECT_NEAR(marginal_entropy(probs(1, 10, std::vector<double>(10, 0.1))).item(), std::log(10.0), 1e-12);
  EXPECT_EQ(marginal_entropy(probs(2, 3, {0, 1, 0, 0, 1, 0})).item(), 0.0);
  const auto disagree = probs(2, 2, {1, 0, 0, 1});
  EXPECT_NEAR(marginal_entropy(disagree).item(), 0.693147, 1e-6);
  EXPECT_EQ(conditional_entropy(disagree).item(), 0.0);
}

TEST(ConditionalEntropy, KnownValues) {
  EXPECT_NEAR(conditional_entropy(probs(3, 4, std::vector<double>(12, 0.25))).item(), std::log(4.0), 1e-12);
  EXPECT_EQ(conditional_entropy(probs(2, 3, {0, 0, 1, 1, 0, 0})).item(), 0.0);
  const auto p = probs(2, 2, {0.9, 0.1, 0.5, 0.5});
  const double oracle = (h_ref({0.9, 0.1}) + h_ref({0.5, 0.5})) / 2.0;
  EXPECT_NEAR(oracle, 0.509115, 1e-6);
  EXPECT_NEAR(conditional_entropy(p).item(), oracle, 1e-12);
}

TEST(PairwiseCrossEntropy, KnownValues) {
  const auto p = probs(2, 2, {0.9, 0.1, 0.1, 0.9});
  const double oracle = (cross_ref({0.9, 0.1}, {0.1, 0.9}) + cross_ref({0.1, 0.9}, {0.9, 0.1})) / 2.0;
  EXPECT_NEAR(oracle, 2.082863, 1e-6);
  EXPECT_NEAR(pairwise_cross_entropy(p).item(), oracle, 1e-12);
  EXPECT_NEAR(pairwise_cross_entropy(probs(2, 10, std::vector<double>(20, 0.1))).item(), std::log(10.0), 1e-12);
  const auto same = probs(3, 3, {0.2, 0.3, 0.5, 0.2, 0.3, 0.5, 0.2, 0.3, 0.5});
  EXPECT_NEAR(pairwise_cross_entropy(same).item(), h_ref({0.2, 0.3, 0.5}), 1e-12);
  EXPECT_THROW(pairwise_cross_entropy(probs(1, 2, {0.5, 0.5})), Error);
}

TEST(Objectives, MatchLoopOraclesOnRandomDistributions) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const std::size_t b = 2 + seed % 5, c = 2 + seed % 7;
    const auto p = random_probs(b, c, seed, 1.0 + static_cast<double>(seed % 4) * 3.0);
    std::vector<double> bar(c, 0.0);
    double ce = 0.0, pce = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const auto pi = row(p, i);
      ce += h_ref(pi) / static_cast<double>(b);
      for (std::size_t y = 0; y < c; ++y) bar[y] += pi[y] / static_cast<double>(b);
      for (std::size_t j = 0; j < b; ++j) {
        if (j != i) pce += cross_ref(pi, row(p, j)) / static_cast<double>(b * (b - 1));
      }
    }
    EXPECT_NEAR(marginal_entropy(p).item(), h_ref(bar), 1e-12);
    EXPECT_NEAR(conditional_entropy(p).item(), ce, 1e-12);
    EXPECT_NEAR(pairwise_cross_entropy(p).item(), pce, 1e-10);
  }
}

TEST(Objectives, JensenAndGibbsOrderingWithBounds) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const std::size_t b = 2 + seed % 6, c = 2 + seed % 9;
    const auto p = random_probs(b, c, seed, 0.5 + static_cast<double>(seed % 5) * 2.0);
    const double h = marginal_entropy(p).item();
    const double ce = conditional_entropy(p).item();
    const double pce = pairwise_cross_entropy(p).item();
    const double log_c = std::log(static_cast<double>(c));
    EXPECT_GE(h + 1e-6, ce);
    EXPECT_GE(pce + 1e-6, ce);
    EXPECT_GE(h, 0.0);
    EXPECT_GE(ce, 0.0);
    EXPECT_LE(h, log_c + 1e-12);
    EXPECT_LE(ce, log_c + 1e-12);
    EXPECT_GE(pce, 0.0);
    // Distinct rows give a strict gap.
    EXPECT_GT(h - ce, 1e-9);
    EXPECT_GT(pce - ce, 1e-9);
  }
}

TEST(Objectives, EqualRowsCloseTheGaps) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto one = random_probs(1, 6, seed);
    std::vector<double> rep;
    for (int i = 0; i < 4; ++i) rep.insert(rep.end(), one.values().begin(), one.values().end());
    const auto p = probs(4, 6, rep);
    const double h = marginal_entropy(p).item();
    EXPECT_NEAR(h, conditional_entropy(p).item(), 1e-6);
    EXPECT_NEAR(h, pairwise_cross_entropy(p).item(), 1e-6);
  }
}

TEST(Objectives, GradientsMatchFiniteDifferences) {
  for (auto obj : {Objective::marginal_entropy, Objective::conditional_entropy,
                   Objective::pairwise_cross_entropy}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto z = random_tensor({4, 5}, seed, 2.0);
      EXPECT_LE(grad_check([&](const D& x) { return objective_value(obj, softmax(x)); }, z, 1e-5), 1e-5)
          << to_string(obj);
    }
  }
}

TEST(Objectives, NonFiniteLossDumpsMarginal) {
  const auto p = probs(2, 2, {std::nan(""), 0.5, 0.5, 0.5});
  try {
    require_finite_loss(marginal_entropy(p), p, Objective::marginal_entropy);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("marginal"), std::string::npos) << e.what();
  }
}

TEST(Objectives, NamesRoundTrip) {
  for (auto obj : {Objective::marginal_entropy, Objective::conditional_entropy,
                   Objective::pairwise_cross_entropy}) {
    EXPECT_EQ(parse_objective(to_string(obj)), obj);
  }
  for (auto s : {Strategy::none, Strategy::bn_only, Strategy::tta, Strategy::memo,
                 Strategy::ce_single_point, Strategy::pce, Strategy::tent_batch}) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_FALSE(parse_strategy("memo2").has_value());
}

Model<float> bn_probe(float train_mean, float train_var) {
  BatchNormLayer<float> bn;
  bn.channels = 1;
  bn.gamma = Tensor<float>({1}, {1.0f}, true);
  bn.beta = Tensor<float>({1}, {0.0f}, true);
  bn.running_mean = {train_mean};
  bn.running_var = {train_var};
  LinearLayer<float> head{1, 2, Tensor<float>({1, 2}, {1.0f, -1.0f}, true), Tensor<float>({2}, {0.0f, 0.0f}, true)};
  return Model<float>({bn, FlattenLayer{}, head}, 2, {1, 1, 1});
}

TEST(SinglePointBnStats, MixingFormula) {
  const auto m = bn_probe(0.0f, 1.0f);
  const Tensor<float> x({2, 1, 1, 1}, {1.2f, 2.2f});  // mean 1.7, biased var 0.25
  const auto s16 = single_point_bn_stats(m, x, 16.0);
  EXPECT_NEAR(s16[0].mean[0], 0.1, 1e-7);
  EXPECT_NEAR(s16[0].var[0], (16.0 * 1.0 + 0.25) / 17.0, 1e-6);
  const auto inf = single_point_bn_stats(m, x, kInfinitePrior);
  EXPECT_EQ(inf[0].mean[0], 0.0f);
  EXPECT_EQ(inf[0].var[0], 1.0f);
  const auto zero = single_point_bn_stats(m, x, 0.0);
  EXPECT_NEAR(zero[0].mean[0], 1.7, 1e-6);
  EXPECT_NEAR(zero[0].var[0], 0.25, 1e-6);
}

TEST(SinglePointBnStats, InfinitePriorReproducesEvalOutputs) {
  auto m = make_conv_small({1, 16, 16}, 4, {4, 6, 8}, 2);
  testing::randomize_batch_norm(m, 4);
  const auto x = to_batch<float>(random_image(1, 16, 16, 9));
  const auto stats = single_point_bn_stats(m, x, kInfinitePrior);
  const auto a = m.forward(x, BnContext<float>::mixed(stats));
  const auto b = m.forward(x, BnContext<float>::eval());
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a.values()[i], b.values()[i]);
}

TEST(SinglePointBnStats, DeepLayersMixRecursively) {
  // Layer l's test moments come from activations normalized with layer l-1's mix.
  auto m = make_mlp_bn({1, 2, 2}, 3, {5, 4}, 7);
  testing::randomize_batch_norm(m, 8);
  const auto x = to_batch<float>(std::vector<Image>{random_image(1, 2, 2, 1), random_image(1, 2, 2, 2)});
  const auto stats = single_point_bn_stats(m, x, 3.0);
  ASSERT_EQ(stats.size(), 2u);
  NoGradGuard guard;
  auto h = flatten(x);
  const auto& l0 = std::get<LinearLayer<float>>(m.layers()[1]);
  h = add(matmul(h, l0.weight), l0.bias);
  std::vector<float> mean, var;
  channel_moments<float>(h.values(), h.shape(), mean, var);
  const auto& bn0 = std::get<BatchNormLayer<float>>(m.layers()[2]);
  for (std::size_t c = 0; c < 5; ++c) {
    EXPECT_NEAR(stats[0].mean[c], 0.75 * bn0.running_mean[c] + 0.25 * mean[c], 1e-6);
    EXPECT_NEAR(stats[0].var[c], 0.75 * bn0.running_var[c] + 0.25 * var[c], 1e-6);
  }
}

// Straight-line update rules.
TEST(Optimizer, PlainSgdStep) {
  Tensor<double> theta({1}, {1.0}, true);
  auto loss = scale(theta, 2.0);
  loss.backward();
  Optimizer<double> opt(UpdateRule{}, {theta});
  EXPECT_TRUE(opt.step(0.1));
  EXPECT_NEAR(theta.values()[0], 0.8, 1e-15);
}

TEST(Optimizer, ZeroGradientAndDecoupledDecay) {
  Tensor<double> theta({2}, {1.0, -2.0}, true);
  Optimizer<double> plain(UpdateRule{}, {theta});
  EXPECT_TRUE(plain.step(0.1));
  EXPECT_EQ(theta.values()[0], 1.0);
  EXPECT_EQ(theta.values()[1], -2.0);
  for (auto kind : {UpdateKind::sgd, UpdateKind::sgd_momentum, UpdateKind::adaptive_moments}) {
    Tensor<double> t({2}, {1.0, -2.0}, true);
    UpdateRule rule;
    rule.kind = kind;
    rule.weight_decay = 0.5;
    Optimizer<double> opt(rule, {t});
    EXPECT_TRUE(opt.step(0.1));
    EXPECT_NEAR(t.values()[0], 1.0 * (1.0 - 0.1 * 0.5), 1e-15) << to_string(kind);
    EXPECT_NEAR(t.values()[1], -2.0 * (1.0 - 0.1 * 0.5), 1e-15) << to_string(kind);
  }
}

TEST(Optimizer, AdaptiveMomentsMatchReference) {
  UpdateRule rule;
  rule.kind = UpdateKind::adaptive_moments;
  rule.weight_decay = 0.01;
  Tensor<double> theta({3}, {0.5, -1.0, 2.0}, true);
  Optimizer<double> opt(rule, {theta});
  std::vector<double> ref{0.5, -1.0, 2.0}, m(3, 0.0), v(3, 0.0);
  const double lr = 0.01;
  for (int t = 1; t <= 5; ++t) {
    theta.zero_grad();
    auto loss = sum(mul(theta, mul(theta, theta)));  // grad 3 theta^2
    loss.backward();
    ASSERT_TRUE(opt.step(lr));
    for (std::size_t i = 0; i < 3; ++i) {
      const double g = 3.0 * ref[i] * ref[i];
      ref[i] *= 1.0 - lr * rule.weight_decay;
      m[i] = rule.beta1 * m[i] + (1.0 - rule.beta1) * g;
      v[i] = rule.beta2 * v[i] + (1.0 - rule.beta2) * g * g;
      const double mh = m[i] / (1.0 - std::pow(rule.beta1, t));
      const double vh = v[i] / (1.0 - std::pow(rule.beta2, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + rule.epsilon);
      EXPECT_NEAR(theta.values()[i], ref[i], 1e-12) << "step " << t;
    }
  }
}

TEST(Optimizer, AdaptiveFirstStepIsLearningRate) {
  UpdateRule rule;
  rule.kind = UpdateKind::adaptive_moments;
  Tensor<double> theta({1}, {1.0}, true);
  auto loss = sum(theta);
  loss.backward();
  Optimizer<double> opt(rule, {theta});
  opt.step(0.01);
  EXPECT_NEAR(1.0 - theta.values()[0], 0.01, 1e-8);
}

TEST(Optimizer, MomentumMatchesReference) {
  UpdateRule rule;
  rule.kind = UpdateKind::sgd_momentum;
  Tensor<double> theta({1}, {1.0}, true);
  Optimizer<double> opt(rule, {theta});
  double ref = 1.0, vel = 0.0;
  for (int t = 0; t < 4; ++t) {
    theta.zero_grad();
    auto loss = mul(theta, theta);
    sum(loss).backward();
    opt.step(0.1);
    vel = 0.9 * vel + 2.0 * ref;
    ref -= 0.1 * vel;
    EXPECT_NEAR(theta.values()[0], ref, 1e-14);
  }
}

TEST(Optimizer, NonFiniteGradientSkipsEveryParameter) {
  Tensor<double> a({1}, {1.0}, true), b({1}, {0.0}, true);
  auto loss = sum(mul(a, scale(b, std::numeric_limits<double>::infinity())));  // 0 * inf
  loss.backward();
  Optimizer<double> opt(UpdateRule{}, {a, b});
  EXPECT_FALSE(opt.step(0.1));
  EXPECT_EQ(a.values()[0], 1.0);
  EXPECT_EQ(opt.steps_taken(), 0u);
}

class MemoFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    model_ = make_conv_small({1, 16, 16}, 4, {4, 6, 8}, 3);
    testing::randomize_batch_norm(model_, 5);
    for (std::uint64_t i = 0; i < 8; ++i) points_.push_back(random_image(1, 16, 16, 40 + i));
    config_.batch_size = 8;
  }
  int predict(const AdaptationConfig& c, std::size_t i) const {
    return adapt_predict(model_, points_[i], 0, c, 100 + i).prediction;
  }
  Model<float> model_ = make_conv_small({1, 16, 16}, 4, {4, 4, 4}, 1);
  std::vector<Image> points_;
  AdaptationConfig config_;
};

TEST_F(MemoFixture, ZeroStepEqualsBnOnly) {
  for (auto source : {BnStatsSource::augmented, BnStatsSource::original}) {
    for (auto strategy : {Strategy::memo, Strategy::ce_single_point, Strategy::pce}) {
      AdaptationConfig memo = config_;
      memo.strategy = strategy;
      memo.lr = 0.0;
      memo.bn_stats_source = source;
      AdaptationConfig bn = memo;
      bn.strategy = Strategy::bn_only;
      for (std::size_t i = 0; i < points_.size(); ++i) {
        const auto out = adapt_predict(model_, points_[i], 0, memo, i);
        EXPECT_EQ(out.prediction, adapt_predict(model_, points_[i], 0, bn, i).prediction);
        EXPECT_TRUE(out.record.adapted);
        EXPECT_EQ(out.record.loss_after, out.record.loss_before);
      }
    }
  }
}

TEST_F(MemoFixture, InfinitePriorBnOnlyEqualsPlainPrediction) {
  AdaptationConfig bn = config_;
  bn.strategy = Strategy::bn_only;
  bn.prior_strength = kInfinitePrior;
  AdaptationConfig none = config_;
  none.strategy = Strategy::none;
  for (std::size_t i = 0; i < points_.size(); ++i) EXPECT_EQ(predict(bn, i), predict(none, i));
}

TEST_F(MemoFixture, IdentityPolicyLossesCoincideAndSmallStepDescends) {
  AdaptationConfig c = config_;
  c.policy.kind = PolicyKind::identity;
  c.batch_size = 4;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    BnStatistics<float> stats;
    const std::vector<Image> copies(4, points_[i]);
    const auto p = softmax(model_.forward(to_batch<float>(std::span<const Image>(copies)),
                                          BnContext<float>::collect(c.prior_strength, stats)));
    const double point = h_ref(std::vector<double>(p.values().begin(), p.values().begin() + 4));
    EXPECT_NEAR(marginal_entropy(p).item(), point, 1e-6);
    EXPECT_NEAR(conditional_entropy(p).item(), point, 1e-6);

    double lr = 0.5;
    bool decreased = false;
    for (int k = 0; k <= 20 && !decreased; ++k, lr /= 2.0) {
      c.lr = lr;
      const auto out = memo_adapt_predict(model_, points_[i], 0, c, i);
      decreased = out.record.loss_after < out.record.loss_before;
    }
    EXPECT_TRUE(decreased) << "point " << i;
  }
}

TEST_F(MemoFixture, AugmentedCopiesDescendWithinTwentyHalvings) {
  AdaptationConfig c = config_;
  for (auto strategy : {Strategy::memo, Strategy::ce_single_point, Strategy::pce}) {
    c.strategy = strategy;
    for (std::size_t i = 0; i < points_.size(); ++i) {
      double lr = 0.5;
      bool ok = false;
      for (int k = 0; k <= 20 && !ok; ++k, lr /= 2.0) {
        c.lr = lr;
        const auto out = memo_adapt_predict(model_, points_[i], 0, c, i);
        ok = out.record.loss_after <= out.record.loss_before;
      }
      EXPECT_TRUE(ok) << to_string(strategy) << " point " << i;
    }
  }
}

TEST_F(MemoFixture, EpisodicCallLeavesSourceModelBitIdentical) {
  const auto x = to_batch<float>(std::span<const Image>(points_));
  const auto before = model_.forward(x, BnContext<float>::eval());
  const auto params_before = model_.parameters();
  std::vector<std::vector<float>> snapshot;
  for (const auto& p : params_before) snapshot.emplace_back(p.values().begin(), p.values().end());
  AdaptationConfig c = config_;
  c.lr = 0.1;
  c.steps = 2;
  c.rule.kind = UpdateKind::adaptive_moments;
  const auto out = memo_adapt_predict(model_, points_[0], 0, c, 1);
  ASSERT_TRUE(out.adapted.has_value());
  const auto after = model_.forward(x, BnContext<float>::eval());
  for (std::size_t i = 0; i < before.numel(); ++i) EXPECT_EQ(before.values()[i], after.values()[i]);
  const auto params_after = model_.parameters();
  for (std::size_t k = 0; k < snapshot.size(); ++k) {
    EXPECT_TRUE(std::equal(snapshot[k].begin(), snapshot[k].end(), params_after[k].values().begin()));
  }
  // The adapted copy did move.
  const auto moved = out.adapted->forward(x, BnContext<float>::eval());
  bool differs = false;
  for (std::size_t i = 0; i < moved.numel(); ++i) differs |= moved.values()[i] != before.values()[i];
  EXPECT_TRUE(differs);
}

TEST_F(MemoFixture, FullThresholdGateNeverAdapts) {
  AdaptationConfig gated = config_;
  gated.threshold_fraction = 1.0;
  gated.lr = 0.5;
  AdaptationConfig bn = config_;
  bn.strategy = Strategy::bn_only;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto out = adapt_predict(model_, points_[i], 0, gated, i);
    EXPECT_FALSE(out.record.adapted);
    EXPECT_EQ(out.prediction, adapt_predict(model_, points_[i], 0, bn, i).prediction);
  }
}

TEST_F(MemoFixture, RepeatedCallsAreDeterministic) {
  for (std::size_t i = 0; i < 3; ++i) {
    const auto a = memo_adapt_predict(model_, points_[i], 0, config_, 7);
    const auto b = memo_adapt_predict(model_, points_[i], 0, config_, 7);
    EXPECT_EQ(a.prediction, b.prediction);
    EXPECT_EQ(a.record.loss_before, b.record.loss_before);
    EXPECT_EQ(a.record.loss_after, b.record.loss_after);
  }
}

TEST_F(MemoFixture, NonFiniteInputFlagsAndFallsBack) {
  Image bad = points_[0];
  bad.pixels[3] = std::nanf("");
  const auto out = memo_adapt_predict(model_, bad, 2, config_, 1);
  EXPECT_TRUE(out.record.flagged);
  EXPECT_FALSE(out.record.adapted);
  EXPECT_FALSE(out.adapted.has_value());
  EXPECT_FALSE(out.record.note.empty());
  EXPECT_TRUE(std::isfinite(out.record.loss_before));
  EXPECT_TRUE(std::isfinite(out.record.loss_after));
}

// Positive logit scaling keeps the pointwise argmax and TTA with agreeing
// copies.
TEST_F(MemoFixture, LogitScalingKeepsArgmax) {
  auto scaled = model_;
  auto& head = std::get<LinearLayer<float>>(scaled.layers().back());
  for (auto& v : head.weight.mutable_values()) v *= 4.0f;
  for (auto& v : head.bias.mutable_values()) v *= 4.0f;
  AdaptationConfig none = config_;
  none.strategy = Strategy::none;
  AdaptationConfig tta = config_;
  tta.strategy = Strategy::tta;
  tta.policy.kind = PolicyKind::identity;
  AdaptationConfig tta1 = config_;
  tta1.strategy = Strategy::tta;
  tta1.batch_size = 1;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    EXPECT_EQ(adapt_predict(model_, points_[i], 0, none, i).prediction,
              adapt_predict(scaled, points_[i], 0, none, i).prediction);
    EXPECT_EQ(tta_predict(model_, points_[i], tta, i), tta_predict(scaled, points_[i], tta, i));
    EXPECT_EQ(tta_predict(model_, points_[i], tta1, i), tta_predict(scaled, points_[i], tta1, i));
  }
}

// With disagreeing copies the marginal argmax is not scale invariant.
TEST(Tta, MarginalArgmaxCanFlipUnderLogitScaling) {
  const D logits({3, 2}, {1, 0, 1, 0, 0, 10});
  const auto small = marginal_distribution(softmax(scale(logits, 0.01)));
  const auto large = marginal_distribution(softmax(scale(logits, 10.0)));
  EXPECT_EQ(argmax(small.values()), 1u);
  EXPECT_EQ(argmax(large.values()), 0u);
}

TEST(Tta, ForcedMarginalPicksClassZero) {
  const auto bar = marginal_distribution(probs(3, 2, {0.7, 0.3, 0.5, 0.5, 0.6, 0.4}));
  EXPECT_EQ(argmax(bar.values()), 0u);
}

TEST_F(MemoFixture, TtaWithIdentityPolicyEqualsBnOnly) {
  AdaptationConfig tta = config_;
  tta.strategy = Strategy::tta;
  tta.policy.kind = PolicyKind::identity;
  AdaptationConfig bn = tta;
  bn.strategy = Strategy::bn_only;
  bn.bn_stats_source = BnStatsSource::original;
  bn.batch_size = 1;
  // B identical copies yield the same batch moments as x alone.
  for (std::size_t i = 0; i < points_.size(); ++i) EXPECT_EQ(predict(tta, i), predict(bn, i));
}

TEST(AdaptationConfig, RejectsInvalidSettings) {
  auto expect_bad = [](auto mutate) {
    AdaptationConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  expect_bad([](AdaptationConfig& c) { c.batch_size = 0; });
  expect_bad([](AdaptationConfig& c) { c.strategy = Strategy::pce, c.batch_size = 1; });
  expect_bad([](AdaptationConfig& c) { c.lr = -1.0; });
  expect_bad([](AdaptationConfig& c) { c.lr = std::nan(""); });
  expect_bad([](AdaptationConfig& c) { c.steps = 0; });
  expect_bad([](AdaptationConfig& c) { c.prior_strength = -1.0; });
  expect_bad([](AdaptationConfig& c) { c.threshold_fraction = 0.0; });
  expect_bad([](AdaptationConfig& c) { c.threshold_fraction = 1.5; });
  expect_bad([](AdaptationConfig& c) { c.policy.chains = 0; });
  AdaptationConfig ok;
  ok.prior_strength = kInfinitePrior;
  EXPECT_NO_THROW(ok.validate());
}

class TentFixture : public MemoFixture {
 protected:
  std::vector<int> labels_ = std::vector<int>(8, 0);
};

TEST_F(TentFixture, EpisodicZeroStepEqualsBatchStatistics) {
  AdaptationConfig c = config_;
  c.strategy = Strategy::tent_batch;
  c.episodic = true;
  c.lr = 0.0;
  c.tent_batch_size = 4;
  const auto out = tent_adapt(model_, points_, labels_, c);
  ASSERT_EQ(out.records.size(), 8u);
  for (std::size_t first = 0; first < 8; first += 4) {
    const auto logits = model_.forward(to_batch<float>(std::span<const Image>(points_).subspan(first, 4)),
                                       BnContext<float>::batch());
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(out.records[first + i].prediction,
                static_cast<int>(argmax(logits.values().subspan(i * 4, 4))));
      EXPECT_EQ(out.records[first + i].index, first + i);
    }
  }
}

TEST_F(TentFixture, OnlineRepeatedBatchLossDoesNotIncrease) {
  std::vector<Image> stream(points_.begin(), points_.begin() + 4);
  stream.insert(stream.end(), points_.begin(), points_.begin() + 4);
  AdaptationConfig c = config_;
  c.strategy = Strategy::tent_batch;
  c.tent_batch_size = 4;
  double lr = 0.5;
  bool ok = false;
  for (int k = 0; k <= 20 && !ok; ++k, lr /= 2.0) {
    c.lr = lr;
    const auto out = tent_adapt(model_, stream, labels_, c);
    double first = 0.0, second = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      first += out.records[i].loss_before;
      second += out.records[4 + i].loss_before;
    }
    ok = second <= first;
  }
  EXPECT_TRUE(ok);
}

TEST_F(TentFixture, EpisodicBatchesAreIndependent) {
  AdaptationConfig c = config_;
  c.strategy = Strategy::tent_batch;
  c.episodic = true;
  c.lr = 0.05;
  c.tent_batch_size = 4;
  const auto full = tent_adapt(model_, points_, labels_, c);
  const auto tail = tent_adapt(model_, std::span<const Image>(points_).subspan(4),
                               std::span<const int>(labels_).subspan(4), c);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(full.records[4 + i].prediction, tail.records[i].prediction);
    EXPECT_EQ(full.records[4 + i].loss_after, tail.records[i].loss_after);
  }
}

TEST_F(TentFixture, BatchOfOneMatchesSinglePointConditionalEntropy) {
  AdaptationConfig tent = config_;
  tent.strategy = Strategy::tent_batch;
  tent.episodic = true;
  tent.tent_batch_size = 1;
  tent.tent_prior_strength = 16.0;
  tent.lr = 0.05;
  AdaptationConfig ce = config_;
  ce.strategy = Strategy::ce_single_point;
  ce.policy.kind = PolicyKind::identity;
  ce.batch_size = 1;
  ce.prior_strength = 16.0;
  ce.lr = 0.05;
  ce.param_filter = ParamFilter::norm_affine_only;
  ce.bn_stats_source = BnStatsSource::original;
  const auto out = tent_adapt(model_, points_, labels_, tent);
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto single = memo_adapt_predict(model_, points_[i], 0, ce, i);
    EXPECT_EQ(out.records[i].prediction, single.prediction) << i;
    EXPECT_NEAR(out.records[i].loss_before, single.record.loss_before, 1e-6);
  }
}

TEST_F(TentFixture, EmptyStreamAndLabelMismatch) {
  AdaptationConfig c = config_;
  c.strategy = Strategy::tent_batch;
  EXPECT_TRUE(tent_adapt(model_, {}, {}, c).records.empty());
  EXPECT_THROW(tent_adapt(model_, points_, std::span<const int>(labels_).subspan(1), c), Error);
  EXPECT_THROW(adapt_predict(model_, points_[0], 0, c, 1), ConfigError);
}

// The loss graph built by objective_loss agrees with finite differences over
// model parameters when BN statistics are held fixed.
TEST(ObjectiveLoss, ParameterGradientsMatchFiniteDifferences) {
  auto mf = make_conv_small({1, 8, 8}, 3, {2, 3, 3}, 4);
  testing::randomize_batch_norm(mf, 6);
  const auto m = mf.cast<double>();
  std::vector<Image> copies;
  for (std::uint64_t i = 0; i < 3; ++i) copies.push_back(random_image(1, 8, 8, 70 + i));
  const auto stats = single_point_bn_stats(m, to_batch<double>(std::span<const Image>(copies)), 16.0);
  for (auto obj : {Objective::marginal_entropy, Objective::conditional_entropy,
                   Objective::pairwise_cross_entropy}) {
    auto loss = [&] { return objective_loss(obj, m, copies, BnContext<double>::mixed(stats)); };
    EXPECT_LE(grad_check_parameters(loss, m.parameters(), 1e-6, 40, 3), 1e-4) << to_string(obj);
  }
}

}  // namespace
}  // namespace ttr
