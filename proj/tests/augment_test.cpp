// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "ttr/augment.hpp"
#include "ttr/corrupt.hpp"
#include "ttr/error.hpp"
#include "ttr/synthetic.hpp"
#include "ttr/train.hpp"

namespace ttr {
namespace {

using testing::random_image;

// Straight-line reference for the mixing op set, written per pixel.
std::size_t ref_round_clamp(double v, std::size_t n) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(n) - 1.0));
}

Image ref_op(const Image& x, const OpStep& s) {
  Image out = x;
  const double cx = (static_cast<double>(x.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(x.height) - 1.0) / 2.0;
  const bool geometric = s.op == AugOp::rotate || s.op == AugOp::shear_x || s.op == AugOp::shear_y ||
                         s.op == AugOp::translate_x || s.op == AugOp::translate_y;
  if (geometric) {
    for (std::size_t y = 0; y < x.height; ++y) {
      for (std::size_t xx = 0; xx < x.width; ++xx) {
        const double px = static_cast<double>(xx), py = static_cast<double>(y);
        double sx = px, sy = py;
        if (s.op == AugOp::rotate) {
          const double t = s.param * std::numbers::pi / 180.0;
          sx = std::cos(t) * (px - cx) + std::sin(t) * (py - cy) + cx;
          sy = -std::sin(t) * (px - cx) + std::cos(t) * (py - cy) + cy;
        } else if (s.op == AugOp::shear_x) {
          sx = px + s.param * (py - cy);
        } else if (s.op == AugOp::shear_y) {
          sy = py + s.param * (px - cx);
        } else if (s.op == AugOp::translate_x) {
          sx = px - s.param;
        } else {
          sy = py - s.param;
        }
        for (std::size_t c = 0; c < x.channels; ++c) {
          out.at(c, y, xx) = x.at(c, ref_round_clamp(sy, x.height), ref_round_clamp(sx, x.width));
        }
      }
    }
    return out;
  }
  for (std::size_t c = 0; c < x.channels; ++c) {
    const auto begin = x.pixels.begin() + static_cast<std::ptrdiff_t>(c * x.plane());
    std::vector<float> v(begin, begin + static_cast<std::ptrdiff_t>(x.plane()));
    std::vector<float> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    const double last = static_cast<double>(sorted.size() - 1);
    for (std::size_t i = 0; i < v.size(); ++i) {
      float& o = out.pixels[c * x.plane() + i];
      switch (s.op) {
        case AugOp::autocontrast:
        case AugOp::equalize: {
          const double q = s.op == AugOp::autocontrast ? 0.0 : 0.02;
          const float lo = sorted[static_cast<std::size_t>(std::floor(q * last))];
          const float hi = sorted[static_cast<std::size_t>(std::ceil((1.0 - q) * last))];
          if (hi - lo > 1e-6f) o = (v[i] - lo) / (hi - lo);
          break;
        }
        case AugOp::posterize: {
          const int keep = 8 - std::clamp(static_cast<int>(s.param), 1, 8);
          const int level = std::clamp(static_cast<int>(std::floor(v[i] * 255.0f + 0.5f)), 0, 255);
          o = static_cast<float>(level / (1 << keep) * (1 << keep)) / 255.0f;
          break;
        }
        case AugOp::solarize:
          if (v[i] >= static_cast<float>(s.param)) o = 1.0f - v[i];
          break;
        default: ADD_FAILURE() << "op outside the reference set";
      }
      o = std::clamp(o, 0.0f, 1.0f);
    }
  }
  return out;
}

Image ref_augmix(const Image& x, const AugMixPlan& plan) {
  std::vector<double> acc(x.pixels.size(), 0.0);
  for (std::size_t k = 0; k < plan.chains.size(); ++k) {
    Image cur = x;
    for (const auto& step : plan.chains[k]) cur = ref_op(cur, step);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += plan.weights[k] * cur.pixels[i];
  }
  Image out = x;
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double v = plan.skip * x.pixels[i] + (1.0 - plan.skip) * acc[i];
    out.pixels[i] = std::clamp(static_cast<float>(v), 0.0f, 1.0f);
  }
  return out;
}

void expect_valid(const Image& out, const Image& x) {
  ASSERT_TRUE(out.same_shape(x));
  for (float v : out.pixels) {
    ASSERT_GE(v, 0.0f);
    ASSERT_LE(v, 1.0f);
  }
}

TEST(SampleAugmentations, IdentityPolicyCopiesInput) {
  const auto x = random_image(3, 8, 8, 1);
  AugmentationPolicy policy;
  policy.kind = PolicyKind::identity;
  const auto out = sample_augmentations(x, 3, policy, 5);
  ASSERT_EQ(out.size(), 3u);
  for (const auto& im : out) EXPECT_EQ(im, x);
}

TEST(SampleAugmentations, FixedSeedIsBitIdentical) {
  const auto x = random_image(3, 16, 16, 2);
  for (auto kind : {PolicyKind::augmix_lite, PolicyKind::standard}) {
    AugmentationPolicy policy;
    policy.kind = kind;
    EXPECT_EQ(sample_augmentations(x, 8, policy, 42), sample_augmentations(x, 8, policy, 42));
    EXPECT_NE(sample_augmentations(x, 8, policy, 42), sample_augmentations(x, 8, policy, 43));
  }
}

TEST(SampleAugmentations, SmallerCountIsPrefix) {
  const auto x = random_image(1, 16, 16, 3);
  const AugmentationPolicy policy;
  const auto big = sample_augmentations(x, 16, policy, 7);
  const auto small = sample_augmentations(x, 4, policy, 7);
  EXPECT_TRUE(std::equal(small.begin(), small.end(), big.begin()));
}

TEST(SampleAugmentations, ZeroCountRejected) {
  EXPECT_THROW(sample_augmentations(random_image(1, 8, 8, 1), 0, AugmentationPolicy{}, 1), Error);
}

TEST(SampleAugmentations, OutputsStayInRangeWithInputShape) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto x = random_image(seed % 2 ? 3 : 1, 12, 16, seed);
    for (auto kind : {PolicyKind::augmix_lite, PolicyKind::standard, PolicyKind::identity}) {
      AugmentationPolicy policy;
      policy.kind = kind;
      policy.ops = all_aug_ops();
      policy.severity = 10;
      for (const auto& im : sample_augmentations(x, 4, policy, seed)) expect_valid(im, x);
    }
  }
}

TEST(ApplyOp, EveryOpKeepsShapeAndRangeAtEveryLevel) {
  const auto x = random_image(3, 10, 14, 4);
  for (AugOp op : all_aug_ops()) {
    for (int level = 0; level <= 10; ++level) {
      for (bool negate : {false, true}) {
        expect_valid(apply_op(x, {op, op_magnitude(op, level, 14, negate)}), x);
      }
    }
  }
}

TEST(ApplyOp, MatchesReferenceForMixingOps) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto x = random_image(2, 9, 11, seed);
    for (AugOp op : default_aug_ops()) {
      for (int level = 1; level <= 10; level += 3) {
        const OpStep step{op, op_magnitude(op, level, 11, seed % 2 == 0)};
        EXPECT_EQ(apply_op(x, step), ref_op(x, step)) << to_string(op) << " level " << level;
      }
    }
  }
}

TEST(AugMix, OutputEqualsReferenceReexecution) {
  const AugmentationPolicy policy;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto x = random_image(3, 16, 16, 100 + seed);
    Rng rng(seed);
    const auto plan = sample_augmix_plan(rng, policy, x);
    EXPECT_EQ(augmix_lite(x, seed, policy), ref_augmix(x, plan)) << seed;
  }
}

TEST(AugMix, ConstantGrayStaysConstantAndMatchesScalarChains) {
  const Image gray(3, 16, 16, 0.37f);
  const AugmentationPolicy policy;
  const std::uint64_t seed = 2024;
  const auto out = sample_augmentations(gray, 64, policy, seed);
  std::vector<float> values;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& im = out[i];
    for (float v : im.pixels) ASSERT_EQ(v, im.pixels[0]) << "copy " << i;
    // Geometric and stretch ops leave a constant unchanged; posterize and
    // solarize act on the single gray level.
    Rng rng(hash_combine(seed, i));
    const auto plan = sample_augmix_plan(rng, policy, gray);
    double acc = 0.0;
    for (std::size_t k = 0; k < plan.chains.size(); ++k) {
      float g = 0.37f;
      for (const auto& s : plan.chains[k]) {
        if (s.op == AugOp::posterize) {
          const int keep = 8 - static_cast<int>(s.param);
          const int level = static_cast<int>(std::floor(g * 255.0f + 0.5f));
          g = static_cast<float>(level / (1 << keep) * (1 << keep)) / 255.0f;
        } else if (s.op == AugOp::solarize && g >= static_cast<float>(s.param)) {
          g = 1.0f - g;
        }
      }
      acc += plan.weights[k] * g;
    }
    const auto expected = static_cast<float>(plan.skip * 0.37f + (1.0 - plan.skip) * acc);
    EXPECT_EQ(im.pixels[0], expected) << "copy " << i;
    values.push_back(im.pixels[0]);
  }
  std::sort(values.begin(), values.end());
  EXPECT_GT(std::unique(values.begin(), values.end()) - values.begin(), 1);
}

TEST(AugMix, FullSkipWeightReturnsInput) {
  const auto x = random_image(3, 16, 16, 9);
  Rng rng(3);
  auto plan = sample_augmix_plan(rng, AugmentationPolicy{}, x);
  plan.skip = 1.0;
  EXPECT_EQ(apply_augmix_plan(x, plan), x);
}

TEST(AugMix, SingleZeroRotationChainReturnsInput) {
  const auto x = random_image(1, 16, 16, 10);
  for (double skip : {0.0, 0.3, 1.0}) {
    AugMixPlan plan{{{OpStep{AugOp::rotate, 0.0}}}, {1.0}, skip};
    EXPECT_EQ(apply_augmix_plan(x, plan), x);
  }
}

TEST(AugMix, ChainLengthAndWeightsFollowPolicy) {
  AugmentationPolicy policy;
  policy.chains = 4;
  policy.max_depth = 2;
  const auto x = random_image(1, 8, 8, 1);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto plan = sample_augmix_plan(rng, policy, x);
    ASSERT_EQ(plan.chains.size(), 4u);
    double total = 0.0;
    for (double w : plan.weights) {
      EXPECT_GE(w, 0.0);
      total += w;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    EXPECT_GE(plan.skip, 0.0);
    EXPECT_LE(plan.skip, 1.0);
    for (const auto& chain : plan.chains) {
      EXPECT_GE(chain.size(), 1u);
      EXPECT_LE(chain.size(), 2u);
      for (const auto& s : chain) {
        EXPECT_NE(std::find(policy.ops.begin(), policy.ops.end(), s.op), policy.ops.end());
      }
    }
  }
}

TEST(AugmentationPolicy, MixingOpsExcludeCorruptionLikeOps) {
  const auto& ops = default_aug_ops();
  for (AugOp banned : {AugOp::brightness, AugOp::contrast, AugOp::sharpness}) {
    EXPECT_EQ(std::find(ops.begin(), ops.end(), banned), ops.end()) << to_string(banned);
  }
  for (AugOp op : ops) {
    for (CorruptionKind kind : all_corruption_kinds()) {
      EXPECT_EQ(std::string(to_string(kind)).find(to_string(op)), std::string::npos);
    }
  }
}

TEST(AugmentationPolicy, InvalidSettingsRejected) {
  AugmentationPolicy p;
  p.chains = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.max_depth = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.alpha = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.ops.clear();
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.severity = 11;
  EXPECT_THROW(p.validate(), ConfigError);
  EXPECT_NO_THROW(AugmentationPolicy{}.validate());
}

TEST(AugmentationPolicy, NamesRoundTrip) {
  for (AugOp op : all_aug_ops()) EXPECT_EQ(parse_aug_op(to_string(op)), op);
  for (auto k : {PolicyKind::augmix_lite, PolicyKind::standard, PolicyKind::identity}) {
    EXPECT_EQ(parse_policy_kind(to_string(k)), k);
  }
  EXPECT_FALSE(parse_aug_op("gaussian_noise").has_value());
}

TEST(StandardAugment, FullCropWithoutFlipIsIdentity) {
  const auto x = random_image(3, 16, 12, 5);
  EXPECT_EQ(apply_crop_flip(x, CropFlipPlan{0, 0, 16, 12, false}), x);
}

TEST(StandardAugment, FlipIsInvolution) {
  const auto x = random_image(3, 7, 10, 6);
  EXPECT_NE(horizontal_flip(x), x);
  EXPECT_EQ(horizontal_flip(horizontal_flip(x)), x);
}

TEST(StandardAugment, SeedReproducibleAndScaleInRange) {
  const auto x = random_image(1, 32, 32, 7);
  EXPECT_EQ(standard_augment(x, 11), standard_augment(x, 11));
  std::size_t flips = 0;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    Rng rng(seed);
    const auto plan = sample_crop_flip_plan(rng, x);
    const double area = static_cast<double>(plan.crop_h * plan.crop_w) / (32.0 * 32.0);
    EXPECT_GE(area, 0.45);
    EXPECT_LE(area, 1.0);
    EXPECT_LE(plan.top + plan.crop_h, 32u);
    EXPECT_LE(plan.left + plan.crop_w, 32u);
    flips += plan.flip;
  }
  EXPECT_GT(flips, 150u);
  EXPECT_LT(flips, 250u);
}

TEST(PadCropFlip, ZeroPadIsIdentityOrMirror) {
  const auto x = random_image(2, 8, 8, 8);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const auto out = pad_crop_flip(x, 0, rng);
    EXPECT_TRUE(out == x || out == horizontal_flip(x));
  }
}

// Soft property: a model trained on clean data mostly keeps its prediction
// on augmented copies.
TEST(LabelPreservation, TrainedModelAgreesOnMajorityOfCopies) {
  SyntheticSpec spec;
  spec.per_class = 300;
  spec.seed = 1;
  const auto train = generate_synthetic(spec);
  spec.per_class = 25;
  spec.seed = 2;
  const auto test = generate_synthetic(spec, SplitKind::test_clean);
  auto model = make_conv_small({1, 32, 32}, 4, {16, 32, 32}, 3);
  TrainOptions opt;
  opt.epochs = 10;
  opt.seed = 4;
  train_supervised(model, train, nullptr, opt);
  ASSERT_GT(evaluate_clean(model, test).accuracy, 0.8);

  const AugmentationPolicy policy;
  std::size_t agree = 0, total = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto base = model.forward(to_batch<float>(test.images[i]), BnContext<float>::eval());
    const auto expected = argmax(std::span<const float>(base.values()));
    const auto copies = sample_augmentations(test.images[i], 8, policy, i);
    const auto logits = model.forward(to_batch<float>(std::span<const Image>(copies)), BnContext<float>::eval());
    for (std::size_t b = 0; b < copies.size(); ++b) {
      const auto row = std::span<const float>(logits.values()).subspan(b * 4, 4);
      agree += argmax(row) == expected;
      ++total;
    }
  }
  const double rate = static_cast<double>(agree) / static_cast<double>(total);
  std::cout << "label agreement on augmented copies: " << rate << "\n";
  EXPECT_GE(rate, 0.6);
}

}  // namespace
}  // namespace ttr
