// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "ttr/error.hpp"

namespace ttr {

namespace {

constexpr std::array<std::pair<AugOp, std::string_view>, 12> kOpNames{{
    {AugOp::autocontrast, "autocontrast"},
    {AugOp::equalize, "equalize"},
    {AugOp::posterize, "posterize"},
    {AugOp::rotate, "rotate"},
    {AugOp::solarize, "solarize"},
    {AugOp::shear_x, "shear_x"},
    {AugOp::shear_y, "shear_y"},
    {AugOp::translate_x, "translate_x"},
    {AugOp::translate_y, "translate_y"},
    {AugOp::brightness, "brightness"},
    {AugOp::contrast, "contrast"},
    {AugOp::sharpness, "sharpness"},
}};

std::size_t clamp_index(double v, std::size_t extent) {
  const double r = std::floor(v + 0.5);
  if (r <= 0.0) return 0;
  if (r >= static_cast<double>(extent - 1)) return extent - 1;
  return static_cast<std::size_t>(r);
}

// out(y, x) = in(src_y, src_x) where (src_x, src_y) = map(x, y).
template <class Map>
Image resample(const Image& in, Map map) {
  Image out(in.channels, in.height, in.width);
  for (std::size_t y = 0; y < in.height; ++y) {
    for (std::size_t x = 0; x < in.width; ++x) {
      const auto [sx, sy] = map(static_cast<double>(x), static_cast<double>(y));
      const std::size_t ix = clamp_index(sx, in.width);
      const std::size_t iy = clamp_index(sy, in.height);
      for (std::size_t c = 0; c < in.channels; ++c) out.at(c, y, x) = in.at(c, iy, ix);
    }
  }
  return out;
}

Image stretch_channels(const Image& in, double low_q, double high_q) {
  Image out = in;
  std::vector<float> sorted(in.plane());
  for (std::size_t c = 0; c < in.channels; ++c) {
    const float* p = in.pixels.data() + c * in.plane();
    std::copy(p, p + in.plane(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    const auto last = static_cast<double>(sorted.size() - 1);
    const float lo = sorted[static_cast<std::size_t>(std::floor(low_q * last))];
    const float hi = sorted[static_cast<std::size_t>(std::ceil(high_q * last))];
    if (!(hi - lo > 1e-6f)) continue;
    float* q = out.pixels.data() + c * in.plane();
    for (std::size_t i = 0; i < in.plane(); ++i) q[i] = (p[i] - lo) / (hi - lo);
  }
  return out;
}

// PIL-style enhancement: degenerate + factor * (x - degenerate).
Image blend(const Image& degenerate, const Image& x, double factor) {
  Image out = x;
  for (std::size_t i = 0; i < x.pixels.size(); ++i) {
    const double d = degenerate.pixels[i];
    out.pixels[i] = static_cast<float>(d + factor * (static_cast<double>(x.pixels[i]) - d));
  }
  return out;
}

Image smoothed(const Image& x) {
  Image out = x;
  if (x.height < 3 || x.width < 3) return out;
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t y = 1; y + 1 < x.height; ++y) {
      for (std::size_t xx = 1; xx + 1 < x.width; ++xx) {
        double acc = 4.0 * x.at(c, y, xx);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) acc += x.at(c, y + dy, xx + dx);
        }
        out.at(c, y, xx) = static_cast<float>(acc / 13.0);
      }
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(AugOp op) {
  for (const auto& [o, name] : kOpNames) {
    if (o == op) return name;
  }
  return "unknown";
}

std::optional<AugOp> parse_aug_op(std::string_view name) {
  for (const auto& [o, n] : kOpNames) {
    if (n == name) return o;
  }
  return std::nullopt;
}

const std::vector<AugOp>& default_aug_ops() {
  static const std::vector<AugOp> ops{AugOp::autocontrast, AugOp::equalize,    AugOp::posterize,
                                      AugOp::rotate,       AugOp::solarize,    AugOp::shear_x,
                                      AugOp::shear_y,      AugOp::translate_x, AugOp::translate_y};
  return ops;
}

const std::vector<AugOp>& all_aug_ops() {
  static const std::vector<AugOp> ops = [] {
    std::vector<AugOp> v;
    for (const auto& [o, n] : kOpNames) v.push_back(o);
    return v;
  }();
  return ops;
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::augmix_lite: return "augmix_lite";
    case PolicyKind::standard: return "standard";
    case PolicyKind::identity: return "identity";
  }
  return "unknown";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  if (name == "augmix_lite") return PolicyKind::augmix_lite;
  if (name == "standard") return PolicyKind::standard;
  if (name == "identity") return PolicyKind::identity;
  return std::nullopt;
}

void AugmentationPolicy::validate() const {
  if (kind != PolicyKind::augmix_lite) return;
  if (ops.empty()) throw ConfigError("augmentation policy: empty op set");
  if (chains == 0) throw ConfigError("augmentation policy: chains must be >= 1");
  if (max_depth == 0) throw ConfigError("augmentation policy: depth must be >= 1");
  if (!(alpha > 0.0)) throw ConfigError("augmentation policy: alpha must be > 0");
  if (severity < 1 || severity > 10) {
    throw ConfigError("augmentation policy: severity must be in [1, 10]");
  }
}

double op_magnitude(AugOp op, int level, std::size_t image_extent, bool negate) {
  const double sign = negate ? -1.0 : 1.0;
  switch (op) {
    case AugOp::rotate: return sign * std::floor(level * 30.0 / 10.0);
    case AugOp::shear_x:
    case AugOp::shear_y: return sign * level * 0.3 / 10.0;
    case AugOp::translate_x:
    case AugOp::translate_y:
      return sign * std::floor(level * (static_cast<double>(image_extent) / 3.0) / 10.0);
    case AugOp::posterize: return 4.0 - std::floor(level * 4.0 / 10.0);
    case AugOp::solarize: return (256.0 - std::floor(level * 256.0 / 10.0)) / 256.0;
    case AugOp::brightness:
    case AugOp::contrast:
    case AugOp::sharpness: return level * 1.8 / 10.0 + 0.1;
    case AugOp::autocontrast:
    case AugOp::equalize: return 0.0;
  }
  return 0.0;
}

Image apply_op(const Image& x, const OpStep& step) {
  const double cx = (static_cast<double>(x.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(x.height) - 1.0) / 2.0;
  Image out;
  switch (step.op) {
    case AugOp::autocontrast: out = stretch_channels(x, 0.0, 1.0); break;
    case AugOp::equalize: out = stretch_channels(x, 0.02, 0.98); break;
    case AugOp::posterize: {
      const int bits = std::clamp(static_cast<int>(step.param), 1, 8);
      const int shift = 8 - bits;
      out = x;
      for (auto& v : out.pixels) {
        int q = std::clamp(static_cast<int>(std::floor(v * 255.0f + 0.5f)), 0, 255);
        q = (q >> shift) << shift;
        v = static_cast<float>(q) / 255.0f;
      }
      break;
    }
    case AugOp::solarize: {
      const auto threshold = static_cast<float>(step.param);
      out = x;
      for (auto& v : out.pixels) v = v < threshold ? v : 1.0f - v;
      break;
    }
    case AugOp::rotate: {
      const double rad = step.param * std::numbers::pi / 180.0;
      const double c = std::cos(rad), s = std::sin(rad);
      out = resample(x, [&](double px, double py) {
        const double dx = px - cx, dy = py - cy;
        return std::pair{c * dx + s * dy + cx, -s * dx + c * dy + cy};
      });
      break;
    }
    case AugOp::shear_x:
      out = resample(x, [&](double px, double py) {
        return std::pair{px + step.param * (py - cy), py};
      });
      break;
    case AugOp::shear_y:
      out = resample(x, [&](double px, double py) {
        return std::pair{px, py + step.param * (px - cx)};
      });
      break;
    case AugOp::translate_x:
      out = resample(x, [&](double px, double py) { return std::pair{px - step.param, py}; });
      break;
    case AugOp::translate_y:
      out = resample(x, [&](double px, double py) { return std::pair{px, py - step.param}; });
      break;
    case AugOp::brightness: out = blend(Image(x.channels, x.height, x.width, 0.0f), x, step.param); break;
    case AugOp::contrast: {
      double total = 0.0;
      for (float v : x.pixels) total += v;
      const auto mean = static_cast<float>(total / static_cast<double>(x.pixels.size()));
      out = blend(Image(x.channels, x.height, x.width, mean), x, step.param);
      break;
    }
    case AugOp::sharpness: out = blend(smoothed(x), x, step.param); break;
  }
  out.clamp01();
  return out;
}

AugMixPlan sample_augmix_plan(Rng& rng, const AugmentationPolicy& policy, const Image& x) {
  AugMixPlan plan;
  plan.weights = rng.dirichlet(policy.chains, policy.alpha);
  plan.skip = rng.beta(policy.alpha, policy.alpha);
  plan.chains.resize(policy.chains);
  for (auto& chain : plan.chains) {
    const auto depth = rng.uniform_int(1, static_cast<std::int64_t>(policy.max_depth));
    for (std::int64_t d = 0; d < depth; ++d) {
      const auto which = rng.uniform_int(0, static_cast<std::int64_t>(policy.ops.size()) - 1);
      const AugOp op = policy.ops[static_cast<std::size_t>(which)];
      const int level = static_cast<int>(rng.uniform_int(1, policy.severity));
      const bool negate = rng.bernoulli(0.5);
      const std::size_t extent = op == AugOp::translate_y ? x.height : x.width;
      chain.push_back({op, op_magnitude(op, level, extent, negate)});
    }
  }
  return plan;
}

Image apply_augmix_plan(const Image& x, const AugMixPlan& plan) {
  std::vector<double> mix(x.pixels.size(), 0.0);
  for (std::size_t i = 0; i < plan.chains.size(); ++i) {
    Image current = x;
    for (const auto& step : plan.chains[i]) current = apply_op(current, step);
    for (std::size_t j = 0; j < mix.size(); ++j) mix[j] += plan.weights[i] * current.pixels[j];
  }
  Image out = x;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    out.pixels[j] = static_cast<float>(plan.skip * x.pixels[j] + (1.0 - plan.skip) * mix[j]);
  }
  out.clamp01();
  return out;
}

Image augmix_lite(const Image& x, std::uint64_t seed, const AugmentationPolicy& policy) {
  Rng rng(seed);
  return apply_augmix_plan(x, sample_augmix_plan(rng, policy, x));
}

CropFlipPlan sample_crop_flip_plan(Rng& rng, const Image& x) {
  const double scale = rng.uniform(0.5, 1.0);
  const double side = std::sqrt(scale);
  CropFlipPlan plan;
  plan.crop_h = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(side * static_cast<double>(x.height))), 1, x.height);
  plan.crop_w = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(side * static_cast<double>(x.width))), 1, x.width);
  plan.top = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.height - plan.crop_h)));
  plan.left = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(x.width - plan.crop_w)));
  plan.flip = rng.bernoulli(0.5);
  return plan;
}

Image apply_crop_flip(const Image& x, const CropFlipPlan& plan) {
  Image out(x.channels, x.height, x.width);
  for (std::size_t y = 0; y < x.height; ++y) {
    const auto sy = plan.top + (2 * y + 1) * plan.crop_h / (2 * x.height);
    for (std::size_t xx = 0; xx < x.width; ++xx) {
      const auto sx = plan.left + (2 * xx + 1) * plan.crop_w / (2 * x.width);
      const std::size_t dst = plan.flip ? x.width - 1 - xx : xx;
      for (std::size_t c = 0; c < x.channels; ++c) out.at(c, y, dst) = x.at(c, sy, sx);
    }
  }
  return out;
}

Image standard_augment(const Image& x, std::uint64_t seed) {
  Rng rng(seed);
  return apply_crop_flip(x, sample_crop_flip_plan(rng, x));
}

Image horizontal_flip(const Image& x) {
  return apply_crop_flip(x, CropFlipPlan{0, 0, x.height, x.width, true});
}

Image pad_crop_flip(const Image& x, std::size_t pad, Rng& rng) {
  const auto dy = rng.uniform_int(-static_cast<std::int64_t>(pad), static_cast<std::int64_t>(pad));
  const auto dx = rng.uniform_int(-static_cast<std::int64_t>(pad), static_cast<std::int64_t>(pad));
  const bool flip = rng.bernoulli(0.5);
  Image out(x.channels, x.height, x.width);
  const auto h = static_cast<std::int64_t>(x.height), w = static_cast<std::int64_t>(x.width);
  for (std::int64_t y = 0; y < h; ++y) {
    const auto sy = static_cast<std::size_t>(std::clamp<std::int64_t>(y + dy, 0, h - 1));
    for (std::int64_t xx = 0; xx < w; ++xx) {
      const auto sx = static_cast<std::size_t>(std::clamp<std::int64_t>(xx + dx, 0, w - 1));
      const auto dst = static_cast<std::size_t>(flip ? w - 1 - xx : xx);
      for (std::size_t c = 0; c < x.channels; ++c) out.at(c, static_cast<std::size_t>(y), dst) = x.at(c, sy, sx);
    }
  }
  return out;
}

Image augment_one(const Image& x, const AugmentationPolicy& policy, std::uint64_t seed) {
  switch (policy.kind) {
    case PolicyKind::identity: return x;
    case PolicyKind::standard: return standard_augment(x, seed);
    case PolicyKind::augmix_lite: return augmix_lite(x, seed, policy);
  }
  return x;
}

std::vector<Image> sample_augmentations(const Image& x, std::size_t count,
                                        const AugmentationPolicy& policy, std::uint64_t seed) {
  if (count == 0) throw Error("sample_augmentations: B must be >= 1");
  policy.validate();
  std::vector<Image> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(augment_one(x, policy, hash_combine(seed, i)));
  return out;
}

}  // namespace ttr
