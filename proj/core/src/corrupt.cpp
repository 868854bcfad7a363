// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/corrupt.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <string>

#include "ttr/error.hpp"

namespace ttr {

namespace {

using Table = std::array<double, 5>;

// Monotone in severity; frozen after the pilot calibration on the synthetic set.
constexpr Table kGaussianSigma = {0.04, 0.08, 0.12, 0.18, 0.26};
constexpr Table kShotPhotons = {60, 25, 12, 5, 3};
constexpr Table kDefocusRadius = {1.0, 1.5, 2.0, 2.5, 3.0};
constexpr Table kContrastFactor = {0.4, 0.3, 0.2, 0.1, 0.05};
constexpr Table kBrightnessOffset = {0.1, 0.2, 0.3, 0.4, 0.5};
constexpr Table kPixelateFactor = {0.6, 0.5, 0.4, 0.3, 0.25};

Image defocus(const Image& x, double radius) {
  if (radius <= 0.0) return x;
  const int r = static_cast<int>(std::ceil(radius));
  std::vector<std::pair<int, int>> taps;
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx * dx + dy * dy <= radius * radius) taps.emplace_back(dy, dx);
    }
  }
  const double w = 1.0 / static_cast<double>(taps.size());
  Image out(x.channels, x.height, x.width);
  const int h = static_cast<int>(x.height), wd = static_cast<int>(x.width);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < wd; ++xx) {
        double acc = 0.0;
        for (auto [dy, dx] : taps) {
          const int sy = std::clamp(y + dy, 0, h - 1);
          const int sx = std::clamp(xx + dx, 0, wd - 1);
          acc += x.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
        }
        out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(xx)) = static_cast<float>(acc * w);
      }
    }
  }
  return out;
}

// Box-average down to factor * size, then nearest-neighbour back up.
Image pixelate(const Image& x, double factor) {
  if (factor >= 1.0) return x;
  const std::size_t sh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(x.height * factor)));
  const std::size_t sw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(x.width * factor)));
  Image small(x.channels, sh, sw);
  for (std::size_t c = 0; c < x.channels; ++c) {
    for (std::size_t y = 0; y < sh; ++y) {
      const std::size_t y0 = y * x.height / sh, y1 = std::max(y0 + 1, (y + 1) * x.height / sh);
      for (std::size_t xx = 0; xx < sw; ++xx) {
        const std::size_t x0 = xx * x.width / sw, x1 = std::max(x0 + 1, (xx + 1) * x.width / sw);
        double acc = 0.0;
        for (std::size_t a = y0; a < y1; ++a)
          for (std::size_t b = x0; b < x1; ++b) acc += x.at(c, a, b);
        small.at(c, y, xx) = static_cast<float>(acc / static_cast<double>((y1 - y0) * (x1 - x0)));
      }
    }
  }
  Image out(x.channels, x.height, x.width);
  for (std::size_t c = 0; c < x.channels; ++c)
    for (std::size_t y = 0; y < x.height; ++y)
      for (std::size_t xx = 0; xx < x.width; ++xx)
        out.at(c, y, xx) = small.at(c, y * sh / x.height, xx * sw / x.width);
  return out;
}

}  // namespace

std::string_view to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::gaussian_noise: return "gaussian_noise";
    case CorruptionKind::shot_noise: return "shot_noise";
    case CorruptionKind::defocus_blur_approx: return "defocus_blur_approx";
    case CorruptionKind::contrast: return "contrast";
    case CorruptionKind::brightness: return "brightness";
    case CorruptionKind::pixelate: return "pixelate";
  }
  return "unknown";
}

std::optional<CorruptionKind> parse_corruption_kind(std::string_view name) {
  for (auto k : all_corruption_kinds()) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

const std::vector<CorruptionKind>& all_corruption_kinds() {
  static const std::vector<CorruptionKind> kinds = {
      CorruptionKind::gaussian_noise, CorruptionKind::shot_noise, CorruptionKind::defocus_blur_approx,
      CorruptionKind::contrast,       CorruptionKind::brightness, CorruptionKind::pixelate};
  return kinds;
}

double severity_parameter(CorruptionKind kind, int severity) {
  if (severity < 1 || severity > 5) {
    throw ConfigError("corruption severity " + std::to_string(severity) + " outside 1..5");
  }
  const auto s = static_cast<std::size_t>(severity - 1);
  switch (kind) {
    case CorruptionKind::gaussian_noise: return kGaussianSigma[s];
    case CorruptionKind::shot_noise: return kShotPhotons[s];
    case CorruptionKind::defocus_blur_approx: return kDefocusRadius[s];
    case CorruptionKind::contrast: return kContrastFactor[s];
    case CorruptionKind::brightness: return kBrightnessOffset[s];
    case CorruptionKind::pixelate: return kPixelateFactor[s];
  }
  throw ConfigError("unknown corruption kind");
}

Image corrupt_image(const Image& x, CorruptionKind kind, double param, Rng& rng) {
  Image out = x;
  switch (kind) {
    case CorruptionKind::gaussian_noise:
      if (param == 0.0) return x;
      for (auto& v : out.pixels) v = static_cast<float>(v + param * rng.normal());
      break;
    case CorruptionKind::shot_noise: {
      if (!std::isfinite(param)) return x;
      for (auto& v : out.pixels) {
        std::poisson_distribution<long> pois(std::max(0.0, static_cast<double>(v) * param));
        v = static_cast<float>(static_cast<double>(pois(rng)) / param);
      }
      break;
    }
    case CorruptionKind::defocus_blur_approx: out = defocus(x, param); break;
    case CorruptionKind::contrast:
      if (param == 1.0) return x;
      for (std::size_t c = 0; c < x.channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.plane(); ++i) mean += x.pixels[c * x.plane() + i];
        mean /= static_cast<double>(x.plane());
        for (std::size_t i = 0; i < x.plane(); ++i) {
          float& v = out.pixels[c * x.plane() + i];
          v = static_cast<float>((v - mean) * param + mean);
        }
      }
      break;
    case CorruptionKind::brightness:
      for (auto& v : out.pixels) v = static_cast<float>(v + param);
      break;
    case CorruptionKind::pixelate: out = pixelate(x, param); break;
  }
  out.clamp01();
  return out;
}

Dataset corrupt(const Dataset& data, const CorruptionSpec& spec) {
  const double param = severity_parameter(spec.kind, spec.severity);
  Dataset out;
  out.num_classes = data.num_classes;
  out.labels = data.labels;
  out.split = SplitTag{SplitKind::test_shifted, std::string(to_string(spec.kind)), spec.severity};
  out.name = data.name;
  out.provenance = data.provenance + "; corrupt " + std::string(to_string(spec.kind)) + " severity " +
                   std::to_string(spec.severity) + " seed " + std::to_string(spec.seed);
  out.images.reserve(data.size());
  const Rng root(spec.seed);
  for (std::size_t i = 0; i < data.size(); ++i) {
    Rng rng = root.split(i);
    out.images.push_back(corrupt_image(data.images[i], spec.kind, param, rng));
  }
  return out;
}

}  // namespace ttr
