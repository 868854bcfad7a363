// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "ttr/error.hpp"
#include "ttr/rng.hpp"

namespace ttr {

namespace {

// Membership in the canonical shape, local coordinates roughly in [-1, 1].
bool inside(std::size_t shape, double u, double v) {
  const double r2 = u * u + v * v;
  switch (shape) {
    case 0: return r2 <= 1.0;
    case 1: return std::abs(u) <= 0.8 && std::abs(v) <= 0.8;
    case 2: {
      // Equilateral triangle with vertices at angles 90, 210 and 330 degrees.
      const double s3 = std::sqrt(3.0);
      return v >= -0.5 && (s3 * u + v) <= 1.0 && (-s3 * u + v) <= 1.0;
    }
    case 3:
      return (std::abs(u) <= 0.3 && std::abs(v) <= 1.0) ||
             (std::abs(v) <= 0.3 && std::abs(u) <= 1.0);
    case 4: return r2 <= 1.0 && r2 >= 0.55 * 0.55;
    case 5: {
      const double m = std::max(std::abs(u), std::abs(v));
      return m <= 0.9 && m >= 0.55;
    }
    case 6: return std::abs(u) <= 0.9 && (std::abs(v - 0.45) <= 0.2 || std::abs(v + 0.45) <= 0.2);
    case 7: return r2 <= 1.0 && v >= 0.0;
    case 8: {
      const double theta = std::atan2(v, u);
      const double spike = std::cos(5.0 * theta);
      const double radius = 0.55 + 0.45 * spike;
      return std::sqrt(r2) <= radius;
    }
    case 9: return r2 <= 1.0 && ((u - 0.45) * (u - 0.45) + v * v) > 0.75 * 0.75;
    default: return false;
  }
}

constexpr std::size_t kSupersample = 4;

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec, SplitKind split) {
  if (spec.num_classes < 2 || spec.num_classes > 10) {
    throw Error("synthetic data: num_classes must be in [2, 10], got " + std::to_string(spec.num_classes));
  }
  if (spec.image_size < 16) {
    throw Error("synthetic data: image_size must be >= 16, got " + std::to_string(spec.image_size));
  }
  if (spec.channels == 0) throw Error("synthetic data: channels must be >= 1");

  Dataset data;
  data.num_classes = spec.num_classes;
  data.split = SplitTag{split, "", 0};
  data.name = "synthetic";
  data.provenance = "synthetic shapes: classes=" + std::to_string(spec.num_classes) +
                    " per_class=" + std::to_string(spec.per_class) +
                    " size=" + std::to_string(spec.image_size) +
                    " channels=" + std::to_string(spec.channels) + " seed=" + std::to_string(spec.seed);
  const std::size_t total = spec.num_classes * spec.per_class;
  data.images.reserve(total);
  data.labels.reserve(total);
  const Rng root(spec.seed);
  const auto size = static_cast<double>(spec.image_size);

  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t label = i % spec.num_classes;
    Rng rng = root.split(i);
    const double radius = rng.uniform(0.24, 0.38) * size;
    const double margin = radius * 0.95;
    const double cx = rng.uniform(margin, size - margin);
    const double cy = rng.uniform(margin, size - margin);
    const double angle = rng.uniform(-30.0, 30.0) * std::numbers::pi / 180.0;
    std::vector<double> fg(spec.channels), bg(spec.channels);
    for (std::size_t c = 0; c < spec.channels; ++c) {
      do {
        fg[c] = rng.uniform();
        bg[c] = rng.uniform();
      } while (std::abs(fg[c] - bg[c]) < 0.35);
    }
    const double cs = std::cos(angle), sn = std::sin(angle);
    // Two plane waves with wavelengths between half and twice the image size.
    double wave[2][4];
    for (auto& w : wave) {
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double k = 2.0 * std::numbers::pi / (rng.uniform(0.5, 2.0) * size);
      w[0] = k * std::cos(theta);
      w[1] = k * std::sin(theta);
      w[2] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      w[3] = rng.uniform(-1.0, 1.0) * spec.illumination / 2.0;
    }
    const double noise_std = rng.uniform(0.0, spec.sensor_noise);

    Image image(spec.channels, spec.image_size, spec.image_size);
    for (std::size_t y = 0; y < spec.image_size; ++y) {
      for (std::size_t x = 0; x < spec.image_size; ++x) {
        std::size_t hits = 0;
        for (std::size_t sy = 0; sy < kSupersample; ++sy) {
          for (std::size_t sx = 0; sx < kSupersample; ++sx) {
            const double px = static_cast<double>(x) + (static_cast<double>(sx) + 0.5) / kSupersample - cx;
            const double py = static_cast<double>(y) + (static_cast<double>(sy) + 0.5) / kSupersample - cy;
            const double u = (cs * px + sn * py) / radius;
            const double v = (-sn * px + cs * py) / radius;
            hits += inside(label, u, -v);
          }
        }
        const double coverage = static_cast<double>(hits) / (kSupersample * kSupersample);
        double shade = 0.0;
        for (const auto& w : wave) {
          shade += w[3] * std::sin(w[0] * static_cast<double>(x) + w[1] * static_cast<double>(y) + w[2]);
        }
        for (std::size_t c = 0; c < spec.channels; ++c) {
          const double noise = noise_std > 0.0 ? noise_std * rng.normal() : 0.0;
          image.at(c, y, x) = static_cast<float>(bg[c] + coverage * (fg[c] - bg[c]) + shade + noise);
        }
      }
    }
    image.clamp01();
    data.images.push_back(std::move(image));
    data.labels.push_back(static_cast<int>(label));
  }
  return data;
}

}  // namespace ttr
