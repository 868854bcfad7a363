// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "ttr/dataset.hpp"

namespace ttr {

struct SyntheticSpec {
  std::size_t num_classes = 4;  // [2, 10]; class k is shape type k
  std::size_t per_class = 100;
  std::size_t image_size = 32;  // >= 16
  std::size_t channels = 1;
  std::uint64_t seed = 0;
  double illumination = 0.12;  // peak amplitude of a smooth random shading field
  double sensor_noise = 0.05;  // per-image noise std drawn uniformly from [0, sensor_noise]
};

/// Anti-aliased parametric shapes (disk, square, triangle, plus, ring,
/// hollow square, double bar, half disk, star, crescent) with random
/// position, scale, rotation and foreground/background intensity, under a
/// smooth shading field and mild sensor noise. Item i has
/// label i % num_classes, so classes are balanced.
Dataset generate_synthetic(const SyntheticSpec& spec, SplitKind split = SplitKind::train);

}  // namespace ttr
