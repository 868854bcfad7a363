// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ttr/dataset.hpp"
#include "ttr/rng.hpp"

namespace ttr {

enum class CorruptionKind {
  gaussian_noise,
  shot_noise,
  defocus_blur_approx,
  contrast,
  brightness,
  pixelate,
};

std::string_view to_string(CorruptionKind kind);
std::optional<CorruptionKind> parse_corruption_kind(std::string_view name);
const std::vector<CorruptionKind>& all_corruption_kinds();

/// Severity table, severity in 1..5 (ConfigError otherwise). Units per kind:
/// noise std (gaussian), photon count (shot), disk radius in pixels (defocus),
/// contrast factor, additive brightness offset, downsampling factor (pixelate).
double severity_parameter(CorruptionKind kind, int severity);

/// Applies one corruption with an explicit parameter; output clamped to [0, 1].
/// A parameter that makes the corruption vanish (noise std 0, radius 0,
/// contrast 1, offset 0, pixelate 1) leaves x unchanged.
Image corrupt_image(const Image& x, CorruptionKind kind, double param, Rng& rng);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::gaussian_noise;
  int severity = 1;
  std::uint64_t seed = 0;
};

/// Corrupts every image; image i draws from Rng(seed).split(i). The result is
/// tagged test_shifted(kind, severity).
Dataset corrupt(const Dataset& data, const CorruptionSpec& spec);

}  // namespace ttr
