// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ttr/image.hpp"
#include "ttr/rng.hpp"

namespace ttr {

enum class AugOp {
  autocontrast,
  equalize,
  posterize,
  rotate,
  solarize,
  shear_x,
  shear_y,
  translate_x,
  translate_y,
  brightness,
  contrast,
  sharpness,
};

std::string_view to_string(AugOp op);
std::optional<AugOp> parse_aug_op(std::string_view name);

/// The mixing op set: geometric and tone ops that do not resemble the
/// noise, blur, pixelation, contrast or brightness corruptions.
const std::vector<AugOp>& default_aug_ops();
/// Every available op, including brightness, contrast and sharpness.
const std::vector<AugOp>& all_aug_ops();

enum class PolicyKind { augmix_lite, standard, identity };

std::string_view to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view name);

struct AugmentationPolicy {
  PolicyKind kind = PolicyKind::augmix_lite;
  std::vector<AugOp> ops = default_aug_ops();
  std::size_t chains = 3;
  std::size_t max_depth = 3;
  double alpha = 1.0;  // Dirichlet and Beta concentration
  int severity = 3;    // magnitude levels are drawn from [1, severity] out of 10

  /// Throws ConfigError on an unusable policy.
  void validate() const;
};

/// One concrete op application. `param` is the op's physical magnitude:
/// degrees (rotate), shear factor, pixels (translate), bits (posterize, clamped to [1, 8]),
/// threshold in [0, 1] (solarize) or enhancement factor; unused otherwise.
struct OpStep {
  AugOp op = AugOp::rotate;
  double param = 0.0;
};

/// Physical magnitude of `op` at integer `level` in [0, 10].
double op_magnitude(AugOp op, int level, std::size_t image_extent, bool negate);

/// Applies one op; the result is clamped to [0, 1]. Geometric ops sample the
/// source with nearest-neighbour lookup and clamp-to-edge borders.
Image apply_op(const Image& x, const OpStep& step);

/// Everything random about one mixed augmentation, drawn up front.
struct AugMixPlan {
  std::vector<std::vector<OpStep>> chains;
  std::vector<double> weights;  // convex weights over chains
  double skip = 0.0;            // weight kept on the original image
};

AugMixPlan sample_augmix_plan(Rng& rng, const AugmentationPolicy& policy, const Image& x);
/// skip * x + (1 - skip) * sum_i weights[i] * chain_i(x), clamped to [0, 1].
Image apply_augmix_plan(const Image& x, const AugMixPlan& plan);
Image augmix_lite(const Image& x, std::uint64_t seed, const AugmentationPolicy& policy);

struct CropFlipPlan {
  std::size_t top = 0, left = 0, crop_h = 0, crop_w = 0;
  bool flip = false;
};

/// Crop area fraction uniform in [0.5, 1], square aspect, flip with p = 0.5.
CropFlipPlan sample_crop_flip_plan(Rng& rng, const Image& x);
/// Crops, resizes back to the input size (nearest) and optionally mirrors.
Image apply_crop_flip(const Image& x, const CropFlipPlan& plan);
Image standard_augment(const Image& x, std::uint64_t seed);
Image horizontal_flip(const Image& x);

/// Training-time augmentation: edge-padded random crop plus random flip.
Image pad_crop_flip(const Image& x, std::size_t pad, Rng& rng);

/// One augmented copy under `policy`, fully determined by `seed`.
Image augment_one(const Image& x, const AugmentationPolicy& policy, std::uint64_t seed);

/// B copies; copy i is augment_one(x, policy, hash_combine(seed, i)), so the
/// draw for a smaller B is a prefix of the draw for a larger one.
std::vector<Image> sample_augmentations(const Image& x, std::size_t count,
                                        const AugmentationPolicy& policy, std::uint64_t seed);

}  // namespace ttr
