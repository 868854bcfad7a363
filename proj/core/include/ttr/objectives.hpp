// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string_view>

#include "ttr/image.hpp"
#include "ttr/model.hpp"
#include "ttr/tensor.hpp"

namespace ttr {

/// Probabilities at or below this count as zero inside p log p, and every
/// log q of a probability is taken as log max(q, eps).
inline constexpr double kProbEpsilon = 1e-12;

enum class Objective { marginal_entropy, conditional_entropy, pairwise_cross_entropy };

std::string_view to_string(Objective objective);
std::optional<Objective> parse_objective(std::string_view name);

// Probability-level objectives over a [B, C] matrix of per-copy distributions.

/// Column mean: (1/B) sum_i p_i, shape [C].
template <class T>
Tensor<T> marginal_distribution(const Tensor<T>& probs);
/// H(pbar).
template <class T>
Tensor<T> marginal_entropy(const Tensor<T>& probs);
/// (1/B) sum_i H(p_i).
template <class T>
Tensor<T> conditional_entropy(const Tensor<T>& probs);
/// (1/(B(B-1))) sum_{i != j} H(p_i, p_j); needs B >= 2.
template <class T>
Tensor<T> pairwise_cross_entropy(const Tensor<T>& probs);
template <class T>
Tensor<T> objective_value(Objective objective, const Tensor<T>& probs);

// Model-level forms: softmax over the model's outputs on the augmented copies.

/// Row-wise softmax of the model outputs on `augmented`; throws Error when empty.
template <class T>
Tensor<T> copy_probabilities(const Model<T>& model, std::span<const Image> augmented,
                             const BnContext<T>& ctx);
template <class T>
Tensor<T> marginal_distribution(const Model<T>& model, std::span<const Image> augmented,
                                const BnContext<T>& ctx);
/// Differentiable in every model parameter. A non-finite value throws
/// NumericError listing the marginal distribution.
template <class T>
Tensor<T> objective_loss(Objective objective, const Model<T>& model,
                         std::span<const Image> augmented, const BnContext<T>& ctx);

/// Same check applied to an already-computed loss.
template <class T>
void require_finite_loss(const Tensor<T>& loss, const Tensor<T>& probs, Objective objective);

}  // namespace ttr
