// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "ttr/tensor.hpp"

namespace ttr {

enum class UpdateKind { sgd, sgd_momentum, adaptive_moments };

std::string_view to_string(UpdateKind kind);
std::optional<UpdateKind> parse_update_kind(std::string_view name);

struct UpdateRule {
  UpdateKind kind = UpdateKind::sgd;
  double momentum = 0.9;  // sgd_momentum
  double beta1 = 0.9;     // adaptive_moments
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Decoupled: every rule first scales parameters by (1 - lr * weight_decay).
  double weight_decay = 0.0;
};

/// Gradient-based parameter updates with per-parameter state (velocity or
/// first/second moments). A fresh Optimizer is a fresh state.
template <class T>
class Optimizer {
 public:
  Optimizer(UpdateRule rule, std::vector<Tensor<T>> params);

  /// Applies one update from the parameters' accumulated gradients (a
  /// parameter with no gradient counts as zero). Returns false and leaves
  /// every parameter untouched when any gradient is non-finite.
  bool step(double lr);

  std::size_t steps_taken() const { return steps_; }
  const UpdateRule& rule() const { return rule_; }
  const std::vector<Tensor<T>>& params() const { return params_; }

 private:
  UpdateRule rule_;
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace ttr
