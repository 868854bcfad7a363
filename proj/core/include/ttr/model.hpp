// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "ttr/tensor.hpp"

namespace ttr {

/// How batch-norm layers pick their normalization statistics.
enum class BnMode {
  eval,     // running statistics from training
  train,    // batch statistics, running statistics updated (forward_train only)
  batch,    // batch statistics with gradient through them, no running update
  mixed,    // caller-supplied constant statistics
  collect,  // per layer: mix batch moments with running ones, record, normalize with the mix
};

template <class T>
struct ChannelStats {
  std::vector<T> mean;
  std::vector<T> var;
};

/// One entry per batch-norm layer, in declaration order.
template <class T>
using BnStatistics = std::vector<ChannelStats<T>>;

template <class T>
struct BnContext {
  BnMode mode = BnMode::eval;
  const BnStatistics<T>* stats = nullptr;  // mixed
  double prior_strength = std::numeric_limits<double>::infinity();  // collect
  BnStatistics<T>* collected = nullptr;                              // collect

  static BnContext eval() { return {}; }
  static BnContext batch() { return {BnMode::batch}; }
  static BnContext mixed(const BnStatistics<T>& s) { return {BnMode::mixed, &s}; }
  static BnContext collect(double prior, BnStatistics<T>& out) {
    return {BnMode::collect, nullptr, prior, &out};
  }
};

/// nu = N/(N+1) * train + 1/(N+1) * test, evaluated in double precision.
/// N = inf returns `train`; N = 0 returns `test`.
template <class T>
std::vector<T> mix_moments(const std::vector<T>& train, const std::vector<T>& test, double prior);

template <class T>
struct Conv2dLayer {
  std::size_t in_channels = 0, out_channels = 0, kernel = 3, padding = 1;
  Tensor<T> weight;  // [out, in, k, k]
  Tensor<T> bias;    // [out]
};

template <class T>
struct LinearLayer {
  std::size_t in_features = 0, out_features = 0;
  Tensor<T> weight;  // [in, out]
  Tensor<T> bias;    // [out]
};

template <class T>
struct BatchNormLayer {
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;
  std::size_t channels = 0;
  Tensor<T> gamma;
  Tensor<T> beta;
  std::vector<T> running_mean;
  std::vector<T> running_var;
};

struct ReluLayer {};
struct MaxPoolLayer {
  std::size_t window = 2;
};
struct AvgPoolLayer {
  std::size_t window = 2;
};
struct FlattenLayer {};

template <class T>
using Layer = std::variant<Conv2dLayer<T>, LinearLayer<T>, BatchNormLayer<T>, ReluLayer,
                           MaxPoolLayer, AvgPoolLayer, FlattenLayer>;

enum class ParamFilter { all, norm_affine_only };

/// Feed-forward classifier over images of shape `input_shape` = (C, H, W),
/// producing [batch, num_classes] logits. Copies are deep.
template <class T>
class Model {
 public:
  Model(std::vector<Layer<T>> layers, std::size_t num_classes, Shape input_shape);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  /// Any mode but BnMode::train. Builds a graph unless grad mode is off.
  Tensor<T> forward(const Tensor<T>& batch, const BnContext<T>& ctx) const;
  /// Batch statistics with running-statistic updates.
  Tensor<T> forward_train(const Tensor<T>& batch);

  std::vector<Tensor<T>> parameters(ParamFilter filter = ParamFilter::all) const;
  void zero_grad();
  std::size_t parameter_count() const;

  BnStatistics<T> running_statistics() const;
  std::size_t batch_norm_layers() const;

  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::vector<Layer<T>>& layers() { return layers_; }
  std::size_t num_classes() const { return num_classes_; }
  const Shape& input_shape() const { return input_shape_; }

  /// Architecture text: one layer per line, enough to rebuild the layout.
  std::string descriptor() const;

  template <class U>
  Model<U> cast() const;

 private:
  void check_input(const Tensor<T>& batch) const;

  std::vector<Layer<T>> layers_;
  std::size_t num_classes_;
  Shape input_shape_;
};

/// Three conv(3x3) -> BN -> ReLU -> 2x2 max-pool blocks and a linear head.
/// Height and width must be divisible by 8.
Model<float> make_conv_small(Shape input_shape, std::size_t num_classes,
                             std::vector<std::size_t> widths, std::uint64_t seed);
/// Flatten, then per hidden width: affine -> BN -> ReLU; then a linear head.
Model<float> make_mlp_bn(Shape input_shape, std::size_t num_classes,
                         std::vector<std::size_t> hidden, std::uint64_t seed);
/// Rebuilds the layout from descriptor(); parameters are zero, BN at identity.
Model<float> model_from_descriptor(const std::string& descriptor);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace ttr
