// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/model.hpp"

#include <cmath>
#include <sstream>

#include "ttr/error.hpp"
#include "ttr/ops.hpp"
#include "ttr/rng.hpp"

namespace ttr {

template <class T>
std::vector<T> mix_moments(const std::vector<T>& train, const std::vector<T>& test, double prior) {
  if (train.size() != test.size()) {
    throw ShapeError("mix_moments: " + std::to_string(train.size()) + " training channels vs " +
                     std::to_string(test.size()) + " test channels");
  }
  if (std::isinf(prior)) return train;
  if (!(prior >= 0.0)) throw Error("mix_moments: prior strength must be >= 0 or inf");
  const double w_train = prior / (prior + 1.0);
  const double w_test = 1.0 / (prior + 1.0);
  std::vector<T> out(train.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<T>(w_train * static_cast<double>(train[i]) +
                            w_test * static_cast<double>(test[i]));
  }
  return out;
}

namespace {

template <class T>
Tensor<T> deep(const Tensor<T>& t) {
  return t.clone();
}

template <class T>
Layer<T> deep_copy(const Layer<T>& layer) {
  return std::visit(
      [](const auto& l) -> Layer<T> {
        using L = std::decay_t<decltype(l)>;
        L copy = l;
        if constexpr (std::is_same_v<L, Conv2dLayer<T>> || std::is_same_v<L, LinearLayer<T>>) {
          copy.weight = deep(l.weight);
          copy.bias = deep(l.bias);
        } else if constexpr (std::is_same_v<L, BatchNormLayer<T>>) {
          copy.gamma = deep(l.gamma);
          copy.beta = deep(l.beta);
        }
        return copy;
      },
      layer);
}

template <class U, class T>
Tensor<U> convert(const Tensor<T>& t) {
  return cast<U>(t, t.requires_grad());
}

template <class U, class T>
std::vector<U> convert(const std::vector<T>& v) {
  return std::vector<U>(v.begin(), v.end());
}

}  // namespace

template <class T>
Model<T>::Model(std::vector<Layer<T>> layers, std::size_t num_classes, Shape input_shape)
    : layers_(std::move(layers)), num_classes_(num_classes), input_shape_(std::move(input_shape)) {
  if (input_shape_.size() != 3) {
    throw ShapeError("model input shape must be (C, H, W), got " + to_string(input_shape_));
  }
  if (num_classes_ == 0) throw Error("model needs at least one class");
}

template <class T>
Model<T>::Model(const Model& other)
    : num_classes_(other.num_classes_), input_shape_(other.input_shape_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(deep_copy(l));
}

template <class T>
Model<T>& Model<T>::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <class T>
void Model<T>::check_input(const Tensor<T>& batch) const {
  if (batch.rank() != 4 || batch.dim(0) == 0 || batch.dim(1) != input_shape_[0] ||
      batch.dim(2) != input_shape_[1] || batch.dim(3) != input_shape_[2]) {
    throw ShapeError("model input " + to_string(batch.shape()) + " does not match [N >= 1] + " +
                     to_string(input_shape_));
  }
}

template <class T>
Tensor<T> Model<T>::forward(const Tensor<T>& batch, const BnContext<T>& ctx) const {
  check_input(batch);
  if (ctx.mode == BnMode::train) {
    throw Error("Model::forward: train mode updates running statistics; use forward_train");
  }
  if (ctx.mode == BnMode::mixed) {
    if (!ctx.stats || ctx.stats->size() != batch_norm_layers()) {
      throw ShapeError("mixed statistics cover " +
                       std::to_string(ctx.stats ? ctx.stats->size() : 0) +
                       " batch-norm layers, model has " + std::to_string(batch_norm_layers()));
    }
  }
  if (ctx.mode == BnMode::collect) {
    if (!ctx.collected) throw Error("collect mode needs an output statistics buffer");
    ctx.collected->clear();
  }

  const T eps = static_cast<T>(BatchNormLayer<T>::kEpsilon);
  Tensor<T> x = batch;
  std::size_t bn_index = 0;
  for (const auto& layer : layers_) {
    x = std::visit(
        [&](const auto& l) -> Tensor<T> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2dLayer<T>>) {
            return conv2d(x, l.weight, &l.bias, l.padding);
          } else if constexpr (std::is_same_v<L, LinearLayer<T>>) {
            return add(matmul(x, l.weight), l.bias);
          } else if constexpr (std::is_same_v<L, BatchNormLayer<T>>) {
            const std::size_t index = bn_index++;
            switch (ctx.mode) {
              case BnMode::eval:
                return batch_norm_fixed_stats<T>(x, l.gamma, l.beta, l.running_mean, l.running_var,
                                                 eps);
              case BnMode::batch:
                return batch_norm_batch_stats<T>(x, l.gamma, l.beta, eps, nullptr, nullptr);
              case BnMode::mixed: {
                const auto& s = (*ctx.stats)[index];
                if (s.mean.size() != l.channels || s.var.size() != l.channels) {
                  throw ShapeError("mixed statistics for batch-norm layer " +
                                   std::to_string(index) + " have " +
                                   std::to_string(s.mean.size()) + " channels, layer has " +
                                   std::to_string(l.channels));
                }
                return batch_norm_fixed_stats<T>(x, l.gamma, l.beta, s.mean, s.var, eps);
              }
              case BnMode::collect: {
                ChannelStats<T> test;
                channel_moments<T>(x.values(), x.shape(), test.mean, test.var);
                ChannelStats<T> mixed{mix_moments(l.running_mean, test.mean, ctx.prior_strength),
                                      mix_moments(l.running_var, test.var, ctx.prior_strength)};
                ctx.collected->push_back(std::move(mixed));
                const auto& s = ctx.collected->back();
                return batch_norm_fixed_stats<T>(x, l.gamma, l.beta, s.mean, s.var, eps);
              }
              case BnMode::train: break;
            }
            throw Error("unreachable batch-norm mode");
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            return relu(x);
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            return max_pool2d(x, l.window);
          } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
            return avg_pool2d(x, l.window);
          } else {
            return flatten(x);
          }
        },
        layer);
  }
  if (x.rank() != 2 || x.dim(1) != num_classes_) {
    throw ShapeError("model output " + to_string(x.shape()) + " is not [N, " +
                     std::to_string(num_classes_) + "]");
  }
  return x;
}

template <class T>
Tensor<T> Model<T>::forward_train(const Tensor<T>& batch) {
  check_input(batch);
  const T eps = static_cast<T>(BatchNormLayer<T>::kEpsilon);
  const double momentum = BatchNormLayer<T>::kMomentum;
  Tensor<T> x = batch;
  for (auto& layer : layers_) {
    x = std::visit(
        [&](auto& l) -> Tensor<T> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2dLayer<T>>) {
            return conv2d(x, l.weight, &l.bias, l.padding);
          } else if constexpr (std::is_same_v<L, LinearLayer<T>>) {
            return add(matmul(x, l.weight), l.bias);
          } else if constexpr (std::is_same_v<L, BatchNormLayer<T>>) {
            std::vector<T> mu, var;
            auto y = batch_norm_batch_stats<T>(x, l.gamma, l.beta, eps, &mu, &var);
            const double count = static_cast<double>(x.numel() / l.channels);
            const double unbias = count > 1.0 ? count / (count - 1.0) : 1.0;
            for (std::size_t c = 0; c < l.channels; ++c) {
              l.running_mean[c] = static_cast<T>((1.0 - momentum) * l.running_mean[c] +
                                                 momentum * mu[c]);
              l.running_var[c] = static_cast<T>((1.0 - momentum) * l.running_var[c] +
                                                momentum * unbias * var[c]);
            }
            return y;
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            return relu(x);
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            return max_pool2d(x, l.window);
          } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
            return avg_pool2d(x, l.window);
          } else {
            return flatten(x);
          }
        },
        layer);
  }
  return x;
}

template <class T>
std::vector<Tensor<T>> Model<T>::parameters(ParamFilter filter) const {
  std::vector<Tensor<T>> out;
  for (const auto& layer : layers_) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2dLayer<T>> || std::is_same_v<L, LinearLayer<T>>) {
            if (filter == ParamFilter::all) {
              out.push_back(l.weight);
              out.push_back(l.bias);
            }
          } else if constexpr (std::is_same_v<L, BatchNormLayer<T>>) {
            out.push_back(l.gamma);
            out.push_back(l.beta);
          }
        },
        layer);
  }
  return out;
}

template <class T>
void Model<T>::zero_grad() {
  for (auto& p : parameters()) p.zero_grad();
}

template <class T>
std::size_t Model<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.numel();
  return n;
}

template <class T>
BnStatistics<T> Model<T>::running_statistics() const {
  BnStatistics<T> out;
  for (const auto& layer : layers_) {
    if (const auto* bn = std::get_if<BatchNormLayer<T>>(&layer)) {
      out.push_back({bn->running_mean, bn->running_var});
    }
  }
  return out;
}

template <class T>
std::size_t Model<T>::batch_norm_layers() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += std::holds_alternative<BatchNormLayer<T>>(layer);
  return n;
}

template <class T>
std::string Model<T>::descriptor() const {
  std::ostringstream out;
  out << "classes " << num_classes_ << "\n";
  out << "input " << input_shape_[0] << " " << input_shape_[1] << " " << input_shape_[2] << "\n";
  for (const auto& layer : layers_) {
    std::visit(
        [&](const auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2dLayer<T>>) {
            out << "conv " << l.in_channels << " " << l.out_channels << " " << l.kernel << " "
                << l.padding << "\n";
          } else if constexpr (std::is_same_v<L, LinearLayer<T>>) {
            out << "linear " << l.in_features << " " << l.out_features << "\n";
          } else if constexpr (std::is_same_v<L, BatchNormLayer<T>>) {
            out << "batchnorm " << l.channels << "\n";
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            out << "relu\n";
          } else if constexpr (std::is_same_v<L, MaxPoolLayer>) {
            out << "maxpool " << l.window << "\n";
          } else if constexpr (std::is_same_v<L, AvgPoolLayer>) {
            out << "avgpool " << l.window << "\n";
          } else {
            out << "flatten\n";
          }
        },
        layer);
  }
  return out.str();
}

template <class T>
template <class U>
Model<U> Model<T>::cast() const {
  std::vector<Layer<U>> layers;
  for (const auto& layer : layers_) {
    layers.push_back(std::visit(
        [](const auto& l) -> Layer<U> {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2dLayer<T>>) {
            return Conv2dLayer<U>{l.in_channels, l.out_channels, l.kernel, l.padding,
                                  convert<U>(l.weight), convert<U>(l.bias)};
          } else if constexpr (std::is_same_v<L, LinearLayer<T>>) {
            return LinearLayer<U>{l.in_features, l.out_features, convert<U>(l.weight),
                                  convert<U>(l.bias)};
          } else if constexpr (std::is_same_v<L, BatchNormLayer<T>>) {
            return BatchNormLayer<U>{l.channels, convert<U>(l.gamma), convert<U>(l.beta),
                                     convert<U>(l.running_mean), convert<U>(l.running_var)};
          } else {
            return l;
          }
        },
        layer));
  }
  return Model<U>(std::move(layers), num_classes_, input_shape_);
}

namespace {

Tensor<float> fan_in_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  std::vector<float> v(numel(shape));
  for (auto& x : v) x = static_cast<float>(stddev * rng.normal());
  return Tensor<float>(std::move(shape), std::move(v), true);
}

Conv2dLayer<float> conv(std::size_t in, std::size_t out, Rng& rng) {
  return {in, out, 3, 1, fan_in_normal({out, in, 3, 3}, in * 9, rng),
          Tensor<float>::zeros({out}, true)};
}

LinearLayer<float> linear(std::size_t in, std::size_t out, Rng& rng) {
  return {in, out, fan_in_normal({in, out}, in, rng), Tensor<float>::zeros({out}, true)};
}

BatchNormLayer<float> batchnorm(std::size_t c) {
  return {c, Tensor<float>::full({c}, 1.0f, true), Tensor<float>::zeros({c}, true),
          std::vector<float>(c, 0.0f), std::vector<float>(c, 1.0f)};
}

}  // namespace

Model<float> make_conv_small(Shape input_shape, std::size_t num_classes,
                             std::vector<std::size_t> widths, std::uint64_t seed) {
  if (input_shape.size() != 3 || input_shape[1] % 8 != 0 || input_shape[2] % 8 != 0 ||
      input_shape[1] == 0 || input_shape[2] == 0) {
    throw ShapeError("ConvSmall needs (C, H, W) with H and W divisible by 8, got " +
                     to_string(input_shape));
  }
  if (widths.size() != 3) throw Error("ConvSmall needs exactly three block widths");
  Rng rng(seed);
  std::vector<Layer<float>> layers;
  std::size_t channels = input_shape[0];
  for (std::size_t w : widths) {
    layers.push_back(conv(channels, w, rng));
    layers.push_back(batchnorm(w));
    layers.push_back(ReluLayer{});
    layers.push_back(MaxPoolLayer{2});
    channels = w;
  }
  layers.push_back(FlattenLayer{});
  const std::size_t features = channels * (input_shape[1] / 8) * (input_shape[2] / 8);
  layers.push_back(linear(features, num_classes, rng));
  return Model<float>(std::move(layers), num_classes, std::move(input_shape));
}

Model<float> make_mlp_bn(Shape input_shape, std::size_t num_classes,
                         std::vector<std::size_t> hidden, std::uint64_t seed) {
  if (input_shape.size() != 3) throw ShapeError("MLP-BN needs (C, H, W) input shape");
  Rng rng(seed);
  std::vector<Layer<float>> layers{FlattenLayer{}};
  std::size_t features = numel(input_shape);
  for (std::size_t h : hidden) {
    layers.push_back(linear(features, h, rng));
    layers.push_back(batchnorm(h));
    layers.push_back(ReluLayer{});
    features = h;
  }
  layers.push_back(linear(features, num_classes, rng));
  return Model<float>(std::move(layers), num_classes, std::move(input_shape));
}

Model<float> model_from_descriptor(const std::string& descriptor) {
  std::istringstream in(descriptor);
  std::string line;
  std::size_t classes = 0;
  Shape input;
  std::vector<Layer<float>> layers;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string kind;
    fields >> kind;
    auto need = [&](bool ok) {
      if (!ok || fields.fail()) throw CheckpointError(CheckpointError::Kind::architecture,
                                                      "malformed architecture line: " + line);
    };
    if (kind == "meta") {
      continue;
    } else if (kind == "classes") {
      fields >> classes;
      need(true);
    } else if (kind == "input") {
      input.assign(3, 0);
      fields >> input[0] >> input[1] >> input[2];
      need(true);
    } else if (kind == "conv") {
      std::size_t i = 0, o = 0, k = 0, p = 0;
      fields >> i >> o >> k >> p;
      need(k > 0);
      layers.push_back(Conv2dLayer<float>{i, o, k, p, Tensor<float>::zeros({o, i, k, k}, true),
                                          Tensor<float>::zeros({o}, true)});
    } else if (kind == "linear") {
      std::size_t i = 0, o = 0;
      fields >> i >> o;
      need(true);
      layers.push_back(LinearLayer<float>{i, o, Tensor<float>::zeros({i, o}, true),
                                          Tensor<float>::zeros({o}, true)});
    } else if (kind == "batchnorm") {
      std::size_t c = 0;
      fields >> c;
      need(true);
      layers.push_back(batchnorm(c));
    } else if (kind == "relu") {
      layers.push_back(ReluLayer{});
    } else if (kind == "maxpool" || kind == "avgpool") {
      std::size_t w = 0;
      fields >> w;
      need(w > 0);
      if (kind == "maxpool") {
        layers.push_back(MaxPoolLayer{w});
      } else {
        layers.push_back(AvgPoolLayer{w});
      }
    } else if (kind == "flatten") {
      layers.push_back(FlattenLayer{});
    } else {
      throw CheckpointError(CheckpointError::Kind::architecture, "unknown layer kind: " + kind);
    }
  }
  if (classes == 0 || input.size() != 3) {
    throw CheckpointError(CheckpointError::Kind::architecture,
                          "architecture descriptor lacks classes/input lines");
  }
  return Model<float>(std::move(layers), classes, std::move(input));
}

template std::vector<float> mix_moments(const std::vector<float>&, const std::vector<float>&,
                                        double);
template std::vector<double> mix_moments(const std::vector<double>&, const std::vector<double>&,
                                         double);
template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;

}  // namespace ttr
