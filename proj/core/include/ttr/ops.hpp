// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ttr/tensor.hpp"

namespace ttr {

// Binary elementwise ops broadcast when one operand's shape is a trailing
// suffix of the other's (a scalar is the empty suffix), so per-feature
// vectors combine with a leading batch dimension.
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <class T> Tensor<T> neg(const Tensor<T>& x);
template <class T> Tensor<T> scale(const Tensor<T>& x, T factor);
template <class T> Tensor<T> add_scalar(const Tensor<T>& x, T offset);
template <class T> Tensor<T> exp(const Tensor<T>& x);
/// Natural log; throws NumericError on any non-positive element.
template <class T> Tensor<T> log(const Tensor<T>& x);
/// log(max(x, eps)); gradient is zero where x <= eps.
template <class T> Tensor<T> log_clamped(const Tensor<T>& x, T eps);
/// x·log(x) where x > eps, exactly 0 elsewhere.
template <class T> Tensor<T> xlogx(const Tensor<T>& x, T eps);
template <class T> Tensor<T> relu(const Tensor<T>& x);

template <class T> Tensor<T> sum(const Tensor<T>& x);
template <class T> Tensor<T> mean(const Tensor<T>& x);
template <class T> Tensor<T> sum(const Tensor<T>& x, std::size_t axis);
template <class T> Tensor<T> mean(const Tensor<T>& x, std::size_t axis);
/// Max along an axis; the gradient goes to the first maximal element.
template <class T> Tensor<T> max(const Tensor<T>& x, std::size_t axis);
template <class T> Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b);

template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
/// [N, ...] -> [N, prod(...)]
template <class T> Tensor<T> flatten(const Tensor<T>& x);
/// out[i] = x[i, index[i]] for a 2-D x.
template <class T> Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> index);

/// Row-wise log-softmax of a 2-D tensor, computed as z - max(z) - log(sum(exp(z - max(z)))).
template <class T> Tensor<T> log_softmax(const Tensor<T>& x);
template <class T> Tensor<T> softmax(const Tensor<T>& x);

/// x: [N, C, H, W], weight: [O, C, K, K], bias: [O] or empty. Stride 1.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                 std::size_t padding);
/// Non-overlapping pooling with window and stride `k`.
template <class T> Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t k);
template <class T> Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t k);

/// Per-channel moments over every axis except 1 (population variance).
template <class T>
void channel_moments(std::span<const T> x, const Shape& shape, std::vector<T>& mean,
                     std::vector<T>& var);

/// Normalizes with the batch's own channel moments; gradients flow through
/// the moments. The moments are written to the optional out-params.
template <class T>
Tensor<T> batch_norm_batch_stats(const Tensor<T>& x, const Tensor<T>& gamma,
                                 const Tensor<T>& beta, T eps, std::vector<T>* batch_mean,
                                 std::vector<T>* batch_var);
/// Normalizes with constant statistics; an affine map per channel.
template <class T>
Tensor<T> batch_norm_fixed_stats(const Tensor<T>& x, const Tensor<T>& gamma,
                                 const Tensor<T>& beta, std::span<const T> mean,
                                 std::span<const T> var, T eps);

template <class T> Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <class T> Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <class T> Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <class T> Tensor<T> operator-(const Tensor<T>& x) { return neg(x); }

/// Converts values between widths; the result is a fresh leaf.
template <class To, class From>
Tensor<To> cast(const Tensor<From>& x, bool requires_grad) {
  std::vector<To> v(x.values().begin(), x.values().end());
  return Tensor<To>(x.shape(), std::move(v), requires_grad);
}

}  // namespace ttr
