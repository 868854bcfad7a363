// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace ttr::detail {

template <class T>
using RowMajor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// C (m x n) (+)= op(A) * op(B), all row-major. op(A) is m x k, op(B) is k x n.
template <class T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  using Map = Eigen::Map<RowMajor<T>>;
  using ConstMap = Eigen::Map<const RowMajor<T>>;
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  Map out(c, M, N);
  ConstMap A(a, trans_a ? K : M, trans_a ? M : K);
  ConstMap B(b, trans_b ? N : K, trans_b ? K : N);
  if (!accumulate) out.setZero();
  if (!trans_a && !trans_b) {
    out.noalias() += A * B;
  } else if (trans_a && !trans_b) {
    out.noalias() += A.transpose() * B;
  } else if (!trans_a && trans_b) {
    out.noalias() += A * B.transpose();
  } else {
    out.noalias() += A.transpose() * B.transpose();
  }
}

}  // namespace ttr::detail
