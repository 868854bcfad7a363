// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ttr/tensor.hpp"

namespace ttr {

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
/// for a scalar function of one tensor. A NaN in either estimate yields +inf.
double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                  const Tensor<double>& point, double step);

/// Same error measure for a loss closed over a set of parameter tensors.
/// At most `max_coords` randomly chosen coordinates per tensor are probed
/// (all of them when a tensor is smaller).
double grad_check_parameters(const std::function<Tensor<double>()>& loss,
                             std::vector<Tensor<double>> params, double step,
                             std::size_t max_coords, std::uint64_t seed);

}  // namespace ttr
