// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ttr/error.hpp"
#include "ttr/rng.hpp"

namespace ttr {

namespace {

double relative_error(double analytic, double numeric) {
  if (std::isnan(analytic) || std::isnan(numeric)) return std::numeric_limits<double>::infinity();
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

double evaluate(const std::function<Tensor<double>()>& loss) {
  NoGradGuard guard;
  return loss().item();
}

}  // namespace

double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                  const Tensor<double>& point, double step) {
  Tensor<double> x = point.detach();
  x.set_requires_grad(true);
  return grad_check_parameters([&] { return f(x); }, {x}, step, x.numel(), 0);
}

double grad_check_parameters(const std::function<Tensor<double>()>& loss,
                             std::vector<Tensor<double>> params, double step,
                             std::size_t max_coords, std::uint64_t seed) {
  for (auto& p : params) p.zero_grad();
  Tensor<double> value = loss();
  if (value.numel() != 1) throw GraphError("grad_check: loss is not scalar");
  if (value.requires_grad()) value.backward();

  Rng rng(seed);
  double worst = 0.0;
  for (auto& p : params) {
    std::vector<std::size_t> coords(p.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > max_coords) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(max_coords);
    }
    const std::vector<double> analytic = p.has_grad()
                                             ? std::vector<double>(p.grad().begin(), p.grad().end())
                                             : std::vector<double>(p.numel(), 0.0);
    auto values = p.mutable_values();
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + step;
      const double up = evaluate(loss);
      values[i] = saved - step;
      const double down = evaluate(loss);
      values[i] = saved;
      worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * step)));
    }
  }
  return worst;
}

}  // namespace ttr
