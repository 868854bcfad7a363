// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/optim.hpp"

#include <cmath>

namespace ttr {

std::string_view to_string(UpdateKind kind) {
  switch (kind) {
    case UpdateKind::sgd: return "sgd";
    case UpdateKind::sgd_momentum: return "sgd_momentum";
    case UpdateKind::adaptive_moments: return "adaptive_moments";
  }
  return "unknown";
}

std::optional<UpdateKind> parse_update_kind(std::string_view name) {
  if (name == "sgd") return UpdateKind::sgd;
  if (name == "sgd_momentum") return UpdateKind::sgd_momentum;
  if (name == "adaptive_moments" || name == "adamw") return UpdateKind::adaptive_moments;
  return std::nullopt;
}

template <class T>
Optimizer<T>::Optimizer(UpdateRule rule, std::vector<Tensor<T>> params)
    : rule_(rule), params_(std::move(params)) {
  first_.resize(params_.size());
  second_.resize(params_.size());
}

template <class T>
bool Optimizer<T>::step(double lr) {
  for (const auto& p : params_) {
    for (T g : p.grad()) {
      if (!std::isfinite(static_cast<double>(g))) return false;
    }
  }
  ++steps_;
  const double decay = 1.0 - lr * rule_.weight_decay;
  const double t = static_cast<double>(steps_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    auto values = p.mutable_values();
    const auto grad = p.grad();
    auto g = [&](std::size_t j) { return grad.empty() ? 0.0 : static_cast<double>(grad[j]); };
    switch (rule_.kind) {
      case UpdateKind::sgd:
        for (std::size_t j = 0; j < values.size(); ++j) {
          values[j] = static_cast<T>(decay * values[j] - lr * g(j));
        }
        break;
      case UpdateKind::sgd_momentum: {
        auto& v = first_[i];
        if (v.empty()) v.assign(values.size(), 0.0);
        for (std::size_t j = 0; j < values.size(); ++j) {
          v[j] = rule_.momentum * v[j] + g(j);
          values[j] = static_cast<T>(decay * values[j] - lr * v[j]);
        }
        break;
      }
      case UpdateKind::adaptive_moments: {
        auto& m = first_[i];
        auto& s = second_[i];
        if (m.empty()) {
          m.assign(values.size(), 0.0);
          s.assign(values.size(), 0.0);
        }
        const double c1 = 1.0 - std::pow(rule_.beta1, t);
        const double c2 = 1.0 - std::pow(rule_.beta2, t);
        for (std::size_t j = 0; j < values.size(); ++j) {
          m[j] = rule_.beta1 * m[j] + (1.0 - rule_.beta1) * g(j);
          s[j] = rule_.beta2 * s[j] + (1.0 - rule_.beta2) * g(j) * g(j);
          const double step = (m[j] / c1) / (std::sqrt(s[j] / c2) + rule_.epsilon);
          values[j] = static_cast<T>(decay * values[j] - lr * step);
        }
        break;
      }
    }
  }
  return true;
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace ttr
