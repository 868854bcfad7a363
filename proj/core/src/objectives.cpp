// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/objectives.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "ttr/error.hpp"
#include "ttr/ops.hpp"

namespace ttr {

namespace {

template <class T>
void check_probs(const Tensor<T>& probs, const char* what) {
  if (probs.rank() != 2 || probs.dim(0) == 0 || probs.dim(1) == 0) {
    throw ShapeError(std::string(what) + ": expected a non-empty [B, C] matrix, got " +
                     to_string(probs.shape()));
  }
}

template <class T>
T eps() {
  return static_cast<T>(kProbEpsilon);
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::marginal_entropy: return "marginal_entropy";
    case Objective::conditional_entropy: return "conditional_entropy";
    case Objective::pairwise_cross_entropy: return "pairwise_cross_entropy";
  }
  return "unknown";
}

std::optional<Objective> parse_objective(std::string_view name) {
  for (auto o : {Objective::marginal_entropy, Objective::conditional_entropy,
                 Objective::pairwise_cross_entropy}) {
    if (to_string(o) == name) return o;
  }
  return std::nullopt;
}

template <class T>
Tensor<T> marginal_distribution(const Tensor<T>& probs) {
  check_probs(probs, "marginal_distribution");
  return mean(probs, 0);
}

template <class T>
Tensor<T> marginal_entropy(const Tensor<T>& probs) {
  check_probs(probs, "marginal_entropy");
  return neg(sum(xlogx(mean(probs, 0), eps<T>())));
}

template <class T>
Tensor<T> conditional_entropy(const Tensor<T>& probs) {
  check_probs(probs, "conditional_entropy");
  return scale(sum(xlogx(probs, eps<T>())), T(-1) / static_cast<T>(probs.dim(0)));
}

template <class T>
Tensor<T> pairwise_cross_entropy(const Tensor<T>& probs) {
  check_probs(probs, "pairwise_cross_entropy");
  const std::size_t b = probs.dim(0);
  if (b < 2) throw Error("pairwise cross entropy needs at least 2 copies, got " + std::to_string(b));
  // sum_{i != j} sum_y p_i(y) log p_j(y) = <colsum P, colsum L> - sum(P * L).
  const Tensor<T> logs = log_clamped(probs, eps<T>());
  const Tensor<T> all_pairs = dot(sum(probs, 0), sum(logs, 0));
  const Tensor<T> diagonal = sum(mul(probs, logs));
  return scale(sub(all_pairs, diagonal), T(-1) / static_cast<T>(b * (b - 1)));
}

template <class T>
Tensor<T> objective_value(Objective objective, const Tensor<T>& probs) {
  switch (objective) {
    case Objective::marginal_entropy: return marginal_entropy(probs);
    case Objective::conditional_entropy: return conditional_entropy(probs);
    case Objective::pairwise_cross_entropy: return pairwise_cross_entropy(probs);
  }
  throw Error("unknown objective");
}

template <class T>
Tensor<T> copy_probabilities(const Model<T>& model, std::span<const Image> augmented,
                             const BnContext<T>& ctx) {
  if (augmented.empty()) throw Error("objective needs at least one augmented copy");
  return softmax(model.forward(to_batch<T>(augmented), ctx));
}

template <class T>
Tensor<T> marginal_distribution(const Model<T>& model, std::span<const Image> augmented,
                                const BnContext<T>& ctx) {
  return marginal_distribution(copy_probabilities(model, augmented, ctx));
}

template <class T>
void require_finite_loss(const Tensor<T>& loss, const Tensor<T>& probs, Objective objective) {
  if (std::isfinite(static_cast<double>(loss.item()))) return;
  std::ostringstream msg;
  msg << to_string(objective) << " is non-finite (" << loss.item() << "); marginal distribution = [";
  const std::size_t b = probs.dim(0), c = probs.dim(1);
  for (std::size_t y = 0; y < c; ++y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b; ++i) acc += probs.values()[i * c + y];
    msg << (y ? ", " : "") << acc / static_cast<double>(b);
  }
  msg << "]";
  throw NumericError(msg.str());
}

template <class T>
Tensor<T> objective_loss(Objective objective, const Model<T>& model,
                         std::span<const Image> augmented, const BnContext<T>& ctx) {
  const Tensor<T> probs = copy_probabilities(model, augmented, ctx);
  Tensor<T> loss = objective_value(objective, probs);
  require_finite_loss(loss, probs, objective);
  return loss;
}

#define TTR_INSTANTIATE_OBJECTIVES(T)                                                             \
  template Tensor<T> marginal_distribution(const Tensor<T>&);                                    \
  template Tensor<T> marginal_entropy(const Tensor<T>&);                                         \
  template Tensor<T> conditional_entropy(const Tensor<T>&);                                      \
  template Tensor<T> pairwise_cross_entropy(const Tensor<T>&);                                   \
  template Tensor<T> objective_value(Objective, const Tensor<T>&);                               \
  template Tensor<T> copy_probabilities(const Model<T>&, std::span<const Image>,                 \
                                        const BnContext<T>&);                                    \
  template Tensor<T> marginal_distribution(const Model<T>&, std::span<const Image>,              \
                                           const BnContext<T>&);                                 \
  template Tensor<T> objective_loss(Objective, const Model<T>&, std::span<const Image>,          \
                                    const BnContext<T>&);                                        \
  template void require_finite_loss(const Tensor<T>&, const Tensor<T>&, Objective);

TTR_INSTANTIATE_OBJECTIVES(float)
TTR_INSTANTIATE_OBJECTIVES(double)

}  // namespace ttr
