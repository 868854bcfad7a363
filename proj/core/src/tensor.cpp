// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <unordered_set>

#include "ttr/error.hpp"

namespace ttr {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

template <class T>
Tensor<T>::Tensor() : Tensor(Shape{}, std::vector<T>{T(0)}) {}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : node_(std::make_shared<detail::Node<T>>()) {
  if (ttr::numel(shape) != values.size()) {
    throw ShapeError("tensor shape " + to_string(shape) + " holds " +
                     std::to_string(ttr::numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = ttr::numel(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<T>{value}, requires_grad);
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <class T>
void Tensor<T>::zero_grad() {
  node_->grad.clear();
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->value, false);
}

template <class T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out(node_->shape, node_->value, node_->requires_grad);
  out.node_->grad = node_->grad;
  return out;
}

template <class T>
void Tensor<T>::backward() {
  using NodePtr = detail::Node<T>*;
  if (numel() != 1) {
    throw GraphError("backward() needs a scalar loss, got shape " + to_string(shape()));
  }
  if (!node_->requires_grad) {
    throw GraphError("backward() on a tensor that does not require grad");
  }
  if (node_->consumed) {
    throw GraphError("backward() already ran on this graph; rebuild the forward pass");
  }

  // Iterative post-order DFS gives a topological order (inputs before users).
  // The order owns its nodes so that releasing parents below frees nothing early.
  std::vector<std::shared_ptr<detail::Node<T>>> order;
  std::unordered_set<NodePtr> seen;
  std::vector<std::pair<std::shared_ptr<detail::Node<T>>, std::size_t>> stack{{node_, 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      std::shared_ptr<detail::Node<T>> parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) {
        if (parent->consumed) {
          throw GraphError("backward() reached a graph already consumed by a previous sweep");
        }
        stack.emplace_back(std::move(parent), 0);
      }
    } else {
      order.push_back(std::move(node));
      stack.pop_back();
    }
  }

  node_->grad.assign(1, T(1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* node = it->get();
    if (node->is_leaf()) continue;
    node->ensure_grad();
    node->backward_fn(*node);
    // Interior buffers are released; the graph cannot be swept again.
    node->grad.clear();
    node->grad.shrink_to_fit();
    node->backward_fn = nullptr;
    node->parents.clear();
    node->consumed = true;
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace ttr
