// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "gemm.hpp"
#include "ttr/error.hpp"

namespace ttr {

namespace {

template <class T>
using Node = detail::Node<T>;

template <class T>
bool needs_graph(std::initializer_list<const Tensor<T>*> inputs) {
  if (!grad_mode_enabled()) return false;
  for (const auto* t : inputs) {
    if (t && t->requires_grad()) return true;
  }
  return false;
}

// Builds the result node; the backward closure is attached only when some
// input participates in differentiation.
template <class T, class Backward>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      std::initializer_list<const Tensor<T>*> inputs, Backward&& backward) {
  Tensor<T> out(std::move(shape), std::move(value));
  if (needs_graph<T>(inputs)) {
    auto node = out.node();
    node->requires_grad = true;
    for (const auto* t : inputs) {
      if (t) node->parents.push_back(t->node());
    }
    node->backward_fn = std::forward<Backward>(backward);
  }
  return out;
}

// Gradient buffer of parent `i`, or nullptr when it does not take gradients.
template <class T>
std::vector<T>* parent_grad(Node<T>& self, std::size_t i) {
  auto& p = self.parents[i];
  return p->requires_grad ? &p->ensure_grad() : nullptr;
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<long>(small.size()));
}

struct Broadcast {
  Shape out;
  std::size_t a_inner;  // a index = i % a_inner
  std::size_t b_inner;
};

Broadcast broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return {a, numel(a), numel(b)};
  if (is_suffix(b, a)) return {a, numel(a), numel(b)};
  if (is_suffix(a, b)) return {b, numel(a), numel(b)};
  throw ShapeError(std::string(op) + ": shape mismatch between " + to_string(a) + " and " +
                   to_string(b));
}

template <class T, class F, class DA, class DB>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, const char* name, F f, DA da, DB db) {
  const auto bc = broadcast_shapes(a.shape(), b.shape(), name);
  const std::size_t n = numel(bc.out);
  std::vector<T> out(n);
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) out[i] = f(av[i % bc.a_inner], bv[i % bc.b_inner]);
  return make_result<T>(bc.out, std::move(out), {&a, &b}, [bc, n, da, db](Node<T>& self) {
    const auto& g = self.grad;
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < n; ++i) {
        (*ga)[i % bc.a_inner] += g[i] * da(av[i % bc.a_inner], bv[i % bc.b_inner]);
      }
    }
    if (auto* gb = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < n; ++i) {
        (*gb)[i % bc.b_inner] += g[i] * db(av[i % bc.a_inner], bv[i % bc.b_inner]);
      }
    }
  });
}

// Elementwise unary op with derivative expressed from (input, output).
template <class T, class F, class D>
Tensor<T> unary(const Tensor<T>& x, F f, D d) {
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_result<T>(x.shape(), std::move(out), {&x}, [d](Node<T>& self) {
    if (auto* gx = parent_grad(self, 0)) {
      const auto& xv = self.parents[0]->value;
      for (std::size_t i = 0; i < xv.size(); ++i) {
        (*gx)[i] += self.grad[i] * d(xv[i], self.value[i]);
      }
    }
  });
}

struct AxisSplit {
  std::size_t outer, extent, inner;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for shape " + to_string(shape));
  }
  AxisSplit s{1, shape[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

Shape drop_axis(Shape shape, std::size_t axis) {
  shape.erase(shape.begin() + static_cast<long>(axis));
  return shape;
}

void require_rank(const Shape& shape, std::size_t rank, const char* op) {
  if (shape.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(shape));
  }
}

}  // namespace

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <class T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(
      a, b, "div", [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

template <class T>
Tensor<T> neg(const Tensor<T>& x) {
  return scale(x, T(-1));
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  return unary(x, [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <class T>
Tensor<T> add_scalar(const Tensor<T>& x, T offset) {
  return unary(x, [offset](T v) { return v + offset; }, [](T, T) { return T(1); });
}

template <class T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <class T>
Tensor<T> log(const Tensor<T>& x) {
  for (T v : x.values()) {
    if (!(v > T(0))) {
      throw NumericError("log: non-positive input " + std::to_string(static_cast<double>(v)) +
                         " in tensor of shape " + to_string(x.shape()));
    }
  }
  return unary(x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <class T>
Tensor<T> log_clamped(const Tensor<T>& x, T eps) {
  return unary(
      x, [eps](T v) { return std::log(std::max(v, eps)); },
      [eps](T v, T) { return v > eps ? T(1) / v : T(0); });
}

template <class T>
Tensor<T> xlogx(const Tensor<T>& x, T eps) {
  return unary(
      x, [eps](T v) { return v <= eps ? T(0) : v * std::log(v); },  // NaN propagates
      [eps](T v, T) { return v <= eps ? T(0) : std::log(v) + T(1); });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary(
      x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T total = T(0);
  for (T v : x.values()) total += v;
  return make_result<T>(Shape{}, {total}, {&x}, [](Node<T>& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (auto& g : *gx) g += self.grad[0];
    }
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.numel()));
}

template <class T>
Tensor<T> sum(const Tensor<T>& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "sum");
  const auto xv = x.values();
  std::vector<T> out(s.outer * s.inner, T(0));
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t a = 0; a < s.extent; ++a) {
      const T* row = xv.data() + (o * s.extent + a) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += row[i];
    }
  }
  return make_result<T>(drop_axis(x.shape(), axis), std::move(out), {&x}, [s](Node<T>& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t a = 0; a < s.extent; ++a) {
          T* dst = gx->data() + (o * s.extent + a) * s.inner;
          const T* g = self.grad.data() + o * s.inner;
          for (std::size_t i = 0; i < s.inner; ++i) dst[i] += g[i];
        }
      }
    }
  });
}

template <class T>
Tensor<T> mean(const Tensor<T>& x, std::size_t axis) {
  const auto extent = split_axis(x.shape(), axis, "mean").extent;
  return scale(sum(x, axis), T(1) / static_cast<T>(extent));
}

template <class T>
Tensor<T> max(const Tensor<T>& x, std::size_t axis) {
  const auto s = split_axis(x.shape(), axis, "max");
  if (s.extent == 0) throw ShapeError("max: empty reduction axis in " + to_string(x.shape()));
  const auto xv = x.values();
  std::vector<T> out(s.outer * s.inner);
  auto arg = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < s.extent; ++a) {
        if (xv[(o * s.extent + a) * s.inner + i] > xv[(o * s.extent + best) * s.inner + i]) {
          best = a;
        }
      }
      out[o * s.inner + i] = xv[(o * s.extent + best) * s.inner + i];
      (*arg)[o * s.inner + i] = (o * s.extent + best) * s.inner + i;
    }
  }
  return make_result<T>(drop_axis(x.shape(), axis), std::move(out), {&x}, [arg](Node<T>& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t j = 0; j < arg->size(); ++j) (*gx)[(*arg)[j]] += self.grad[j];
    }
  });
}

template <class T>
Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("dot: shape mismatch between " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  return sum(mul(a, b));
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: shape mismatch between " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  detail::gemm(false, false, m, n, k, a.values().data(), b.values().data(), out.data(), false);
  return make_result<T>(Shape{m, n}, std::move(out), {&a, &b}, [m, k, n](Node<T>& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (auto* ga = parent_grad(self, 0)) {
      detail::gemm(false, true, m, k, n, self.grad.data(), bv.data(), ga->data(), true);
    }
    if (auto* gb = parent_grad(self, 1)) {
      detail::gemm(true, false, k, n, m, av.data(), self.grad.data(), gb->data(), true);
    }
  });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  std::vector<T> out(x.values().begin(), x.values().end());
  return make_result<T>(std::move(shape), std::move(out), {&x}, [](Node<T>& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < gx->size(); ++i) (*gx)[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> flatten(const Tensor<T>& x) {
  if (x.rank() < 1) throw ShapeError("flatten: needs a batch axis, got " + to_string(x.shape()));
  const std::size_t n = x.dim(0);
  return reshape(x, Shape{n, n == 0 ? 0 : x.numel() / n});
}

template <class T>
Tensor<T> pick(const Tensor<T>& x, std::span<const std::size_t> index) {
  require_rank(x.shape(), 2, "pick");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (index.size() != rows) {
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for shape " +
                     to_string(x.shape()));
  }
  auto idx = std::make_shared<std::vector<std::size_t>>(index.begin(), index.end());
  std::vector<T> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if ((*idx)[r] >= cols) throw ShapeError("pick: index out of range");
    out[r] = x.values()[r * cols + (*idx)[r]];
  }
  return make_result<T>(Shape{rows}, std::move(out), {&x}, [idx, cols](Node<T>& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < idx->size(); ++r) (*gx)[r * cols + (*idx)[r]] += self.grad[r];
    }
  });
}

template <class T>
Tensor<T> log_softmax(const Tensor<T>& x) {
  require_rank(x.shape(), 2, "log_softmax");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* z = xv.data() + r * cols;
    T* y = out.data() + r * cols;
    const T top = *std::max_element(z, z + cols);
    T total = T(0);
    for (std::size_t c = 0; c < cols; ++c) total += std::exp(z[c] - top);
    const T lse = std::log(total);
    for (std::size_t c = 0; c < cols; ++c) y[c] = (z[c] - top) - lse;
  }
  return make_result<T>(x.shape(), std::move(out), {&x}, [rows, cols](Node<T>& self) {
    if (auto* gx = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const T* g = self.grad.data() + r * cols;
        const T* y = self.value.data() + r * cols;
        T gsum = T(0);
        for (std::size_t c = 0; c < cols; ++c) gsum += g[c];
        for (std::size_t c = 0; c < cols; ++c) (*gx)[r * cols + c] += g[c] - std::exp(y[c]) * gsum;
      }
    }
  });
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
  return exp(log_softmax(x));
}

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w, o, k, pad, ho, wo;
  std::size_t patch() const { return c * k * k; }
  std::size_t pixels() const { return ho * wo; }
};

template <class T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t width = g.n * g.pixels();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((ch * g.k + ky) * g.k + kx) * width;
        for (std::size_t b = 0; b < g.n; ++b) {
          const T* plane = x + (b * g.c + ch) * g.h * g.w;
          T* dst = row + b * g.pixels();
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy + ky) - static_cast<long>(g.pad);
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox + kx) - static_cast<long>(g.pad);
              const bool inside = iy >= 0 && iy < static_cast<long>(g.h) && ix >= 0 &&
                                  ix < static_cast<long>(g.w);
              dst[oy * g.wo + ox] = inside ? plane[iy * static_cast<long>(g.w) + ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* cols, const ConvGeometry& g, T* dx) {
  const std::size_t width = g.n * g.pixels();
  for (std::size_t ch = 0; ch < g.c; ++ch) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((ch * g.k + ky) * g.k + kx) * width;
        for (std::size_t b = 0; b < g.n; ++b) {
          T* plane = dx + (b * g.c + ch) * g.h * g.w;
          const T* src = row + b * g.pixels();
          for (std::size_t oy = 0; oy < g.ho; ++oy) {
            const long iy = static_cast<long>(oy + ky) - static_cast<long>(g.pad);
            if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
            for (std::size_t ox = 0; ox < g.wo; ++ox) {
              const long ix = static_cast<long>(ox + kx) - static_cast<long>(g.pad);
              if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
              plane[iy * static_cast<long>(g.w) + ix] += src[oy * g.wo + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>* bias,
                 std::size_t padding) {
  require_rank(x.shape(), 4, "conv2d input");
  require_rank(weight.shape(), 4, "conv2d weight");
  if (weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3)) {
    throw ShapeError("conv2d: shape mismatch between input " + to_string(x.shape()) +
                     " and weight " + to_string(weight.shape()));
  }
  ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), weight.dim(0), weight.dim(2), padding,
                 0,         0};
  if (g.h + 2 * g.pad < g.k || g.w + 2 * g.pad < g.k) {
    throw ShapeError("conv2d: kernel " + to_string(weight.shape()) + " larger than padded input " +
                     to_string(x.shape()));
  }
  g.ho = g.h + 2 * g.pad - g.k + 1;
  g.wo = g.w + 2 * g.pad - g.k + 1;
  if (bias && (bias->rank() != 1 || bias->dim(0) != g.o)) {
    throw ShapeError("conv2d: bias shape " + to_string(bias->shape()) + " does not match weight " +
                     to_string(weight.shape()));
  }

  const std::size_t width = g.n * g.pixels();
  auto cols = std::make_shared<std::vector<T>>(g.patch() * width);
  im2col(x.values().data(), g, cols->data());
  std::vector<T> tmp(g.o * width);
  detail::gemm(false, false, g.o, width, g.patch(), weight.values().data(), cols->data(),
               tmp.data(), false);
  std::vector<T> out(g.n * g.o * g.pixels());
  for (std::size_t b = 0; b < g.n; ++b) {
    for (std::size_t oc = 0; oc < g.o; ++oc) {
      const T shift = bias ? bias->values()[oc] : T(0);
      const T* src = tmp.data() + oc * width + b * g.pixels();
      T* dst = out.data() + (b * g.o + oc) * g.pixels();
      for (std::size_t p = 0; p < g.pixels(); ++p) dst[p] = src[p] + shift;
    }
  }

  auto backward = [g, cols, has_bias = bias != nullptr](Node<T>& self) {
    const std::size_t width = g.n * g.pixels();
    std::vector<T> dtmp(g.o * width);
    for (std::size_t b = 0; b < g.n; ++b) {
      for (std::size_t oc = 0; oc < g.o; ++oc) {
        const T* src = self.grad.data() + (b * g.o + oc) * g.pixels();
        std::copy(src, src + g.pixels(), dtmp.data() + oc * width + b * g.pixels());
      }
    }
    const auto& wv = self.parents[1]->value;
    if (auto* gw = parent_grad(self, 1)) {
      detail::gemm(false, true, g.o, g.patch(), width, dtmp.data(), cols->data(), gw->data(), true);
    }
    if (has_bias) {
      if (auto* gb = parent_grad(self, 2)) {
        for (std::size_t oc = 0; oc < g.o; ++oc) {
          T acc = T(0);
          for (std::size_t j = 0; j < width; ++j) acc += dtmp[oc * width + j];
          (*gb)[oc] += acc;
        }
      }
    }
    if (auto* gx = parent_grad(self, 0)) {
      std::vector<T> dcols(g.patch() * width);
      detail::gemm(true, false, g.patch(), width, g.o, wv.data(), dtmp.data(), dcols.data(),
                   false);
      col2im_add(dcols.data(), g, gx->data());
    }
  };
  if (bias) {
    return make_result<T>(Shape{g.n, g.o, g.ho, g.wo}, std::move(out), {&x, &weight, bias},
                          std::move(backward));
  }
  return make_result<T>(Shape{g.n, g.o, g.ho, g.wo}, std::move(out), {&x, &weight},
                        std::move(backward));
}

namespace {

template <class T>
Tensor<T> pool2d(const Tensor<T>& x, std::size_t k, bool take_max) {
  require_rank(x.shape(), 4, take_max ? "max_pool2d" : "avg_pool2d");
  if (k == 0 || x.dim(2) < k || x.dim(3) < k) {
    throw ShapeError("pool2d: window " + std::to_string(k) + " does not fit " +
                     to_string(x.shape()));
  }
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t ho = h / k, wo = w / k;
  const auto xv = x.values();
  std::vector<T> out(planes * ho * wo);
  auto arg = std::make_shared<std::vector<std::size_t>>(take_max ? out.size() : 0);
  const T inv = T(1) / static_cast<T>(k * k);
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t o = (p * ho + oy) * wo + ox;
        std::size_t best = (p * h + oy * k) * w + ox * k;
        T acc = T(0);
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t i = (p * h + oy * k + dy) * w + ox * k + dx;
            acc += xv[i];
            if (xv[i] > xv[best]) best = i;
          }
        }
        if (take_max) {
          out[o] = xv[best];
          (*arg)[o] = best;
        } else {
          out[o] = acc * inv;
        }
      }
    }
  }
  Shape shape{x.dim(0), x.dim(1), ho, wo};
  return make_result<T>(shape, std::move(out), {&x},
                        [arg, take_max, k, h, w, ho, wo, planes, inv](Node<T>& self) {
                          auto* gx = parent_grad(self, 0);
                          if (!gx) return;
                          if (take_max) {
                            for (std::size_t o = 0; o < arg->size(); ++o) {
                              (*gx)[(*arg)[o]] += self.grad[o];
                            }
                            return;
                          }
                          for (std::size_t p = 0; p < planes; ++p) {
                            for (std::size_t oy = 0; oy < ho; ++oy) {
                              for (std::size_t ox = 0; ox < wo; ++ox) {
                                const T g = self.grad[(p * ho + oy) * wo + ox] * inv;
                                for (std::size_t dy = 0; dy < k; ++dy) {
                                  for (std::size_t dx = 0; dx < k; ++dx) {
                                    (*gx)[(p * h + oy * k + dy) * w + ox * k + dx] += g;
                                  }
                                }
                              }
                            }
                          }
                        });
}

struct ChannelLayout {
  std::size_t n, c, inner;  // value index = (b * c + ch) * inner + i
  std::size_t count() const { return n * inner; }
};

ChannelLayout channel_layout(const Shape& shape, const char* op) {
  if (shape.size() != 2 && shape.size() != 4) {
    throw ShapeError(std::string(op) + ": expected [N, C] or [N, C, H, W], got " +
                     to_string(shape));
  }
  ChannelLayout l{shape[0], shape[1], 1};
  if (shape.size() == 4) l.inner = shape[2] * shape[3];
  return l;
}

}  // namespace

template <class T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t k) {
  return pool2d(x, k, true);
}

template <class T>
Tensor<T> avg_pool2d(const Tensor<T>& x, std::size_t k) {
  return pool2d(x, k, false);
}

template <class T>
void channel_moments(std::span<const T> x, const Shape& shape, std::vector<T>& mean,
                     std::vector<T>& var) {
  const auto l = channel_layout(shape, "channel_moments");
  if (l.count() == 0) throw ShapeError("channel_moments: empty batch " + to_string(shape));
  mean.assign(l.c, T(0));
  var.assign(l.c, T(0));
  for (std::size_t ch = 0; ch < l.c; ++ch) {
    double acc = 0.0;
    for (std::size_t b = 0; b < l.n; ++b) {
      const T* p = x.data() + (b * l.c + ch) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) acc += static_cast<double>(p[i]);
    }
    const double mu = acc / static_cast<double>(l.count());
    double sq = 0.0;
    for (std::size_t b = 0; b < l.n; ++b) {
      const T* p = x.data() + (b * l.c + ch) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const double d = static_cast<double>(p[i]) - mu;
        sq += d * d;
      }
    }
    mean[ch] = static_cast<T>(mu);
    var[ch] = static_cast<T>(sq / static_cast<double>(l.count()));
  }
}

template <class T>
Tensor<T> batch_norm_batch_stats(const Tensor<T>& x, const Tensor<T>& gamma,
                                 const Tensor<T>& beta, T eps, std::vector<T>* batch_mean,
                                 std::vector<T>* batch_var) {
  const auto l = channel_layout(x.shape(), "batch_norm");
  if (gamma.numel() != l.c || beta.numel() != l.c) {
    throw ShapeError("batch_norm: affine shapes " + to_string(gamma.shape()) + " and " +
                     to_string(beta.shape()) + " do not match input " + to_string(x.shape()));
  }
  std::vector<T> mu, var;
  channel_moments(x.values(), x.shape(), mu, var);
  auto inv_std = std::make_shared<std::vector<T>>(l.c);
  for (std::size_t ch = 0; ch < l.c; ++ch) (*inv_std)[ch] = T(1) / std::sqrt(var[ch] + eps);
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  std::vector<T> out(x.numel());
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  for (std::size_t b = 0; b < l.n; ++b) {
    for (std::size_t ch = 0; ch < l.c; ++ch) {
      const std::size_t base = (b * l.c + ch) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const T h = (xv[base + i] - mu[ch]) * (*inv_std)[ch];
        (*xhat)[base + i] = h;
        out[base + i] = gv[ch] * h + bv[ch];
      }
    }
  }
  if (batch_mean) *batch_mean = mu;
  if (batch_var) *batch_var = var;
  return make_result<T>(x.shape(), std::move(out), {&x, &gamma, &beta},
                        [l, xhat, inv_std](Node<T>& self) {
                          const auto& gv = self.parents[1]->value;
                          std::vector<T> sum_dy(l.c, T(0)), sum_dy_xhat(l.c, T(0));
                          for (std::size_t b = 0; b < l.n; ++b) {
                            for (std::size_t ch = 0; ch < l.c; ++ch) {
                              const std::size_t base = (b * l.c + ch) * l.inner;
                              for (std::size_t i = 0; i < l.inner; ++i) {
                                sum_dy[ch] += self.grad[base + i];
                                sum_dy_xhat[ch] += self.grad[base + i] * (*xhat)[base + i];
                              }
                            }
                          }
                          if (auto* gg = parent_grad(self, 1)) {
                            for (std::size_t ch = 0; ch < l.c; ++ch) (*gg)[ch] += sum_dy_xhat[ch];
                          }
                          if (auto* gb = parent_grad(self, 2)) {
                            for (std::size_t ch = 0; ch < l.c; ++ch) (*gb)[ch] += sum_dy[ch];
                          }
                          auto* gx = parent_grad(self, 0);
                          if (!gx) return;
                          const T m = static_cast<T>(l.count());
                          for (std::size_t b = 0; b < l.n; ++b) {
                            for (std::size_t ch = 0; ch < l.c; ++ch) {
                              const std::size_t base = (b * l.c + ch) * l.inner;
                              const T k = gv[ch] * (*inv_std)[ch] / m;
                              for (std::size_t i = 0; i < l.inner; ++i) {
                                (*gx)[base + i] +=
                                    k * (m * self.grad[base + i] - sum_dy[ch] -
                                         (*xhat)[base + i] * sum_dy_xhat[ch]);
                              }
                            }
                          }
                        });
}

template <class T>
Tensor<T> batch_norm_fixed_stats(const Tensor<T>& x, const Tensor<T>& gamma,
                                 const Tensor<T>& beta, std::span<const T> mean,
                                 std::span<const T> var, T eps) {
  const auto l = channel_layout(x.shape(), "batch_norm");
  if (gamma.numel() != l.c || beta.numel() != l.c || mean.size() != l.c || var.size() != l.c) {
    throw ShapeError("batch_norm: channel count mismatch: input " + to_string(x.shape()) +
                     " has " + std::to_string(l.c) + " channels, statistics have " +
                     std::to_string(mean.size()));
  }
  auto inv_std = std::make_shared<std::vector<T>>(l.c);
  for (std::size_t ch = 0; ch < l.c; ++ch) (*inv_std)[ch] = T(1) / std::sqrt(var[ch] + eps);
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  std::vector<T> out(x.numel());
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  for (std::size_t b = 0; b < l.n; ++b) {
    for (std::size_t ch = 0; ch < l.c; ++ch) {
      const std::size_t base = (b * l.c + ch) * l.inner;
      for (std::size_t i = 0; i < l.inner; ++i) {
        const T h = (xv[base + i] - mean[ch]) * (*inv_std)[ch];
        (*xhat)[base + i] = h;
        out[base + i] = gv[ch] * h + bv[ch];
      }
    }
  }
  return make_result<T>(x.shape(), std::move(out), {&x, &gamma, &beta},
                        [l, xhat, inv_std](Node<T>& self) {
                          const auto& gv = self.parents[1]->value;
                          auto* gx = parent_grad(self, 0);
                          auto* gg = parent_grad(self, 1);
                          auto* gb = parent_grad(self, 2);
                          for (std::size_t b = 0; b < l.n; ++b) {
                            for (std::size_t ch = 0; ch < l.c; ++ch) {
                              const std::size_t base = (b * l.c + ch) * l.inner;
                              for (std::size_t i = 0; i < l.inner; ++i) {
                                const T g = self.grad[base + i];
                                if (gx) (*gx)[base + i] += g * gv[ch] * (*inv_std)[ch];
                                if (gg) (*gg)[ch] += g * (*xhat)[base + i];
                                if (gb) (*gb)[ch] += g;
                              }
                            }
                          }
                        });
}

#define TTR_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> neg(const Tensor<T>&);                                                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                                 \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                            \
  template Tensor<T> exp(const Tensor<T>&);                                                      \
  template Tensor<T> log(const Tensor<T>&);                                                      \
  template Tensor<T> log_clamped(const Tensor<T>&, T);                                           \
  template Tensor<T> xlogx(const Tensor<T>&, T);                                                 \
  template Tensor<T> relu(const Tensor<T>&);                                                     \
  template Tensor<T> sum(const Tensor<T>&);                                                      \
  template Tensor<T> mean(const Tensor<T>&);                                                     \
  template Tensor<T> sum(const Tensor<T>&, std::size_t);                                         \
  template Tensor<T> mean(const Tensor<T>&, std::size_t);                                        \
  template Tensor<T> max(const Tensor<T>&, std::size_t);                                         \
  template Tensor<T> dot(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                           \
  template Tensor<T> flatten(const Tensor<T>&);                                                  \
  template Tensor<T> pick(const Tensor<T>&, std::span<const std::size_t>);                       \
  template Tensor<T> log_softmax(const Tensor<T>&);                                              \
  template Tensor<T> softmax(const Tensor<T>&);                                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*, std::size_t);  \
  template Tensor<T> max_pool2d(const Tensor<T>&, std::size_t);                                  \
  template Tensor<T> avg_pool2d(const Tensor<T>&, std::size_t);                                  \
  template void channel_moments(std::span<const T>, const Shape&, std::vector<T>&,               \
                                std::vector<T>&);                                                \
  template Tensor<T> batch_norm_batch_stats(const Tensor<T>&, const Tensor<T>&,                  \
                                            const Tensor<T>&, T, std::vector<T>*,                \
                                            std::vector<T>*);                                    \
  template Tensor<T> batch_norm_fixed_stats(const Tensor<T>&, const Tensor<T>&,                  \
                                            const Tensor<T>&, std::span<const T>,                \
                                            std::span<const T>, T);

TTR_INSTANTIATE_OPS(float)
TTR_INSTANTIATE_OPS(double)

}  // namespace ttr
