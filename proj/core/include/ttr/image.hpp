// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ttr/tensor.hpp"

namespace ttr {

/// Channels x height x width, row-major, values in [0, 1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w, float fill = 0.0f)
      : channels(c), height(h), width(w), pixels(c * h * w, fill) {}

  float& at(std::size_t c, std::size_t y, std::size_t x) {
    return pixels[(c * height + y) * width + x];
  }
  float at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  std::size_t plane() const { return height * width; }
  bool same_shape(const Image& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  void clamp01();

  friend bool operator==(const Image&, const Image&) = default;
};

/// Stacks images of identical shape into an [N, C, H, W] tensor.
template <class T>
Tensor<T> to_batch(std::span<const Image> images);

template <class T>
Tensor<T> to_batch(const Image& image) {
  return to_batch<T>(std::span<const Image>(&image, 1));
}

}  // namespace ttr
