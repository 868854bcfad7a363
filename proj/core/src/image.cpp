// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/image.hpp"

#include <algorithm>

#include "ttr/error.hpp"

namespace ttr {

void Image::clamp01() {
  for (auto& v : pixels) v = std::clamp(v, 0.0f, 1.0f);
}

template <class T>
Tensor<T> to_batch(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("to_batch: no images");
  const Image& first = images.front();
  std::vector<T> values;
  values.reserve(images.size() * first.pixels.size());
  for (const Image& im : images) {
    if (!im.same_shape(first)) throw ShapeError("to_batch: images differ in shape");
    values.insert(values.end(), im.pixels.begin(), im.pixels.end());
  }
  return Tensor<T>(Shape{images.size(), first.channels, first.height, first.width},
                   std::move(values));
}

template Tensor<float> to_batch<float>(std::span<const Image>);
template Tensor<double> to_batch<double>(std::span<const Image>);

}  // namespace ttr
