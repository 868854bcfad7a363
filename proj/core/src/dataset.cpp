// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/dataset.hpp"

#include <algorithm>

#include "ttr/error.hpp"

namespace ttr {

std::string SplitTag::to_string() const {
  switch (kind) {
    case SplitKind::train: return "train";
    case SplitKind::test_clean: return "test_clean";
    case SplitKind::test_shifted:
      return "test_shifted(" + corruption + "," + std::to_string(severity) + ")";
  }
  return "unknown";
}

void Dataset::validate() const {
  if (images.size() != labels.size()) {
    throw Error("dataset has " + std::to_string(images.size()) + " images but " +
                std::to_string(labels.size()) + " labels");
  }
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw Error("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                  " outside [0, " + std::to_string(num_classes) + ")");
    }
    if (!images[i].same_shape(images.front())) {
      throw Error("image " + std::to_string(i) + " differs in shape from image 0");
    }
    for (float v : images[i].pixels) {
      if (!(v >= 0.0f && v <= 1.0f)) {
        throw Error("image " + std::to_string(i) + " has a pixel outside [0, 1]");
      }
    }
  }
}

Dataset Dataset::slice(std::size_t first, std::size_t count) const {
  Dataset out;
  out.num_classes = num_classes;
  out.split = split;
  out.name = name;
  out.provenance = provenance;
  const std::size_t begin = std::min(first, size());
  const std::size_t end = std::min(size(), begin + count);
  out.images.assign(images.begin() + static_cast<long>(begin), images.begin() + static_cast<long>(end));
  out.labels.assign(labels.begin() + static_cast<long>(begin), labels.begin() + static_cast<long>(end));
  return out;
}

}  // namespace ttr
