// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ttr/image.hpp"

namespace ttr {

enum class SplitKind { train, test_clean, test_shifted };

struct SplitTag {
  SplitKind kind = SplitKind::train;
  std::string corruption;  // test_shifted only
  int severity = 0;        // test_shifted only

  /// "train", "test_clean" or "test_shifted(<kind>,<severity>)".
  std::string to_string() const;
};

struct Dataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::size_t num_classes = 0;
  SplitTag split;
  std::string name;        // short tag used in result tables
  std::string provenance;  // how the data was produced or where it was read from

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  /// Throws Error when labels and images disagree or values leave [0, 1].
  void validate() const;
  /// Up to `count` items starting at `first`.
  Dataset slice(std::size_t first, std::size_t count) const;
};

}  // namespace ttr
