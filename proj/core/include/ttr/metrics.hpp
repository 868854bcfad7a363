// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ttr/evaluate.hpp"

namespace ttr {

/// Error of one (kind, severity) cell.
struct CorruptionCell {
  std::string kind;
  int severity = 0;
  double error_pct = 0.0;
};

struct CorruptionSummary {
  std::map<std::string, double> mean_error_by_kind;  // over severities
  double average_error = 0.0;                        // over the whole grid
  std::optional<double> mce;                         // when a reference grid is given
  std::map<std::string, double> ce_by_kind;          // normalized, x100
  std::vector<std::string> excluded_kinds;           // reference error summed to zero
  std::vector<std::string> warnings;
};

std::vector<CorruptionCell> cells_from(std::span<const RunResult> results);

/// `cells` must form a complete kinds x severities grid (Error listing the
/// missing cells otherwise). With a reference grid, mCE is the mean over kinds
/// of 100 * sum_s E[k,s] / sum_s E_ref[k,s]; kinds whose reference sum is zero
/// are excluded with a warning.
CorruptionSummary corruption_error_summary(std::span<const CorruptionCell> cells,
                                           std::span<const CorruptionCell> reference = {});

}  // namespace ttr
