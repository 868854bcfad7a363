// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/metrics.hpp"

#include <set>

#include "ttr/error.hpp"

namespace ttr {

namespace {

using Grid = std::map<std::string, std::map<int, double>>;

Grid to_grid(std::span<const CorruptionCell> cells, const char* what) {
  Grid grid;
  for (const auto& c : cells) {
    if (!grid[c.kind].emplace(c.severity, c.error_pct).second) {
      throw Error(std::string(what) + ": duplicate cell (" + c.kind + ", " +
                  std::to_string(c.severity) + ")");
    }
  }
  std::set<int> severities;
  for (const auto& [kind, row] : grid)
    for (const auto& [s, e] : row) severities.insert(s);
  std::string missing;
  for (const auto& [kind, row] : grid) {
    for (int s : severities) {
      if (!row.count(s)) missing += (missing.empty() ? "" : ", ") + kind + "/" + std::to_string(s);
    }
  }
  if (!missing.empty()) throw Error(std::string(what) + ": incomplete grid, missing " + missing);
  return grid;
}

}  // namespace

std::vector<CorruptionCell> cells_from(std::span<const RunResult> results) {
  std::vector<CorruptionCell> cells;
  for (const auto& r : results) cells.push_back({r.corruption, r.severity, r.error_pct});
  return cells;
}

CorruptionSummary corruption_error_summary(std::span<const CorruptionCell> cells,
                                           std::span<const CorruptionCell> reference) {
  if (cells.empty()) throw Error("corruption summary: no cells");
  const Grid grid = to_grid(cells, "corruption summary");
  CorruptionSummary out;
  double total = 0.0;
  for (const auto& [kind, row] : grid) {
    double sum = 0.0;
    for (const auto& [s, e] : row) sum += e;
    out.mean_error_by_kind[kind] = sum / static_cast<double>(row.size());
    total += sum;
  }
  out.average_error = total / static_cast<double>(cells.size());
  if (reference.empty()) return out;

  const Grid ref = to_grid(reference, "reference grid");
  std::string missing;
  for (const auto& [kind, row] : grid) {
    auto it = ref.find(kind);
    for (const auto& [s, e] : row) {
      if (it == ref.end() || !it->second.count(s)) {
        missing += (missing.empty() ? "" : ", ") + kind + "/" + std::to_string(s);
      }
    }
  }
  if (!missing.empty()) throw Error("reference grid is missing " + missing);

  double acc = 0.0;
  std::size_t used = 0;
  for (const auto& [kind, row] : grid) {
    double num = 0.0, den = 0.0;
    for (const auto& [s, e] : row) {
      num += e;
      den += ref.at(kind).at(s);
    }
    if (den == 0.0) {
      out.excluded_kinds.push_back(kind);
      out.warnings.push_back("reference error is zero for " + kind + "; excluded from mCE");
      continue;
    }
    out.ce_by_kind[kind] = 100.0 * num / den;
    acc += out.ce_by_kind[kind];
    ++used;
  }
  if (used > 0) out.mce = acc / static_cast<double>(used);
  return out;
}

}  // namespace ttr
