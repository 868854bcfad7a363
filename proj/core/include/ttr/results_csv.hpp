// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ttr/evaluate.hpp"

namespace ttr {

inline constexpr const char* kResultsHeader =
    "strategy,dataset,corruption,severity,B,eta,N,steps,error_pct,sec_per_point,seed";

/// One line of the results table.
struct ResultRow {
  std::string strategy;
  std::string dataset;
  std::string corruption;
  int severity = 0;
  std::size_t B = 0;
  double eta = 0.0;
  double N = 0.0;  // may be inf
  std::size_t steps = 0;
  double error_pct = 0.0;
  double sec_per_point = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

ResultRow to_row(const RunResult& result);

/// Header plus one row per result. Doubles use the shortest round-trip form.
void write_results(std::span<const ResultRow> rows, const std::filesystem::path& path);
void write_results(std::span<const RunResult> results, const std::filesystem::path& path);
/// Throws Error on a wrong header or malformed row.
std::vector<ResultRow> read_results(const std::filesystem::path& path);

/// "B,seconds,error" series, one line per result.
void write_plot_data(std::span<const RunResult> results, const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace ttr
