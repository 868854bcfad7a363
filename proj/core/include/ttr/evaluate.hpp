// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ttr/dataset.hpp"
#include "ttr/memo.hpp"
#include "ttr/model.hpp"

namespace ttr {

struct RunResult {
  Strategy strategy = Strategy::none;
  std::string dataset;     // dataset name
  std::string corruption;  // empty for clean splits
  int severity = 0;
  std::vector<EvalRecord> records;  // one per test point, in dataset order
  double error_pct = 0.0;           // 100 * (1 - correct / total)
  double sec_per_point = 0.0;
  AdaptationConfig config;
  std::uint64_t seed = 0;
  std::size_t flagged = 0;  // points whose adaptation failed

  std::size_t correct() const;
  double adapted_fraction() const;
};

/// Runs `config.strategy` over every point. Point i uses seed hash_combine(seed, i)
/// and a private copy of the model, so the result does not depend on
/// `parallelism` (timing fields aside). tent_batch runs sequentially.
RunResult evaluate(const Model<float>& model, const Dataset& data, const AdaptationConfig& config,
                   std::uint64_t seed, std::size_t parallelism = 1);

/// One evaluate() per B with the same seed, so smaller draws are prefixes of larger ones.
std::vector<RunResult> sweep_B(const Model<float>& model, const Dataset& data,
                               const AdaptationConfig& config, std::span<const std::size_t> b_values,
                               std::uint64_t seed, std::size_t parallelism = 1);

/// Seed used for point `index` of a run seeded with `seed`.
std::uint64_t point_seed(std::uint64_t seed, std::size_t index);

}  // namespace ttr
