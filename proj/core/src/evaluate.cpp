// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/evaluate.hpp"

#include <exception>
#include <thread>

#include "ttr/error.hpp"
#include "ttr/rng.hpp"

namespace ttr {

std::size_t RunResult::correct() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.correct() ? 1 : 0;
  return n;
}

double RunResult::adapted_fraction() const {
  if (records.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& r : records) n += r.adapted ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(records.size());
}

std::uint64_t point_seed(std::uint64_t seed, std::size_t index) { return hash_combine(seed, index); }

namespace {

void finalize(RunResult& result) {
  const std::size_t total = result.records.size();
  double seconds = 0.0;
  result.flagged = 0;
  for (const auto& r : result.records) {
    seconds += r.seconds;
    result.flagged += r.flagged ? 1 : 0;
  }
  result.error_pct =
      total == 0 ? 0.0
                 : 100.0 * (1.0 - static_cast<double>(result.correct()) / static_cast<double>(total));
  result.sec_per_point = total == 0 ? 0.0 : seconds / static_cast<double>(total);
}

EvalRecord run_point(const Model<float>& model, const Dataset& data, const AdaptationConfig& config,
                     std::uint64_t seed, std::size_t i) {
  try {
    EvalRecord rec = adapt_predict(model, data.images[i], data.labels[i], config, point_seed(seed, i)).record;
    rec.index = i;
    return rec;
  } catch (const std::exception& e) {
    EvalRecord rec;
    rec.index = i;
    rec.label = data.labels[i];
    rec.prediction = -1;
    rec.strategy = config.strategy;
    rec.flagged = true;
    rec.note = e.what();
    return rec;
  }
}

}  // namespace

RunResult evaluate(const Model<float>& model, const Dataset& data, const AdaptationConfig& config,
                   std::uint64_t seed, std::size_t parallelism) {
  config.validate();
  RunResult result;
  result.strategy = config.strategy;
  result.dataset = data.name;
  if (data.split.kind == SplitKind::test_shifted) {
    result.corruption = data.split.corruption;
    result.severity = data.split.severity;
  }
  result.config = config;
  result.seed = seed;

  if (config.strategy == Strategy::tent_batch) {
    result.records = tent_adapt(model, data.images, data.labels, config).records;
    finalize(result);
    return result;
  }

  result.records.resize(data.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(parallelism, data.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < data.size(); ++i) result.records[i] = run_point(model, data, config, seed, i);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t i = w; i < data.size(); i += workers) {
          result.records[i] = run_point(model, data, config, seed, i);
        }
      });
    }
    for (auto& t : threads) t.join();
  }
  finalize(result);
  return result;
}

std::vector<RunResult> sweep_B(const Model<float>& model, const Dataset& data,
                               const AdaptationConfig& config, std::span<const std::size_t> b_values,
                               std::uint64_t seed, std::size_t parallelism) {
  if (b_values.empty()) throw ConfigError("sweep needs at least one B value");
  std::vector<RunResult> out;
  for (std::size_t b : b_values) {
    AdaptationConfig c = config;
    c.batch_size = b;
    out.push_back(evaluate(model, data, c, seed, parallelism));
  }
  return out;
}

}  // namespace ttr
