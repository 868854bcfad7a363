// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ttr/augment.hpp"
#include "ttr/image.hpp"
#include "ttr/model.hpp"
#include "ttr/objectives.hpp"
#include "ttr/optim.hpp"

namespace ttr {

enum class Strategy {
  none,             // eval-mode prediction on x
  bn_only,          // single-point BN statistics, no parameter update
  tta,              // argmax of the marginal over augmented copies
  memo,             // one marginal-entropy step, then predict on x
  ce_single_point,  // same procedure with the conditional entropy
  pce,              // same procedure with the pairwise cross entropy
  tent_batch,       // conditional entropy over a batch of test points
};

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view name);

/// Where single-point BN statistics come from when predicting on x.
enum class BnStatsSource {
  augmented,  // the augmented batch; the prediction on x reuses them
  original,   // x alone, mixed with the training statistics
};

std::string_view to_string(BnStatsSource source);
std::optional<BnStatsSource> parse_bn_stats_source(std::string_view name);

inline constexpr double kInfinitePrior = std::numeric_limits<double>::infinity();

struct AdaptationConfig {
  Strategy strategy = Strategy::memo;
  std::size_t batch_size = 32;  // B, augmented copies per point
  double lr = 0.005;            // 0 is allowed and makes every update a no-op
  std::size_t steps = 1;
  UpdateRule rule{};
  double prior_strength = 16.0;  // N; kInfinitePrior keeps training statistics
  std::optional<double> threshold_fraction;
  ParamFilter param_filter = ParamFilter::all;
  BnStatsSource bn_stats_source = BnStatsSource::augmented;
  AugmentationPolicy policy{};

  // tent_batch only.
  bool episodic = false;
  std::size_t tent_batch_size = 64;
  double tent_prior_strength = 0.0;  // 0: batch statistics with gradient
  ParamFilter tent_param_filter = ParamFilter::norm_affine_only;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct EvalRecord {
  std::size_t index = 0;
  int label = 0;
  int prediction = 0;
  double loss_before = 0.0;  // objective on the augmented copies before adapting
  double loss_after = 0.0;   // same copies and statistics after adapting
  double marginal_entropy = 0.0;
  double seconds = 0.0;  // adapt + predict wall time
  Strategy strategy = Strategy::none;
  bool adapted = false;
  bool flagged = false;  // adaptation failed; prediction fell back to the unadapted model
  std::string note;

  bool correct() const { return prediction == label; }
};

/// Statistics-collection forward over `batch`: per BN layer, the batch moments
/// mixed with the running ones as N/(N+1) * train + 1/(N+1) * test.
template <class T>
BnStatistics<T> single_point_bn_stats(const Model<T>& model, const Tensor<T>& batch,
                                      double prior_strength);

struct AdaptOutcome {
  int prediction = 0;
  EvalRecord record;
  std::optional<Model<float>> adapted;  // set by the gradient strategies
};

/// Per-point procedure for every strategy except tent_batch. `model` is never
/// modified; gradient strategies work on a private copy. `label` is copied
/// into the record only.
AdaptOutcome adapt_predict(const Model<float>& model, const Image& x, int label,
                           const AdaptationConfig& config, std::uint64_t seed);

/// adapt_predict for memo, ce_single_point and pce.
AdaptOutcome memo_adapt_predict(const Model<float>& model, const Image& x, int label,
                                const AdaptationConfig& config, std::uint64_t seed);

/// Argmax of the marginal over B augmented copies, BN statistics mixed from
/// those copies when N is finite.
int tta_predict(const Model<float>& model, const Image& x, const AdaptationConfig& config,
                std::uint64_t seed);

struct TentOutcome {
  std::vector<EvalRecord> records;
  Model<float> final_model;  // online mode: parameters after the last batch
};

/// Batches of tent_batch_size consecutive points: minimize the mean conditional
/// entropy with one update, then predict on the same batch. Online mode keeps
/// parameters and optimizer state across batches; episodic resets both.
TentOutcome tent_adapt(const Model<float>& model, std::span<const Image> stream,
                       std::span<const int> labels, const AdaptationConfig& config);

extern template BnStatistics<float> single_point_bn_stats(const Model<float>&, const Tensor<float>&,
                                                          double);
extern template BnStatistics<double> single_point_bn_stats(const Model<double>&,
                                                           const Tensor<double>&, double);

}  // namespace ttr
