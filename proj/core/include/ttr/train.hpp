// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "ttr/dataset.hpp"
#include "ttr/model.hpp"
#include "ttr/optim.hpp"

namespace ttr {

struct TrainOptions {
  std::size_t epochs = 15;
  std::size_t batch_size = 64;
  double lr = 0.05;
  UpdateRule rule{UpdateKind::sgd_momentum, 0.9, 0.9, 0.999, 1e-8, 5e-4};
  std::uint64_t seed = 0;
  bool augment = true;  // edge-padded random crop + horizontal flip
  std::size_t pad = 2;
  bool cosine_schedule = true;  // per-batch cosine decay from lr to 0
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double heldout_loss = 0.0;
  double heldout_accuracy = 0.0;
};

struct TrainHistory {
  double initial_heldout_loss = 0.0;
  std::vector<EpochStats> epochs;
  double final_train_accuracy = 0.0;  // eval-mode, unaugmented
};

/// Minibatch cross-entropy training. Deterministic given options.seed.
/// Throws NumericError naming the epoch and batch on a non-finite loss.
TrainHistory train_supervised(Model<float>& model, const Dataset& train, const Dataset* heldout,
                              const TrainOptions& options);

/// Eval-mode class probabilities, [N, C] row-major, computed in chunks.
std::vector<float> predict_probabilities(const Model<float>& model, const Dataset& data,
                                         std::size_t chunk = 256);
/// Lowest index among the maximal entries.
std::size_t argmax(std::span<const float> row);
std::size_t argmax(std::span<const double> row);

struct EvalSummary {
  double loss = 0.0;      // mean cross entropy
  double accuracy = 0.0;  // fraction in [0, 1]
};
EvalSummary evaluate_clean(const Model<float>& model, const Dataset& data);

}  // namespace ttr
