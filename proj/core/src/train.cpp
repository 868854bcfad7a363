// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ttr/augment.hpp"
#include "ttr/error.hpp"
#include "ttr/ops.hpp"
#include "ttr/rng.hpp"

namespace ttr {

template <class Row>
static std::size_t argmax_impl(Row row) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < row.size(); ++i) {
    if (row[i] > row[best]) best = i;
  }
  return best;
}

std::size_t argmax(std::span<const float> row) { return argmax_impl(row); }
std::size_t argmax(std::span<const double> row) { return argmax_impl(row); }

std::vector<float> predict_probabilities(const Model<float>& model, const Dataset& data,
                                         std::size_t chunk) {
  NoGradGuard no_grad;
  std::vector<float> out;
  out.reserve(data.size() * model.num_classes());
  const std::span<const Image> images(data.images);
  for (std::size_t first = 0; first < data.size(); first += chunk) {
    const std::size_t count = std::min(chunk, data.size() - first);
    auto probs = softmax(model.forward(to_batch<float>(images.subspan(first, count)),
                                       BnContext<float>::eval()));
    out.insert(out.end(), probs.values().begin(), probs.values().end());
  }
  return out;
}

EvalSummary evaluate_clean(const Model<float>& model, const Dataset& data) {
  if (data.empty()) return {};
  const auto probs = predict_probabilities(model, data);
  const std::size_t c = model.num_classes();
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::span<const float> row(probs.data() + i * c, c);
    const auto label = static_cast<std::size_t>(data.labels[i]);
    loss -= std::log(std::max(static_cast<double>(row[label]), 1e-12));
    correct += argmax(row) == label;
  }
  const auto n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

TrainHistory train_supervised(Model<float>& model, const Dataset& train, const Dataset* heldout,
                              const TrainOptions& options) {
  if (options.batch_size == 0) throw Error("train: batch size must be >= 1");
  TrainHistory history;
  if (heldout && !heldout->empty()) history.initial_heldout_loss = evaluate_clean(model, *heldout).loss;

  Optimizer<float> optimizer(options.rule, model.parameters());
  Rng rng(options.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    Rng epoch_rng = rng.split(epoch);
    std::shuffle(order.begin(), order.end(), epoch_rng);
    double loss_total = 0.0;
    std::size_t correct = 0;
    std::size_t batch_index = 0;
    const std::size_t batches = (order.size() + options.batch_size - 1) / options.batch_size;
    for (std::size_t first = 0; first < order.size(); first += options.batch_size, ++batch_index) {
      const std::size_t count = std::min(options.batch_size, order.size() - first);
      std::vector<Image> images;
      std::vector<std::size_t> labels;
      images.reserve(count);
      for (std::size_t j = 0; j < count; ++j) {
        const std::size_t idx = order[first + j];
        if (options.augment) {
          Rng item_rng = epoch_rng.split(1000003ULL * (idx + 1));
          images.push_back(pad_crop_flip(train.images[idx], options.pad, item_rng));
        } else {
          images.push_back(train.images[idx]);
        }
        labels.push_back(static_cast<std::size_t>(train.labels[idx]));
      }
      model.zero_grad();
      auto logits = model.forward_train(to_batch<float>(images));
      auto loss = neg(mean(pick(log_softmax(logits), std::span<const std::size_t>(labels))));
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index));
      }
      loss.backward();
      const double progress =
          (static_cast<double>(epoch) + static_cast<double>(batch_index) / static_cast<double>(batches)) /
          static_cast<double>(options.epochs);
      const double lr = options.cosine_schedule
                            ? 0.5 * options.lr * (1.0 + std::cos(std::numbers::pi * progress))
                            : options.lr;
      if (!optimizer.step(lr)) {
        throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      loss_total += value * static_cast<double>(count);
      const auto lv = logits.values();
      const std::size_t c = model.num_classes();
      for (std::size_t j = 0; j < count; ++j) {
        correct += argmax(lv.subspan(j * c, c)) == labels[j];
      }
    }
    EpochStats stats;
    stats.epoch = epoch + 1;
    const auto n = static_cast<double>(std::max<std::size_t>(train.size(), 1));
    stats.train_loss = loss_total / n;
    stats.train_accuracy = static_cast<double>(correct) / n;
    if (heldout && !heldout->empty()) {
      const auto eval = evaluate_clean(model, *heldout);
      stats.heldout_loss = eval.loss;
      stats.heldout_accuracy = eval.accuracy;
    }
    history.epochs.push_back(stats);
  }
  model.zero_grad();
  history.final_train_accuracy = train.empty() ? 0.0 : evaluate_clean(model, train).accuracy;
  return history;
}

}  // namespace ttr
