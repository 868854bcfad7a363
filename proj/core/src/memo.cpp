// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/memo.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "ttr/error.hpp"
#include "ttr/ops.hpp"
#include "ttr/train.hpp"

namespace ttr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double entropy_of(std::span<const float> p) {
  double h = 0.0;
  for (float v : p) {
    if (v > kProbEpsilon) h -= static_cast<double>(v) * std::log(static_cast<double>(v));
  }
  return h;
}

// H of the column mean of a row-major [B, C] probability matrix.
double marginal_entropy_of(std::span<const float> probs, std::size_t b, std::size_t c) {
  std::vector<float> bar(c, 0.0f);
  for (std::size_t y = 0; y < c; ++y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < b; ++i) acc += probs[i * c + y];
    bar[y] = static_cast<float>(acc / static_cast<double>(b));
  }
  return entropy_of(bar);
}

int argmax_row(std::span<const float> logits) { return static_cast<int>(argmax(logits)); }

Objective objective_for(Strategy s) {
  switch (s) {
    case Strategy::ce_single_point: return Objective::conditional_entropy;
    case Strategy::pce: return Objective::pairwise_cross_entropy;
    default: return Objective::marginal_entropy;
  }
}

// Prediction on x with fixed parameters: reuse `stats` or re-estimate from x.
int predict_on_point(const Model<float>& model, const Image& x, const AdaptationConfig& config,
                     const BnStatistics<float>& stats) {
  NoGradGuard no_grad;
  const auto batch = to_batch<float>(x);
  if (config.bn_stats_source == BnStatsSource::original) {
    BnStatistics<float> own;
    return argmax_row(model.forward(batch, BnContext<float>::collect(config.prior_strength, own)).values());
  }
  return argmax_row(model.forward(batch, BnContext<float>::mixed(stats)).values());
}

EvalRecord base_record(const AdaptationConfig& config, int label) {
  EvalRecord r;
  r.label = label;
  r.strategy = config.strategy;
  return r;
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::none: return "none";
    case Strategy::bn_only: return "bn_only";
    case Strategy::tta: return "tta";
    case Strategy::memo: return "memo";
    case Strategy::ce_single_point: return "ce_single_point";
    case Strategy::pce: return "pce";
    case Strategy::tent_batch: return "tent_batch";
  }
  return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (auto s : {Strategy::none, Strategy::bn_only, Strategy::tta, Strategy::memo,
                 Strategy::ce_single_point, Strategy::pce, Strategy::tent_batch}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

std::string_view to_string(BnStatsSource source) {
  return source == BnStatsSource::augmented ? "augmented" : "original";
}

std::optional<BnStatsSource> parse_bn_stats_source(std::string_view name) {
  if (name == "augmented") return BnStatsSource::augmented;
  if (name == "original") return BnStatsSource::original;
  return std::nullopt;
}

void AdaptationConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size (B) must be >= 1");
  if (strategy == Strategy::pce && batch_size < 2) {
    throw ConfigError("pce needs batch_size (B) >= 2, got " + std::to_string(batch_size));
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and >= 0");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(prior_strength >= 0.0)) throw ConfigError("prior_strength must be >= 0 or inf");
  if (!(tent_prior_strength >= 0.0)) throw ConfigError("tent_prior_strength must be >= 0 or inf");
  if (threshold_fraction && !(*threshold_fraction > 0.0 && *threshold_fraction <= 1.0)) {
    throw ConfigError("threshold_fraction must lie in (0, 1]");
  }
  if (tent_batch_size < 1) throw ConfigError("tent_batch_size must be >= 1");
  if (rule.momentum < 0.0 || rule.beta1 < 0.0 || rule.beta1 >= 1.0 || rule.beta2 < 0.0 ||
      rule.beta2 >= 1.0 || rule.epsilon <= 0.0 || rule.weight_decay < 0.0) {
    throw ConfigError("update rule coefficients out of range");
  }
  policy.validate();
}

template <class T>
BnStatistics<T> single_point_bn_stats(const Model<T>& model, const Tensor<T>& batch,
                                      double prior_strength) {
  NoGradGuard no_grad;
  BnStatistics<T> stats;
  model.forward(batch, BnContext<T>::collect(prior_strength, stats));
  return stats;
}

template BnStatistics<float> single_point_bn_stats(const Model<float>&, const Tensor<float>&, double);
template BnStatistics<double> single_point_bn_stats(const Model<double>&, const Tensor<double>&,
                                                    double);

int tta_predict(const Model<float>& model, const Image& x, const AdaptationConfig& config,
                std::uint64_t seed) {
  return adapt_predict(model, x, 0, [&] {
           AdaptationConfig c = config;
           c.strategy = Strategy::tta;
           return c;
         }(), seed).prediction;
}

AdaptOutcome memo_adapt_predict(const Model<float>& model, const Image& x, int label,
                                const AdaptationConfig& config, std::uint64_t seed) {
  switch (config.strategy) {
    case Strategy::memo:
    case Strategy::ce_single_point:
    case Strategy::pce: break;
    default:
      throw ConfigError("memo_adapt_predict does not run strategy " +
                        std::string(to_string(config.strategy)));
  }
  const auto start = Clock::now();
  AdaptOutcome out;
  out.record = base_record(config, label);
  EvalRecord& rec = out.record;
  const Objective objective = objective_for(config.strategy);
  const std::size_t classes = model.num_classes();

  const std::vector<Image> augmented = sample_augmentations(x, config.batch_size, config.policy, seed);
  const Tensor<float> batch = to_batch<float>(std::span<const Image>(augmented));
  Model<float> theta = model;
  theta.zero_grad();
  Optimizer<float> opt(config.rule, theta.parameters(config.param_filter));
  BnStatistics<float> stats;  // from the first augmented forward; reused for x
  bool have_stats = false;
  bool fallback = false;

  try {
    for (std::size_t step = 0; step < config.steps; ++step) {
      BnStatistics<float> step_stats;
      const Tensor<float> probs = softmax(
          theta.forward(batch, BnContext<float>::collect(config.prior_strength, step_stats)));
      Tensor<float> loss = objective_value(objective, probs);
      if (step == 0) {
        stats = std::move(step_stats);
        have_stats = true;
        rec.loss_before = loss.item();
        rec.marginal_entropy = marginal_entropy_of(probs.values(), config.batch_size, classes);
        if (config.threshold_fraction &&
            rec.marginal_entropy <=
                *config.threshold_fraction * std::log(static_cast<double>(classes))) {
          break;
        }
      }
      require_finite_loss(loss, probs, objective);
      theta.zero_grad();
      loss.backward();
      if (!opt.step(config.lr)) throw NumericError("non-finite gradient at step " + std::to_string(step));
      rec.adapted = true;
    }
  } catch (const NumericError& e) {
    rec.flagged = true;
    rec.adapted = false;
    rec.note = e.what();
    fallback = true;
  }

  if (!have_stats) stats = single_point_bn_stats(model, batch, config.prior_strength);
  out.prediction = predict_on_point(fallback ? model : theta, x, config, stats);
  rec.prediction = out.prediction;
  rec.seconds = seconds_since(start);

  // Re-evaluation on the same copies and statistics; not part of the timed call.
  rec.loss_after = rec.loss_before;
  if (rec.adapted) {
    NoGradGuard no_grad;
    const auto probs = softmax(theta.forward(batch, BnContext<float>::mixed(stats)));
    rec.loss_after = objective_value(objective, probs).item();
  }
  if (!std::isfinite(rec.loss_before)) rec.loss_before = 0.0;
  if (!std::isfinite(rec.loss_after)) rec.loss_after = 0.0;
  if (!std::isfinite(rec.marginal_entropy)) rec.marginal_entropy = 0.0;
  if (!fallback) out.adapted = std::move(theta);
  return out;
}

AdaptOutcome adapt_predict(const Model<float>& model, const Image& x, int label,
                           const AdaptationConfig& config, std::uint64_t seed) {
  switch (config.strategy) {
    case Strategy::memo:
    case Strategy::ce_single_point:
    case Strategy::pce: return memo_adapt_predict(model, x, label, config, seed);
    case Strategy::tent_batch:
      throw ConfigError("tent_batch adapts over a stream; use tent_adapt");
    default: break;
  }
  NoGradGuard no_grad;
  const auto start = Clock::now();
  AdaptOutcome out;
  out.record = base_record(config, label);
  EvalRecord& rec = out.record;
  const std::size_t classes = model.num_classes();

  if (config.strategy == Strategy::none ||
      (config.strategy == Strategy::bn_only && config.bn_stats_source == BnStatsSource::original)) {
    const auto batch = to_batch<float>(x);
    BnStatistics<float> own;
    const auto logits = config.strategy == Strategy::none
                            ? model.forward(batch, BnContext<float>::eval())
                            : model.forward(batch, BnContext<float>::collect(config.prior_strength, own));
    out.prediction = argmax_row(logits.values());
    rec.seconds = seconds_since(start);
    rec.marginal_entropy = entropy_of(softmax(logits).values());
  } else {
    const std::vector<Image> augmented =
        sample_augmentations(x, config.batch_size, config.policy, seed);
    BnStatistics<float> stats;
    const auto probs = softmax(model.forward(to_batch<float>(std::span<const Image>(augmented)),
                                             BnContext<float>::collect(config.prior_strength, stats)));
    if (config.strategy == Strategy::tta) {
      const auto bar = marginal_distribution(probs);
      out.prediction = argmax_row(bar.values());
    } else {
      out.prediction = argmax_row(model.forward(to_batch<float>(x), BnContext<float>::mixed(stats)).values());
    }
    rec.seconds = seconds_since(start);
    rec.marginal_entropy = marginal_entropy_of(probs.values(), config.batch_size, classes);
  }
  rec.prediction = out.prediction;
  if (!std::isfinite(rec.marginal_entropy)) {
    rec.marginal_entropy = 0.0;
    rec.flagged = true;
    rec.note = "non-finite model output";
  }
  rec.loss_before = rec.loss_after = rec.marginal_entropy;
  return out;
}

TentOutcome tent_adapt(const Model<float>& model, std::span<const Image> stream,
                       std::span<const int> labels, const AdaptationConfig& config) {
  if (labels.size() != stream.size()) {
    throw Error("tent_adapt: " + std::to_string(stream.size()) + " images but " +
                std::to_string(labels.size()) + " labels");
  }
  TentOutcome out{{}, model};
  Model<float>& theta = out.final_model;
  std::optional<Optimizer<float>> opt;
  opt.emplace(config.rule, theta.parameters(config.tent_param_filter));
  const bool batch_stats = config.tent_prior_strength == 0.0;
  const std::size_t classes = model.num_classes();

  for (std::size_t first = 0; first < stream.size(); first += config.tent_batch_size) {
    const std::size_t n = std::min(config.tent_batch_size, stream.size() - first);
    if (config.episodic && first > 0) {
      theta = model;
      opt.emplace(config.rule, theta.parameters(config.tent_param_filter));
    }
    const auto start = Clock::now();
    const Tensor<float> batch = to_batch<float>(stream.subspan(first, n));
    BnStatistics<float> stats;
    auto ctx = batch_stats ? BnContext<float>::batch()
                           : BnContext<float>::collect(config.tent_prior_strength, stats);
    const Tensor<float> probs = softmax(theta.forward(batch, ctx));
    bool flagged = false;
    std::string note;
    try {
      Tensor<float> loss = conditional_entropy(probs);
      require_finite_loss(loss, probs, Objective::conditional_entropy);
      theta.zero_grad();
      loss.backward();
      if (!opt->step(config.lr)) throw NumericError("non-finite gradient");
    } catch (const NumericError& e) {
      flagged = true;
      note = e.what();
    }
    Tensor<float> after;
    {
      NoGradGuard no_grad;
      BnStatistics<float> after_stats;
      auto after_ctx = batch_stats ? BnContext<float>::batch()
                                   : BnContext<float>::collect(config.tent_prior_strength, after_stats);
      after = theta.forward(batch, after_ctx);
    }
    const double per_point = seconds_since(start) / static_cast<double>(n);
    const Tensor<float> after_probs = softmax(after);
    for (std::size_t i = 0; i < n; ++i) {
      EvalRecord rec = base_record(config, labels[first + i]);
      rec.index = first + i;
      rec.prediction = argmax_row(after.values().subspan(i * classes, classes));
      rec.loss_before = entropy_of(probs.values().subspan(i * classes, classes));
      rec.loss_after = entropy_of(after_probs.values().subspan(i * classes, classes));
      rec.marginal_entropy = rec.loss_before;
      rec.seconds = per_point;
      rec.adapted = !flagged;
      rec.flagged = flagged;
      rec.note = note;
      if (!std::isfinite(rec.loss_before)) rec.loss_before = 0.0;
      if (!std::isfinite(rec.loss_after)) rec.loss_after = 0.0;
      rec.marginal_entropy = rec.loss_before;
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace ttr
