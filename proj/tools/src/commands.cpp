// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "ttr/checkpoint.hpp"
#include "ttr/error.hpp"
#include "ttr/evaluate.hpp"
#include "ttr/formats.hpp"
#include "ttr/metrics.hpp"
#include "ttr/results_csv.hpp"

namespace ttr::cli {

namespace fs = std::filesystem;

namespace {

fs::path prepare_out(const RunConfig& config) {
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

// Clean split first when requested, then every kind x severity cell.
std::vector<Dataset> test_cells(const RunConfig& config, bool with_clean) {
  const Dataset clean = build_test_split(config);
  std::vector<Dataset> cells;
  if (with_clean && config.corruptions.include_clean) cells.push_back(clean);
  for (CorruptionKind kind : config.corruptions.kinds) {
    for (int severity : config.corruptions.severities) {
      cells.push_back(corrupt(clean, {kind, severity, config.corruptions.seed}));
    }
  }
  return cells;
}

std::string cell_label(const Dataset& d) { return d.split.to_string(); }

Model<float> load_model(const RunConfig& config) {
  return load_checkpoint(config.checkpoint_path()).model;
}

void write_records(std::span<const RunResult> results, const fs::path& path) {
  auto out = open_text(path);
  out << "strategy,corruption,severity,index,label,prediction,adapted,flagged,loss_before,"
         "loss_after,marginal_entropy\n";
  for (const auto& r : results) {
    for (const auto& e : r.records) {
      out << to_string(r.strategy) << ',' << r.corruption << ',' << r.severity << ',' << e.index
          << ',' << e.label << ',' << e.prediction << ',' << e.adapted << ',' << e.flagged << ','
          << format_double(e.loss_before) << ',' << format_double(e.loss_after) << ','
          << format_double(e.marginal_entropy) << '\n';
    }
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::vector<RunResult> shifted_only(std::span<const RunResult> results, Strategy s) {
  std::vector<RunResult> out;
  for (const auto& r : results) {
    if (r.strategy == s && !r.corruption.empty()) out.push_back(r);
  }
  return out;
}

void write_summary(const RunConfig& config, std::span<const RunResult> results,
                   const fs::path& path, std::ostream& log) {
  const auto reference = shifted_only(results, config.reference_strategy);
  const auto ref_cells = cells_from(reference);
  auto out = open_text(path);
  out << "strategy,average_error,mce\n";
  for (Strategy s : config.strategies) {
    const auto mine = shifted_only(results, s);
    if (mine.empty()) continue;
    const auto cells = cells_from(mine);
    const auto summary = ref_cells.empty() ? corruption_error_summary(cells)
                                           : corruption_error_summary(cells, ref_cells);
    for (const auto& w : summary.warnings) log << "warning: " << to_string(s) << ": " << w << "\n";
    out << to_string(s) << ',' << format_double(summary.average_error) << ','
        << (summary.mce ? format_double(*summary.mce) : std::string()) << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace

void cmd_train(const RunConfig& config, std::ostream& log) {
  const fs::path dir = prepare_out(config);
  const Dataset train = build_train_split(config);
  const Dataset heldout = build_test_split(config);
  if (train.empty()) throw ConfigError("training split is empty");
  const Image& first = train.images.front();
  Model<float> model = build_model(config, {first.channels, first.height, first.width});

  TrainOptions options = config.train;
  options.seed = config.seed;
  log << "train: " << train.size() << " images, " << options.epochs << " epochs\n";
  const TrainHistory history = train_supervised(model, train, &heldout, options);

  const fs::path history_path = dir / "train_history.csv";
  {
    auto out = open_text(history_path);
    out << "epoch,train_loss,train_accuracy,heldout_loss,heldout_accuracy\n";
    for (const auto& e : history.epochs) {
      out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_accuracy)
          << ',' << format_double(e.heldout_loss) << ',' << format_double(e.heldout_accuracy) << '\n';
    }
    if (!out) throw Error("failed writing " + history_path.string());
  }
  write_sidecar(config, history_path);

  CheckpointMetadata meta;
  meta.epochs = options.epochs;
  meta.seed = config.seed;
  meta.final_train_accuracy = history.final_train_accuracy;
  meta.config = to_json(config).dump();
  const fs::path ckpt = config.checkpoint_path();
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  save_checkpoint(model, meta, ckpt);
  write_sidecar(config, ckpt);
  const double heldout_acc = history.epochs.empty() ? 0.0 : history.epochs.back().heldout_accuracy;
  log << "train: final train accuracy " << history.final_train_accuracy << ", held-out accuracy "
      << heldout_acc << "; wrote " << ckpt.string() << "\n";
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  const Model<float> model = load_model(config);
  const fs::path dir = prepare_out(config);
  std::vector<RunResult> results;
  for (const Dataset& cell : test_cells(config, true)) {
    for (Strategy s : config.strategies) {
      AdaptationConfig adapt = config.adapt;
      adapt.strategy = s;
      RunResult r = evaluate(model, cell, adapt, config.seed, config.parallelism);
      log << "eval: " << cell_label(cell) << " " << to_string(s) << " error " << r.error_pct
          << "% adapted " << r.adapted_fraction() << " flagged " << r.flagged << "\n";
      for (const auto& e : r.records) {
        if (e.flagged) log << "  point " << e.index << " flagged: " << e.note << "\n";
      }
      results.push_back(std::move(r));
    }
  }
  const fs::path results_path = dir / "results.csv";
  write_results(std::span<const RunResult>(results), results_path);
  write_sidecar(config, results_path);
  const fs::path records_path = dir / "records.csv";
  write_records(results, records_path);
  write_sidecar(config, records_path);
  if (!config.corruptions.kinds.empty() && !config.corruptions.severities.empty()) {
    const fs::path summary_path = dir / "summary.csv";
    write_summary(config, results, summary_path, log);
    write_sidecar(config, summary_path);
  }
}

void cmd_sweep(const RunConfig& config, std::ostream& log) {
  const Model<float> model = load_model(config);
  const fs::path dir = prepare_out(config);
  AdaptationConfig adapt = config.adapt;
  adapt.strategy = config.sweep_strategy;
  std::vector<RunResult> all;
  for (const Dataset& cell : test_cells(config, false)) {
    auto series = sweep_B(model, cell, adapt, config.sweep_B, config.seed, config.parallelism);
    for (const auto& r : series) {
      log << "sweep: " << cell_label(cell) << " B=" << r.config.batch_size << " error "
          << r.error_pct << "% sec/point " << r.sec_per_point << "\n";
    }
    const fs::path plot = dir / ("plot_" + cell.split.corruption + "_s" +
                                 std::to_string(cell.split.severity) + ".csv");
    write_plot_data(std::span<const RunResult>(series), plot);
    write_sidecar(config, plot);
    all.insert(all.end(), series.begin(), series.end());
  }
  const fs::path sweep_path = dir / "sweep.csv";
  write_results(std::span<const RunResult>(all), sweep_path);
  write_sidecar(config, sweep_path);
}

void cmd_corrupt(const RunConfig& config, std::ostream& log) {
  const fs::path dir = prepare_out(config);
  const fs::path labels = dir / "labels.idx";
  for (const Dataset& cell : test_cells(config, false)) {
    const fs::path images = dir / (cell.split.corruption + "_s" +
                                   std::to_string(cell.split.severity) + "-images.idx");
    write_idx(cell, images, labels);
    write_sidecar(config, images);
    log << "corrupt: wrote " << images.string() << " (" << cell.size() << " images)\n";
  }
  write_sidecar(config, labels);
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataFormatError*>(&e) ||
      dynamic_cast<const CheckpointError*>(&e)) {
    return 2;
  }
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  return 1;
}

}  // namespace ttr::cli
