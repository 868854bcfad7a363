// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

#include "config.hpp"

namespace ttr::cli {

// Each command writes under config.output_dir and a `<file>.config.json`
// sidecar next to every output file. Library errors propagate to the caller.

/// Trains a model; writes the checkpoint and train_history.csv.
void cmd_train(const RunConfig& config, std::ostream& log);
/// Evaluates every strategy on every requested cell; writes results.csv,
/// records.csv and summary.csv.
void cmd_eval(const RunConfig& config, std::ostream& log);
/// Sweeps B for sweep_strategy; writes sweep.csv and plot_<kind>_s<sev>.csv.
void cmd_sweep(const RunConfig& config, std::ostream& log);
/// Writes <kind>_s<sev>-images.idx per cell plus the shared labels.idx.
void cmd_corrupt(const RunConfig& config, std::ostream& log);

/// Exit status for an exception escaping a command: 2 for config, data-format
/// and checkpoint errors, 3 for numeric failures, 1 otherwise.
int exit_code_for(const std::exception& e);

}  // namespace ttr::cli
