// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallelism;
  std::optional<std::string> out;
};

void add_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "Run config (JSON)")->required();
  cmd->add_option("--seed", flags.seed, "Overrides the config seed");
  cmd->add_option("--parallelism", flags.parallelism, "Worker threads for evaluation");
  cmd->add_option("--out", flags.out, "Overrides the output directory");
}

int run(const Flags& flags, const std::function<void(const ttr::cli::RunConfig&, std::ostream&)>& command) {
  try {
    ttr::cli::RunConfig config = ttr::cli::load_config(flags.config);
    if (flags.seed) config.seed = *flags.seed;
    if (flags.parallelism) config.parallelism = *flags.parallelism;
    if (flags.out) config.output_dir = *flags.out;
    config.validate();
    command(config, std::cerr);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ttr::cli::exit_code_for(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Test-time robustness experiments: train, corrupt, evaluate and sweep"};
  app.require_subcommand(1);
  Flags flags;
  std::function<void(const ttr::cli::RunConfig&, std::ostream&)> command;

  struct Entry {
    const char* name;
    const char* help;
    void (*fn)(const ttr::cli::RunConfig&, std::ostream&);
  };
  const Entry entries[] = {
      {"train", "Train a model and write a checkpoint", &ttr::cli::cmd_train},
      {"eval", "Evaluate strategies on corrupted test splits", &ttr::cli::cmd_eval},
      {"sweep", "Sweep the number of augmented copies B", &ttr::cli::cmd_sweep},
      {"corrupt", "Export corrupted test splits as IDX files", &ttr::cli::cmd_corrupt},
  };
  for (const auto& entry : entries) {
    CLI::App* sub = app.add_subcommand(entry.name, entry.help);
    add_flags(sub, flags);
    sub->callback([&command, fn = entry.fn] { command = fn; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  return run(flags, command);
}
