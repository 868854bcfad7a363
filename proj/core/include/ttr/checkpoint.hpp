// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ttr/model.hpp"

namespace ttr {

// Layout, all integers little-endian:
//   8 bytes   magic "TTRCKPT\0"
//   u32       format version
//   u32       descriptor length L, then L bytes of UTF-8 text: the model
//             architecture (Model::descriptor()) followed by "meta" lines
//   u64       payload float count P, then P IEEE-754 binary32 values:
//             per layer in declaration order, conv/linear weight then bias,
//             batch-norm gamma, beta, running mean, running variance.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMetadata {
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  double final_train_accuracy = 0.0;
  std::string config;  // resolved run configuration, single line
};

struct LoadedCheckpoint {
  Model<float> model;
  CheckpointMetadata metadata;
};

void save_checkpoint(const Model<float>& model, const CheckpointMetadata& metadata,
                     const std::filesystem::path& path);

/// Throws CheckpointError whose kind() distinguishes unrecognized files,
/// version mismatches, truncation and malformed architectures.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::uint32_t reader_version = kCheckpointVersion);

/// Loads weights into an existing model; the stored architecture must match.
CheckpointMetadata load_checkpoint_into(Model<float>& model, const std::filesystem::path& path);

}  // namespace ttr
