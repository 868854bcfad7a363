// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "ttr/corrupt.hpp"
#include "ttr/dataset.hpp"
#include "ttr/memo.hpp"
#include "ttr/model.hpp"
#include "ttr/train.hpp"

namespace ttr::cli {

enum class DataSource { synthetic, idx, cifar };

struct DataConfig {
  DataSource source = DataSource::synthetic;
  std::size_t num_classes = 4;
  std::size_t image_size = 32;
  std::size_t channels = 1;
  std::size_t train_per_class = 500;
  std::size_t test_per_class = 250;
  std::uint64_t train_seed = 1;
  std::uint64_t test_seed = 2;
  double illumination = 0.12;
  double sensor_noise = 0.05;
  std::string train_images, train_labels, test_images, test_labels;  // idx
  std::string train_file, test_file;                                  // cifar
  std::size_t max_test_points = 0;  // 0 keeps the whole test split
};

struct ModelConfig {
  std::string arch = "conv_small";  // conv_small | mlp_bn
  std::vector<std::size_t> widths{16, 32, 32};
  std::uint64_t init_seed = 7;
};

struct CorruptionGrid {
  std::vector<CorruptionKind> kinds{CorruptionKind::gaussian_noise};
  std::vector<int> severities{4};
  std::uint64_t seed = 11;
  bool include_clean = false;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  std::string output_dir = "ttr_out";
  std::string checkpoint;  // empty: <output_dir>/model.ckpt
  DataConfig data;
  ModelConfig model;
  TrainOptions train;
  CorruptionGrid corruptions;
  std::vector<Strategy> strategies{Strategy::none, Strategy::bn_only, Strategy::tta, Strategy::memo};
  AdaptationConfig adapt;
  Strategy reference_strategy = Strategy::none;  // mCE normalization
  Strategy sweep_strategy = Strategy::memo;
  std::vector<std::size_t> sweep_B{1, 2, 4, 8, 16, 32};

  std::filesystem::path checkpoint_path() const;
  /// Throws ConfigError on inconsistent values.
  void validate() const;
};

/// Built-in defaults; configs/defaults.json mirrors them.
RunConfig default_config();

/// Applies `doc` over `base`. Unknown keys and wrongly typed values throw
/// ConfigError naming the offending key path.
RunConfig apply_json(RunConfig base, const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
/// Complete document: apply_json(default_config(), to_json(c)) == c.
nlohmann::json to_json(const RunConfig& config);

/// Writes `<file>.config.json` holding the resolved config.
void write_sidecar(const RunConfig& config, const std::filesystem::path& file);

Dataset build_train_split(const RunConfig& config);
Dataset build_test_split(const RunConfig& config);
Model<float> build_model(const RunConfig& config, const Shape& input_shape);

}  // namespace ttr::cli
