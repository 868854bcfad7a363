// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "ttr/dataset.hpp"

namespace ttr {

// IDX: big-endian magic 0x000008NN (unsigned-byte data, NN dimensions) and NN
// big-endian u32 extents. Images use 3 dims (N, rows, cols; one channel) or
// 4 dims (N, C, rows, cols); labels use 1 dim.
std::vector<Image> load_idx_images(const std::filesystem::path& path);
std::vector<int> load_idx_labels(const std::filesystem::path& path);
/// Pairs an image file with a label file; every label must be < num_classes.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t num_classes);
/// Pixels are stored as round(255 * value).
void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels);

// CIFAR binary: rows of 1 label byte followed by channels*size*size pixel
// bytes in channel-major order.
Dataset load_cifar_binary(const std::filesystem::path& path, std::size_t num_classes = 10,
                          std::size_t channels = 3, std::size_t size = 32);
void write_cifar_binary(const Dataset& data, const std::filesystem::path& path);

}  // namespace ttr
