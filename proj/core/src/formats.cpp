// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/formats.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>

#include "ttr/error.hpp"

namespace ttr {

namespace {

using Kind = DataFormatError::Kind;

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError(Kind::io, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError(Kind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataFormatError(Kind::io, "failed writing " + path.string());
}

std::uint32_t be32(const std::string& b, std::size_t pos) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3]));
}

void put_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

struct IdxHeader {
  std::vector<std::uint32_t> dims;
  std::size_t data_offset = 0;
};

IdxHeader parse_idx_header(const std::string& bytes, const std::filesystem::path& path,
                           std::initializer_list<std::uint32_t> accepted_magics) {
  if (bytes.size() < 4) throw DataFormatError(Kind::truncated, "truncated IDX header in " + path.string());
  const std::uint32_t magic = be32(bytes, 0);
  bool ok = false;
  for (auto m : accepted_magics) ok = ok || m == magic;
  if (!ok) {
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", magic);
    throw DataFormatError(Kind::bad_magic, "bad IDX magic " + std::string(hex) + " in " + path.string());
  }
  IdxHeader h;
  const std::size_t ndims = magic & 0xff;
  if (bytes.size() < 4 + 4 * ndims) {
    throw DataFormatError(Kind::truncated, "truncated IDX dimensions in " + path.string());
  }
  for (std::size_t i = 0; i < ndims; ++i) h.dims.push_back(be32(bytes, 4 + 4 * i));
  h.data_offset = 4 + 4 * ndims;
  std::size_t expected = 1;
  for (auto d : h.dims) expected *= d;
  if (bytes.size() - h.data_offset < expected) {
    throw DataFormatError(Kind::truncated, "truncated IDX payload in " + path.string() + ": expected " +
                                               std::to_string(expected) + " bytes, found " +
                                               std::to_string(bytes.size() - h.data_offset));
  }
  return h;
}

std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

std::vector<Image> load_idx_images(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const auto h = parse_idx_header(bytes, path, {0x00000803u, 0x00000804u});
  const std::size_t n = h.dims[0];
  const std::size_t c = h.dims.size() == 4 ? h.dims[1] : 1;
  const std::size_t rows = h.dims[h.dims.size() - 2];
  const std::size_t cols = h.dims[h.dims.size() - 1];
  std::vector<Image> images;
  images.reserve(n);
  std::size_t pos = h.data_offset;
  for (std::size_t i = 0; i < n; ++i) {
    Image im(c, rows, cols);
    for (auto& v : im.pixels) v = static_cast<float>(static_cast<unsigned char>(bytes[pos++])) / 255.0f;
    images.push_back(std::move(im));
  }
  return images;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  const auto h = parse_idx_header(bytes, path, {0x00000801u});
  std::vector<int> labels(h.dims[0]);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<unsigned char>(bytes[h.data_offset + i]);
  }
  return labels;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 std::size_t num_classes) {
  Dataset data;
  data.images = load_idx_images(images);
  data.labels = load_idx_labels(labels);
  data.num_classes = num_classes;
  data.split = SplitTag{SplitKind::test_clean, "", 0};
  data.name = images.stem().string();
  data.provenance = "idx:" + images.string() + "," + labels.string();
  if (data.images.size() != data.labels.size()) {
    throw DataFormatError(Kind::dimensions, "IDX image count " + std::to_string(data.images.size()) +
                                                " differs from label count " +
                                                std::to_string(data.labels.size()));
  }
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (static_cast<std::size_t>(data.labels[i]) >= num_classes) {
      throw DataFormatError(Kind::label_range, "label " + std::to_string(data.labels[i]) + " at index " +
                                                   std::to_string(i) + " is outside [0, " +
                                                   std::to_string(num_classes) + ")");
    }
  }
  return data;
}

void write_idx(const Dataset& data, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
  std::string img;
  const Image proto = data.images.empty() ? Image(1, 0, 0) : data.images.front();
  const bool multi = proto.channels != 1;
  put_be32(img, multi ? 0x00000804u : 0x00000803u);
  put_be32(img, static_cast<std::uint32_t>(data.size()));
  if (multi) put_be32(img, static_cast<std::uint32_t>(proto.channels));
  put_be32(img, static_cast<std::uint32_t>(proto.height));
  put_be32(img, static_cast<std::uint32_t>(proto.width));
  for (const auto& im : data.images) {
    if (!im.same_shape(proto)) throw DataFormatError(Kind::dimensions, "write_idx: mixed image shapes");
    for (float v : im.pixels) img.push_back(static_cast<char>(quantize(v)));
  }
  std::string lab;
  put_be32(lab, 0x00000801u);
  put_be32(lab, static_cast<std::uint32_t>(data.labels.size()));
  for (int l : data.labels) {
    if (l < 0 || l > 255) throw DataFormatError(Kind::label_range, "write_idx: label does not fit a byte");
    lab.push_back(static_cast<char>(static_cast<unsigned char>(l)));
  }
  write_all(images, img);
  write_all(labels, lab);
}

Dataset load_cifar_binary(const std::filesystem::path& path, std::size_t num_classes,
                          std::size_t channels, std::size_t size) {
  const std::string bytes = read_all(path);
  const std::size_t row = 1 + channels * size * size;
  if (bytes.size() % row != 0) {
    throw DataFormatError(Kind::truncated, "truncated CIFAR file " + path.string() + ": " +
                                               std::to_string(bytes.size()) +
                                               " bytes is not a multiple of the " +
                                               std::to_string(row) + "-byte row");
  }
  Dataset data;
  data.num_classes = num_classes;
  data.split = SplitTag{SplitKind::test_clean, "", 0};
  data.name = path.stem().string();
  data.provenance = "cifar:" + path.string();
  for (std::size_t r = 0; r < bytes.size() / row; ++r) {
    const std::size_t base = r * row;
    const int label = static_cast<unsigned char>(bytes[base]);
    if (static_cast<std::size_t>(label) >= num_classes) {
      throw DataFormatError(Kind::label_range, "CIFAR row " + std::to_string(r) + " has label " +
                                                   std::to_string(label) + " outside [0, " +
                                                   std::to_string(num_classes) + ")");
    }
    Image im(channels, size, size);
    for (std::size_t i = 0; i < im.pixels.size(); ++i) {
      im.pixels[i] = static_cast<float>(static_cast<unsigned char>(bytes[base + 1 + i])) / 255.0f;
    }
    data.images.push_back(std::move(im));
    data.labels.push_back(label);
  }
  return data;
}

void write_cifar_binary(const Dataset& data, const std::filesystem::path& path) {
  std::string out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(data.labels[i])));
    for (float v : data.images[i].pixels) out.push_back(static_cast<char>(quantize(v)));
  }
  write_all(path, out);
}

}  // namespace ttr
