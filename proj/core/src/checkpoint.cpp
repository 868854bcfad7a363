// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ttr/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "ttr/error.hpp"

namespace ttr {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'T', 'R', 'C', 'K', 'P', 'T', '\0'};

template <class UInt>
void put_le(std::string& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

  template <class UInt>
  UInt get_le(const char* what) {
    need(sizeof(UInt), what);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) {
      v |= static_cast<UInt>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(UInt);
    return v;
  }
  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(CheckpointError::Kind::truncated,
                            std::string("truncated checkpoint while reading ") + what);
    }
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

template <class F>
void for_each_buffer(Model<float>& model, F f) {
  for (auto& layer : model.layers()) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, Conv2dLayer<float>> || std::is_same_v<L, LinearLayer<float>>) {
            f(l.weight.mutable_values());
            f(l.bias.mutable_values());
          } else if constexpr (std::is_same_v<L, BatchNormLayer<float>>) {
            f(l.gamma.mutable_values());
            f(l.beta.mutable_values());
            f(std::span<float>(l.running_mean));
            f(std::span<float>(l.running_var));
          }
        },
        layer);
  }
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

CheckpointMetadata parse_metadata(const std::string& descriptor) {
  CheckpointMetadata meta;
  std::istringstream in(descriptor);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("meta ", 0) != 0) continue;
    std::istringstream fields(line.substr(5));
    std::string key;
    fields >> key;
    if (key == "epochs") {
      fields >> meta.epochs;
    } else if (key == "seed") {
      fields >> meta.seed;
    } else if (key == "train_accuracy") {
      fields >> meta.final_train_accuracy;
    } else if (key == "config") {
      std::string rest;
      std::getline(fields, rest);
      if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
      meta.config = rest;
    }
  }
  return meta;
}

std::string architecture_only(const std::string& descriptor) {
  std::istringstream in(descriptor);
  std::string line, out;
  while (std::getline(in, line)) {
    if (line.rfind("meta ", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

struct RawCheckpoint {
  std::string descriptor;
  std::vector<float> payload;
};

RawCheckpoint read_raw(const std::filesystem::path& path, std::uint32_t reader_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open checkpoint " + path.string());
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  const std::string magic = r.get_bytes(kMagic.size(), "magic");
  if (std::memcmp(magic.data(), kMagic.data(), kMagic.size()) != 0) {
    throw CheckpointError(CheckpointError::Kind::unrecognized,
                          "unrecognized checkpoint: bad magic bytes in " + path.string());
  }
  const auto version = r.get_le<std::uint32_t>("version");
  if (version != reader_version) {
    throw CheckpointError(CheckpointError::Kind::version,
                          "checkpoint version " + std::to_string(version) +
                              " is not supported by this reader (expects " +
                              std::to_string(reader_version) + ")");
  }
  RawCheckpoint raw;
  const auto length = r.get_le<std::uint32_t>("descriptor length");
  raw.descriptor = r.get_bytes(length, "descriptor");
  const auto count = r.get_le<std::uint64_t>("payload length");
  raw.payload.resize(count);
  for (auto& v : raw.payload) v = std::bit_cast<float>(r.get_le<std::uint32_t>("payload"));
  if (!r.at_end()) {
    throw CheckpointError(CheckpointError::Kind::architecture, "trailing bytes after checkpoint payload");
  }
  return raw;
}

void fill(Model<float>& model, const std::vector<float>& payload) {
  std::size_t expected = 0;
  for_each_buffer(model, [&](std::span<float> b) { expected += b.size(); });
  if (expected != payload.size()) {
    throw CheckpointError(CheckpointError::Kind::architecture,
                          "checkpoint payload holds " + std::to_string(payload.size()) +
                              " values, architecture needs " + std::to_string(expected));
  }
  std::size_t pos = 0;
  for_each_buffer(model, [&](std::span<float> b) {
    std::copy(payload.begin() + static_cast<long>(pos), payload.begin() + static_cast<long>(pos + b.size()), b.begin());
    pos += b.size();
  });
}

}  // namespace

void save_checkpoint(const Model<float>& model, const CheckpointMetadata& metadata,
                     const std::filesystem::path& path) {
  std::string descriptor = model.descriptor();
  descriptor += "meta epochs " + std::to_string(metadata.epochs) + "\n";
  descriptor += "meta seed " + std::to_string(metadata.seed) + "\n";
  std::ostringstream acc;
  acc.precision(17);
  acc << metadata.final_train_accuracy;
  descriptor += "meta train_accuracy " + acc.str() + "\n";
  if (!metadata.config.empty()) descriptor += "meta config " + one_line(metadata.config) + "\n";

  std::string out(kMagic.begin(), kMagic.end());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(descriptor.size()));
  out += descriptor;
  std::vector<float> payload;
  Model<float> copy = model;
  for_each_buffer(copy, [&](std::span<float> b) { payload.insert(payload.end(), b.begin(), b.end()); });
  put_le<std::uint64_t>(out, payload.size());
  for (float v : payload) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw CheckpointError(CheckpointError::Kind::io, "cannot write checkpoint " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw CheckpointError(CheckpointError::Kind::io, "failed writing checkpoint " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, std::uint32_t reader_version) {
  RawCheckpoint raw = read_raw(path, reader_version);
  Model<float> model = model_from_descriptor(raw.descriptor);
  fill(model, raw.payload);
  return {std::move(model), parse_metadata(raw.descriptor)};
}

CheckpointMetadata load_checkpoint_into(Model<float>& model, const std::filesystem::path& path) {
  RawCheckpoint raw = read_raw(path, kCheckpointVersion);
  if (architecture_only(raw.descriptor) != model.descriptor()) {
    throw CheckpointError(CheckpointError::Kind::architecture,
                          "checkpoint architecture does not match the target model");
  }
  fill(model, raw.payload);
  return parse_metadata(raw.descriptor);
}

}  // namespace ttr
