// Copyright 2026 The ttr Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ttr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible for the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or received a non-finite or out-of-domain value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the differentiation graph (non-scalar loss, reused graph).
class GraphError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  enum class Kind { unrecognized, version, truncated, architecture, io };
  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class DataFormatError : public Error {
 public:
  enum class Kind { bad_magic, truncated, label_range, dimensions, io };
  DataFormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ttr
