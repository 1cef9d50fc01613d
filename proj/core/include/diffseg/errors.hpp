// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace diffseg {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Incompatible matrix/sequence shapes. Messages name both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (ranges, parities, unknown keys).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented contract (non-one-hot rows, duplicate ids, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data. Carries the byte offset where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t byte_offset)
      : Error(msg + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}
  std::size_t byte_offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Filesystem failure. Message includes the path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace diffseg
