// Copyright 2026 The grusnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grusnf {

// Mirrors gsnf_status in the public C header; the numeric values are the CLI
// exit codes.
enum class ErrorKind : int {
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
  kIo = 5,
  kContract = 6,
  kInternal = 7,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Mismatched matrix or vector dimensions.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what)
      : Error(ErrorKind::kContract, "shape error: " + what) {}
};

/// A caller broke a precondition (empty input, C > D, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error(ErrorKind::kContract, "contract error: " + what) {}
};

/// Non-finite value produced or consumed. `index` is the offending element
/// (parameter index for the gradient checker) or npos when not applicable.
class NumericError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  explicit NumericError(const std::string& what, std::size_t index = npos)
      : Error(ErrorKind::kNumeric, "numeric error: " + what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Malformed keypoint file, checkpoint or sample file.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::size_t line = 0)
      : Error(ErrorKind::kData, what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorKind::kConfig, "config error: " + what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what)
      : Error(ErrorKind::kIo, "i/o error: " + what) {}
};

}  // namespace grusnf
