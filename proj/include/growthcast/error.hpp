// Copyright 2026 The GrowthCast Authors. Apache 2.0 License.
//
// Exception hierarchy. Each class carries a stable name used as the
// machine-parsable prefix of CLI error lines and maps to one exit code.

#pragma once

#include <stdexcept>
#include <string>

namespace growthcast {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
  virtual int exit_code() const noexcept { return 1; }
};

/// Invalid or unknown configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "ConfigError"; }
  int exit_code() const noexcept override { return 2; }
};

/// Unreadable, malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "DataError"; }
  int exit_code() const noexcept override { return 3; }
};

/// Tensor shapes that do not fit together.
class ShapeError : public DataError {
 public:
  using DataError::DataError;
  const char* kind() const noexcept override { return "ShapeError"; }
};

/// A loss or gradient went non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "NumericError"; }
  int exit_code() const noexcept override { return 4; }
};

}  // namespace growthcast
