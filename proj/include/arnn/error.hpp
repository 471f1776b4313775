/*
 * Copyright 2026 The ARNN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace arnn {

/// Process exit codes shared by every command-line entry point.
enum class ExitCode : int {
  kSuccess = 0,
  kConfigError = 2,
  kDataError = 3,
  kNumericDivergence = 4,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kDataError; }
};

/// Bad or missing configuration, including batch_lanes < 2 and missing
/// stage prerequisites.
class ConfigError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kConfigError; }
};

/// Malformed input, schema or vocabulary problems, empty splits, load
/// failures.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Tensor shape disagreement. Reported as a data error at the process level.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, undefined losses, divergence.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override {
    return ExitCode::kNumericDivergence;
  }
};

}  // namespace arnn
