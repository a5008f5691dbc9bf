/*
 * Copyright 2026 The StaleFL Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
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

namespace stalefl {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched vector/matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An operation was called with inputs violating its precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration; `key()` names the offending key when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string key = {},
                       int line = 0)
      : Error(message), key_(std::move(key)), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

class PartitionError : public Error {
 public:
  using Error::Error;
};

class AggregationError : public Error {
 public:
  using Error::Error;
};

// Gradient inversion could not recover from non-finite inner values.
class InversionError : public Error {
 public:
  using Error::Error;
};

// Global weights became non-finite during a simulation run.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace stalefl
