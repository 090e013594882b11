// Copyright 2026 The HRA Lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hra_lab {

// Base class for every error raised by the library. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes that cannot be combined.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration (bad dims, rank too large, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A TaskId that does not resolve in the head registry.
class RoutingError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Violated API precondition (non-scalar loss, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Zero-length input sequence.
class EmptyInputError : public ContractError {
 public:
  using ContractError::ContractError;
};

}  // namespace hra_lab
