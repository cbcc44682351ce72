// Copyright 2026 The garec Authors.
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

namespace garec {

// Base of every error raised by the library. The CLI maps subclasses to exit
// codes: ValidationError -> 2, MissingEmbeddingError -> 3, anything else -> 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input (corpus records, embedding files, CSVs).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A vector with zero L2 norm was used where a direction is required.
class ZeroNormError : public ValidationError {
 public:
  explicit ZeroNormError(const std::string& what_key)
      : ValidationError("zero-norm vector: " + what_key), key_(what_key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class DimensionMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Lookup of an embedding that scoring cannot proceed without.
class MissingEmbeddingError : public Error {
 public:
  explicit MissingEmbeddingError(const std::string& key)
      : Error("missing embedding: " + key), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace garec
