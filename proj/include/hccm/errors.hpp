// Copyright 2026 The HCCM Authors. All Rights Reserved.
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

#ifndef HCCM_ERRORS_HPP_
#define HCCM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace hccm {

// Base for every failure the toolkit raises on purpose. The CLI maps
// ConfigError to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor extents do not line up (matmul inner dims, concat extents, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse: non-scalar backward root, reused tape, stride < 1, ...
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or malformed input records.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// softmax/attention asked to normalize over an empty set.
class EmptyAttentionError : public Error {
 public:
  using Error::Error;
};

// AUC over a single-class label vector.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Requested pic id absent from the feature-map cache.
class CacheMissError : public Error {
 public:
  using Error::Error;
};

// Cache file was built from different frozen parameters.
class StaleCacheError : public Error {
 public:
  using Error::Error;
};

// Requested pic id absent from the serving representation table.
class TableMissError : public Error {
 public:
  using Error::Error;
};

// Operation not defined for this model variant (e.g. exporting a table
// from a model without a visual path).
class UnsupportedVariantError : public Error {
 public:
  using Error::Error;
};

// File I/O failures and corrupt binary artifacts.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace hccm

#endif  // HCCM_ERRORS_HPP_
