// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace reachrec {

/// Bad input data: malformed files, violated format invariants, shape
/// mismatches between a model file and its declared config.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// A config that cannot produce valid output (empty ranges, impossible
/// geometry, non-positive ratios).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Violated internal invariant; a bug, not a user error.
class InternalError : public std::logic_error {
public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace reachrec
