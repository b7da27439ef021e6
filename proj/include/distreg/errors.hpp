// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace distreg {

/// Shape disagreement between operands (rows/cols mismatch).
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Operation called in the wrong object state (e.g. backward without a
/// cached training forward, or a two-head accessor on a single-head net).
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

/// Numeric argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Scale estimate collapsed to zero (all residuals equal).
class DegenerateScaleError : public std::runtime_error {
 public:
  explicit DegenerateScaleError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file; the message names the offending row when known.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

/// Training loss became non-finite; carries the diagnostic context.
class TrainingDiverged : public std::runtime_error {
 public:
  explicit TrainingDiverged(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid experiment configuration; the message lists every violation found.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace distreg
