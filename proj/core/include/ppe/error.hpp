// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ppe {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Arguments violate a precondition (bad config, degenerate input).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inputs have incompatible dimensions or channel counts.
class ShapeError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A value cannot be represented in the requested encoding.
class RangeError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A byte stream does not follow the expected file layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing the filesystem failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Optimisation produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ppe
