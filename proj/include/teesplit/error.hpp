#pragma once

#include <stdexcept>
#include <string>

namespace teesplit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or model shapes disagree, or an input cannot be shaped as requested.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A name (architecture, boundary label, file) could not be resolved.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (bad hyperparameters, non-monotone
/// calibration, malformed file, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Numerical failure such as a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A trust-boundary rule was broken during a simulated run.
class LedgerViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace teesplit
