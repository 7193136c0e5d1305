#pragma once

#include <stdexcept>
#include <string>

namespace robustpred {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition (non-finite values, bad parameters).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Outlier labels in the training set are all of one class, so the gate
/// cannot be fitted. Raising alpha usually fixes it.
class SingleClassError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A computation produced a value outside its mathematical range.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (CSV cell, truncated model file, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Model file written by an incompatible schema version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace robustpred
