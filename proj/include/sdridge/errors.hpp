#pragma once

#include <stdexcept>
#include <string>

namespace sdridge {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument value (non-positive lambda, bad grid, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input data violates an invariant (non-finite entries, empty set, shape mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (non-convergence, invalid fixed point).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain where a closed form is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// The fresh-X mixed-loss objective is not strictly convex at the requested weight.
class ConvexityError : public Error {
 public:
  using Error::Error;
};

/// GCV denominator 1 - df/n is too close to zero.
class CorrectionBlowupError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Malformed CSV / config input.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace sdridge
