#pragma once

#include <stdexcept>
#include <string>

namespace equivmd {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector/matrix sizes do not line up.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Matrix is not symmetric positive-definite (e.g. a degenerate sample
/// covariance when n <= p, or collapsed resampling weights).
class NotSpd : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iterative routine exhausted its iteration budget.
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class EmptyInput : public Error {
 public:
  using Error::Error;
};

class UnequalSampleSizes : public Error {
 public:
  using Error::Error;
};

/// Resampling weight vector is invalid (negative entries, wrong sum).
class WeightError : public Error {
 public:
  using Error::Error;
};

/// The BCa level adjustment denominator vanished; callers fall back to the
/// plain percentile rule.
class BcaSingularity : public Error {
 public:
  using Error::Error;
};

/// An ABC weight-space evaluation failed numerically (typically NotSpd at a
/// perturbed weight vector).
class AbcNumericalFailure : public Error {
 public:
  using Error::Error;
};

class UnknownScenario : public Error {
 public:
  using Error::Error;
};

/// A results collection does not cover the full (scenario, method, n) grid.
class IncompleteGrid : public Error {
 public:
  using Error::Error;
};

/// Malformed input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace equivmd
