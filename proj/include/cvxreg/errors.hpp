#pragma once

#include <stdexcept>
#include <string>

namespace cvxreg {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A query, dataset, or model has mismatched dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An estimator configuration violates its invariants (e.g. WRCR with l0 > u0).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A dataset is malformed (non-finite entries, bad CSV, empty).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A document could not be parsed; the message carries the location.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// An object parsed correctly but violates a semantic invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// The conic solver did not return an optimal certificate.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace cvxreg
