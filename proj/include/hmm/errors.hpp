#pragma once

#include <stdexcept>
#include <string>

namespace hmm {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point lies outside the domain an operation is defined on.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A complex parameter lies outside the validated continuation vicinity,
/// or the continued kernel normalizer is too small to divide by.
class ContinuationDomainError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Binary measure operation on different state spaces.
class SpaceMismatchError : public Error {
 public:
  using Error::Error;
};

/// A model or experiment is misconfigured (bad shapes, truncation box too
/// small for rejection sampling, invalid coefficients).
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

/// Filter normalizer collapsed below the representable range.
class UnderflowError : public Error {
 public:
  using Error::Error;
};

/// Monte Carlo estimation could not produce a trustworthy value.
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Work requested exceeds a declared budget (enumeration size, aliasing).
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace hmm
