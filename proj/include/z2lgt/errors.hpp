#pragma once

#include <stdexcept>
#include <string>

namespace z2lgt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad index, dimension mismatch, malformed loop or configuration value.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A loop that bounds no surface in the complex, or a configuration outside a required set.
class Infeasible : public Error {
 public:
  using Error::Error;
};

/// An exact computation that would exceed its enumeration budget.
class SizeRefusal : public Error {
 public:
  using Error::Error;
};

/// Parameters outside the regime in which a bound is stated.
class HypothesisViolated : public Error {
 public:
  using Error::Error;
};

}  // namespace z2lgt
