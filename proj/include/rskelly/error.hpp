#pragma once

#include <stdexcept>
#include <string>

namespace rskelly {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Discrete compounding would produce more atoms than allowed; use Monte Carlo instead.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// A portfolio growth ratio <K, R> was not strictly positive at some atom.
class NonPositiveReturn : public Error {
 public:
  using Error::Error;
};

class QuadratureNotConverged : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class DimensionTooLarge : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario text. The message carries line and field context.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed scenario that violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rskelly
