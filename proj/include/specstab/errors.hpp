#pragma once

#include <stdexcept>
#include <string>

namespace specstab {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inputs with mismatched dimensions, patterns or out-of-range indices.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Arguments outside an operation's precondition (k out of range, bad config).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf entries or an eigensolver that did not converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// The kth and (k+1)-st eigenvalues coincide, so the gradient is undefined.
class CoalescedPair : public Error {
 public:
  using Error::Error;
};

/// L*(L(E)) vanished; only possible when the norm constraint is violated.
class DegenerateConstraint : public Error {
 public:
  using Error::Error;
};

/// Upper-bound search exceeded its ceiling without reaching coalescence.
class NoUpperBound : public Error {
 public:
  using Error::Error;
};

/// Malformed graph or result file.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace specstab
