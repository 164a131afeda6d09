// Exception types shared across the library.
#pragma once

#include <stdexcept>
#include <string>

namespace helio {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside an algorithm's validity domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a structural invariant (duplicates, negative increments, ...).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Tensor extents do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong state (e.g. backward without forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Bad user-facing input: unknown variable, malformed flag value, etc.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// File could not be read, written or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace helio
