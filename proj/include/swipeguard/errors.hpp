#pragma once

#include <stdexcept>
#include <string>

namespace swipeguard {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violates a structural contract (malformed trace, bad timestamps,
/// out-of-range coordinates). Distinct from a quality rejection.
class StructuralError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A covariance could not be factorized even after the maximum jitter.
class SingularModelError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation requires a trained profile.
class NotReadyError : public Error {
 public:
  using Error::Error;
};

/// Profile state forbids the requested transition.
class StateError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// A file or directory could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace swipeguard
