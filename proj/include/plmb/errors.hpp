#pragma once

#include <stdexcept>
#include <string>

namespace plmb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model parameter violates its contract (non-SPD covariance, bad possibility value, ...).
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

/// Vector/matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyMixtureError : public Error {
 public:
  using Error::Error;
};

/// Exponent or fusion weight outside its admissible range.
class InvalidWeightError : public Error {
 public:
  using Error::Error;
};

class DuplicateLabelError : public Error {
 public:
  using Error::Error;
};

/// Every posterior hypothesis has zero possibility; the models cannot explain the data.
class DegenerateUpdateError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// The sensor graph is unusable (disconnected, bad node index, malformed file).
class TopologyError : public Error {
 public:
  using Error::Error;
};

class FileError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace plmb
