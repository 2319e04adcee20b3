#pragma once

#include <stdexcept>
#include <string>

namespace gridrl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric argument outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Structural data (tables, maps, policies) that violates an invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An API called in the wrong state, e.g. stepping a finished episode.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridrl
