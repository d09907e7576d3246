#pragma once

#include <stdexcept>
#include <string>

namespace partnr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments: empty heatmaps, out-of-bounds pixels, non-finite values.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class UnknownToken : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A request that is well formed but not allowed in the current session state.
class Conflict : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class TeacherTimeout : public Error {
 public:
  using Error::Error;
};

}  // namespace partnr
