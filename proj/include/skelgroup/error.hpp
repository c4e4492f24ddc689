#pragma once

#include <stdexcept>
#include <string>

namespace skelgroup {

// Base error for everything the library reports. The CLI maps the concrete
// subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, bad arguments, violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing files, unreadable or malformed inputs.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or other numerical breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace skelgroup
