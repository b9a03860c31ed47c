#pragma once

#include <stdexcept>
#include <string>

namespace opd {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric parameter is outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An API was called in a state or with arguments it does not accept.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// An experiment or environment configuration is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A persisted file is corrupt, truncated, or does not match expectations.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value; the message names the operation.
class NumericError : public Error {
 public:
  NumericError(const std::string& op, const std::string& detail)
      : Error("non-finite value in '" + op + "': " + detail), op_(op) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

}  // namespace opd
