#pragma once

#include <stdexcept>
#include <string>

namespace greg {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a NaN or infinity.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Bad argument or violated precondition that is not a shape problem.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content (bad magic, truncated payload, bad CSV row).
class FormatError : public IoError {
 public:
  using IoError::IoError;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace greg
