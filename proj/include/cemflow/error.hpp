#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace cemflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (bad counts, indices, sizes).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Configuration could not be parsed or failed schema validation.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const noexcept { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// A factorization, eigensolve or time integration failed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

#define CEMFLOW_REQUIRE(cond, ExceptionType, message) \
  do {                                                \
    if (!(cond)) throw ExceptionType(message);        \
  } while (false)

}  // namespace cemflow
