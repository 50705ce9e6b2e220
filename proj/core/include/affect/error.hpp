#pragma once

#include <stdexcept>
#include <string>

namespace affect {

/// Failure category. The CLI maps these onto its exit codes.
enum class ErrorKind {
  Usage,      // bad invocation or configuration
  Data,       // malformed input, violated precondition
  Numerical,  // solver failure when configured as fatal
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::Numerical, what) {}
};

}  // namespace affect
