#pragma once

#include <stdexcept>
#include <string>

namespace bmal {

/// Base class for every error raised by the library. The CLI maps each
/// subclass to a process exit code via exit_code().
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
};

// Input problems (exit code 2).
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};
class InfeasibleEpsilon : public Error {
 public:
  using Error::Error;
};
class InfeasibleMass : public Error {
 public:
  using Error::Error;
};
class NotPSD : public Error {
 public:
  using Error::Error;
};
class ZeroVariance : public Error {
 public:
  using Error::Error;
};
class EmptyInput : public Error {
 public:
  using Error::Error;
};
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

// Degenerate information (exit code 3).
class SingularInformation : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};
class PositivityRepairFailed : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};
class DegenerateCategory : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Model fitting failed (exit code 5).
class FitDiverged : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

}  // namespace bmal
