#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hnko {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// Short machine-readable category used by the CLI error line.
  virtual const char* kind() const noexcept { return "runtime"; }
};

/// Operand shapes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "dimension"; }
};

/// A documented constraint on an input or configuration is violated.
class ValidationError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "constraint"; }
};

/// Non-finite values, near-collisions and similar numerical breakdowns.
class NumericalError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numerical"; }
};

/// Malformed input file. Line and column are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what), line_(line), column_(column) {}
  const char* kind() const noexcept override { return "parse"; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace hnko
