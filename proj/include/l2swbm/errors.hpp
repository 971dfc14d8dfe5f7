#pragma once

#include <stdexcept>
#include <string>

namespace l2swbm {

// Base for every error the library raises. CLI maps ConfigError subclasses to
// exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input, configuration, or data declaration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& file, std::size_t row, const std::string& what)
      : ConfigError(file + ": row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class DuplicateKeyError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class UnitError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class SpanError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DomainError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class DegenerateHistoryError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class BuildError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class WindowError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class ComparisonError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Raised when a stochastic node has no supported full conditional. Always an
// assembly bug, never a data problem.
class ScheduleError : public Error {
 public:
  using Error::Error;
};

class SliceFailure : public Error {
 public:
  using Error::Error;
};

class InsufficientChainsError : public Error {
 public:
  using Error::Error;
};

}  // namespace l2swbm
