#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvproto {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes or lengths disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its contract (empty input, non-scalar
/// backward root, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Model is in the wrong stage for the requested operation.
class StateError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Problem with dataset contents (empty split, single-class data, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Index (e.g. class label) out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Model file cannot be loaded (version, truncation, shape mismatch).
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Text-format parse failure; always carries a 1-based line number and,
/// when known, a 1-based column.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  ParseError(std::size_t line, std::size_t column, const std::string& message)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
              message),
        line_(line),
        column_(column) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }  // 0 when unknown

 private:
  std::size_t line_ = 0;
  std::size_t column_ = 0;
};

}  // namespace mvproto
