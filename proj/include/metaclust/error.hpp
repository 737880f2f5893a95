#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace metaclust {

// Base of every error the library throws. kind() is a stable machine-readable
// tag that the CLI copies into its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error("validation", field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Row numbers are 1-based file lines (the header is line 1).
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& message)
      : Error("parse", "row " + std::to_string(row) + ", col " + column + ": " + message),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class WidthMismatchError : public Error {
 public:
  WidthMismatchError(std::size_t expected, std::size_t actual, const std::string& what)
      : Error("width_mismatch", what + ": expected width " + std::to_string(expected) + ", got " +
                                    std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

class StageDependencyError : public Error {
 public:
  explicit StageDependencyError(std::string missing)
      : Error("stage_dependency", "missing artifact from an earlier stage: " + missing),
        missing_(std::move(missing)) {}

  const std::string& missing() const noexcept { return missing_; }

 private:
  std::string missing_;
};

}  // namespace metaclust
