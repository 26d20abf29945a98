#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace tmaxbayes {

/// Bad input: malformed files, violated preconditions, mismatched shapes.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not produce a usable answer.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IngestError : public InputError {
 public:
  using InputError::InputError;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : InputError("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class ValidationError : public InputError {
 public:
  explicit ValidationError(const std::string& what) : InputError(what) {}
  ValidationError(const std::string& what, std::vector<int> years)
      : InputError(what), years_(std::move(years)) {}

  /// Offending years, when the failure is tied to specific rows.
  const std::vector<int>& years() const noexcept { return years_; }

 private:
  std::vector<int> years_;
};

class ShapeError : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InitError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StuckChainError : public NumericalError {
 public:
  StuckChainError(std::size_t chain, std::string block)
      : NumericalError("chain " + std::to_string(chain) + ": block '" + block +
                       "' rejected every proposal during burn-in"),
        block_(std::move(block)) {}

  const std::string& block() const noexcept { return block_; }

 private:
  std::string block_;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientDrawsError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace tmaxbayes
