#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cycletime {

/// Base class for every error raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Cholesky hit a pivot that is not safely positive.
struct NotPositiveDefinite : Error {
  std::size_t pivot;
  explicit NotPositiveDefinite(std::size_t k)
      : Error("matrix is not positive definite (pivot " + std::to_string(k) + ")"), pivot(k) {}
};

struct DimensionMismatch : Error {
  using Error::Error;
};

/// Non-numeric cell in a data file. Row is 1-based over data rows, column 0-based.
struct ParseError : Error {
  std::size_t row;
  std::size_t column;
  ParseError(std::size_t r, std::size_t c, const std::string& what)
      : Error("parse error at row " + std::to_string(r) + ", column " + std::to_string(c) + ": " + what),
        row(r),
        column(c) {}
};

struct SchemaError : Error {
  using Error::Error;
};

struct ConstantColumn : Error {
  std::string column;
  explicit ConstantColumn(std::string name)
      : Error("column '" + name + "' is constant and cannot be normalized"), column(std::move(name)) {}
};

struct BadRatios : Error {
  using Error::Error;
};

struct BadRange : Error {
  using Error::Error;
};

struct DegenerateFiring : Error {
  using Error::Error;
};

struct LengthMismatch : Error {
  using Error::Error;
};

struct EmptyInput : Error {
  using Error::Error;
};

/// Correlation is undefined because one side has zero variance.
struct ConstantInput : Error {
  using Error::Error;
};

}  // namespace cycletime
