#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wda {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shape mismatch, out-of-range parameter, empty input.
class InvalidInputError : public Error {
public:
  using Error::Error;
};

/// exp(-lambda * M) left the representable range.
class NumericalRangeError : public Error {
public:
  NumericalRangeError(const std::string& what, double scaled_cost)
      : Error(what), scaled_cost_(scaled_cost) {}

  /// lambda * max(M) of the offending kernel.
  double scaled_cost() const noexcept { return scaled_cost_; }

private:
  double scaled_cost_;
};

/// Rank-deficient or otherwise degenerate data (zero spread, singular
/// covariance, too few samples in a class).
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

/// A reference computation would exceed its size guard.
class CapacityError : public Error {
public:
  using Error::Error;
};

/// Ill-conditioned linear system or a solver that failed to converge.
class NumericalError : public Error {
public:
  using Error::Error;
};

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(what), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace wda
