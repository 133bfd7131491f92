#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fqr {

// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Two curves/surfaces that must live on one grid do not.
class GridMismatchError : public Error {
 public:
  using Error::Error;
};

// Operation requires a uniform grid (e.g. finite differences).
class UnsupportedGridError : public Error {
 public:
  using Error::Error;
};

// Sample carries no usable variation (all curves coincide, zero scales, ...).
class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

// Design matrix is rank deficient and no candidate fit could be computed.
class SingularDesignError : public Error {
 public:
  using Error::Error;
};

// Iterative solver did not reach its tolerance. Carries the last iterate and
// the residual of the stopping criterion at that iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& msg, std::vector<double> last_iterate,
                   double criterion, int iterations)
      : Error(msg),
        last_iterate(std::move(last_iterate)),
        criterion(criterion),
        iterations(iterations) {}

  std::vector<double> last_iterate;
  double criterion = 0.0;
  int iterations = 0;
};

// Malformed input file; row/column are 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t row = 0, std::size_t col = 0)
      : Error(msg), row(row), col(col) {}

  std::size_t row = 0;
  std::size_t col = 0;
};

// A Monte Carlo study exceeded its tolerated fraction of failed replications.
class StudyError : public Error {
 public:
  using Error::Error;
};

}  // namespace fqr
