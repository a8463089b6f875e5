#pragma once

#include <stdexcept>
#include <string>

namespace fairkit {

// Malformed input data or a violated precondition on data (CLI exit code 2).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments to an operation (CLI exit code 1 when raised from flag parsing).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An iterative solver ran out of budget or produced an infeasible iterate
// (CLI exit code 3). Carries the residual it stopped at.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

}  // namespace fairkit
