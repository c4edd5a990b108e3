#pragma once

#include <stdexcept>
#include <string>

namespace heatctl {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (bad interval, non-positive mode count, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument passed to an operation (negative time step, mismatched sizes).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Parameters outside the range where the requested problem is defined.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// The target is reached by the free flow or is exactly attainable, so r = 0.
class DegenerateTargetError : public InfeasibleError {
 public:
  using InfeasibleError::InfeasibleError;
};

/// Numerical failure of an iterative method.
class SolverError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public SolverError {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : SolverError(what + " (last residual " + std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}

  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// ||chi_omega psi|| fell under the degeneracy floor on an active cell.
class DegenerateAdjointError : public SolverError {
 public:
  using SolverError::SolverError;
};

/// No k <= k_max with r(tau, k*M0) < r.
class BracketError : public SolverError {
 public:
  using SolverError::SolverError;
};

class InstabilityError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace heatctl
