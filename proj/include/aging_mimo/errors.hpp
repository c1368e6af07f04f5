#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace aging {

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid or inconsistent scenario/config input.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Aging coefficient is zero: every SINR vanishes and sigma^2 is unbounded.
class DegenerateAgingError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Unsupported cell layout for the hexagonal generator.
class LayoutError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

// Base for numerical failures at run time (exit code 3 at the CLI).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : NumericalError(what + " (residual " + std::to_string(residual) +
                       " after " + std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

// A Monte-Carlo trial failed; carries the trial index.
class TrialError : public NumericalError {
 public:
  TrialError(std::size_t trial, const std::string& what)
      : NumericalError("trial " + std::to_string(trial) + ": " + what),
        trial_(trial) {}

  std::size_t trial() const noexcept { return trial_; }

 private:
  std::size_t trial_;
};

}  // namespace aging
