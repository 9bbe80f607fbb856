#pragma once

#include <stdexcept>
#include <string>

namespace fppe {

/// Invalid caller-supplied argument (non-positive scale, bad alpha, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A point outside the domain of a function, e.g. a non-positive pacing
/// multiplier handed to the log barrier.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The value generator produced something non-finite or out of bounds.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The equilibrium solver did not reach its KKT tolerance.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const noexcept { return last_residual_; }

 private:
  double last_residual_;
};

/// Equilibrium quantities that violate an invariant beyond tolerance.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ill-conditioned linear algebra (singular Hessian block, ...).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double condition_number)
      : std::runtime_error(what), condition_number_(condition_number) {}
  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

/// An A/B experiment that cannot be analyzed (e.g. an empty arm).
class ExperimentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fppe
