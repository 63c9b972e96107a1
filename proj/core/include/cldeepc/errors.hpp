#pragma once

#include <stdexcept>
#include <string>

namespace cldeepc {

/// Operand shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A signal or window does not cover the requested index range.
class InsufficientDataError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A model, weight or configuration value violates its invariants.
class InvalidArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A correlation matrix is singular or its condition number exceeds the
/// configured limit.
class IllConditionedError : public std::runtime_error {
 public:
  IllConditionedError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

/// The quadratic program solver did not terminate.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A controller callback failed; the message carries the step index.
class ControllerError : public std::runtime_error {
 public:
  ControllerError(const std::string& what, long step)
      : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace cldeepc
