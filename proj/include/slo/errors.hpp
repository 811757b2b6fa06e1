#pragma once

#include <stdexcept>
#include <string>

namespace slo {

/// Base class for all errors raised by the solver library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad dimensions, invalid configuration, unreadable files.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// The problem (or a required subproblem) admits no feasible point.
class InfeasibleProblem : public Error {
 public:
  InfeasibleProblem(const std::string& what, double max_violation)
      : Error(what), max_violation_(max_violation) {}
  double max_violation() const { return max_violation_; }

 private:
  double max_violation_ = 0.0;
};

/// A violated constraint produced a zero subgradient: the projection step
/// cannot make progress, which is evidence the constraint is unreachable.
class ZeroSubgradient : public Error {
 public:
  using Error::Error;
};

}  // namespace slo
