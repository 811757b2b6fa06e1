#pragma once

#include <functional>
#include <span>
#include <vector>

#include "slo/model.hpp"

namespace slo {

struct ProjectionConfig {
  double relaxation = 1.0;     // step scale, must lie in (0, 2)
  double violation_tol = 1e-8; // constraint values at or below this count as satisfied
  int n_max = 1000;            // iteration cap for a feasibility seek
  bool clip_nonnegative = false;

  void validate() const;
};

/// Indices (ascending) of constraints violated beyond the tolerance.
std::vector<int> violated_set(std::span<const double> x, std::span<const Constraint> constraints,
                              double tol, Evaluator& ev);

double max_violation(std::span<const double> x, std::span<const Constraint> constraints,
                     Evaluator& ev);

/// One simultaneous subgradient projection step: moves against each violated
/// constraint's subgradient, weighted by the constraint weights renormalized
/// over the violated set. Returns the input unchanged when nothing is
/// violated. Throws ZeroSubgradient if a violated constraint has no descent
/// direction.
std::vector<double> simultaneous_step(std::span<const double> x,
                                      std::span<const Constraint> constraints,
                                      const ProjectionConfig& config, Evaluator& ev);

enum class SeekStatus { feasible, exhausted };

struct SeekResult {
  std::vector<double> point;
  SeekStatus status = SeekStatus::exhausted;
  int steps = 0;
  double max_violation = 0.0;
};

/// Optional per-iteration additive perturbation (iteration index, current
/// point) applied before each projection step.
using Perturber = std::function<std::vector<double>(int, std::span<const double>)>;

SeekResult seek_feasible(std::span<const double> x0, std::span<const Constraint> constraints,
                         const ProjectionConfig& config, Evaluator& ev,
                         const Perturber& perturber = {});

}  // namespace slo
