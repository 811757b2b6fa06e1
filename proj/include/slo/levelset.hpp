#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "slo/projection.hpp"

namespace slo {

struct LevelSetConfig {
  ProjectionConfig projection;
  double reduce_fraction = 0.1; // relative bound decrease per successful seek
  double reduce_abs = 1e-6;     // minimum absolute decrease
  double t_min = 1e-8;          // floor for penalty-valued objectives
};

/// next = current - max(fraction*|current|, abs_step), clamped up to *floor.
double reduce_bound(double current, double fraction, double abs_step,
                    std::optional<double> floor);

/// Early-exit rule for problems with a known lexicographic optimum: stop as
/// soon as a feasible iterate's objective vector is within `tolerance`
/// (Euclidean) of `phi_target`.
struct KnownOptimumRule {
  std::vector<double> phi_target;
  double tolerance = 1e-2;
};

struct LevelState {
  int level = 1;
  double bound = std::numeric_limits<double>::infinity();
  std::vector<double> best_feasible;
  int cfp_success_count = 0;
  bool finished = false;
  double phi_star = std::numeric_limits<double>::quiet_NaN();
  bool stop_rule_hit = false;
};

struct LevelContext {
  const LexProblem* problem = nullptr;
  const PriorityGroup* objective = nullptr;
  std::span<const Constraint> accumulated; // hard + earlier-level bounds
  const KnownOptimumRule* stop_rule = nullptr;
};

struct CfpOutcome {
  std::vector<double> point;
  double phi_value = 0.0;
  bool success = false;
  bool stop_rule_hit = false;
};

/// Seeks a point satisfying the accumulated constraints plus the level
/// objective bounded above by `bound`. On failure returns the best point
/// seen that satisfied the accumulated constraints (falling back to
/// `fallback`) together with its objective value.
CfpOutcome find_feasible_solution(double bound, std::span<const double> start,
                                  std::span<const double> fallback, const LevelContext& ctx,
                                  const LevelSetConfig& config, Evaluator& ev);

struct LevelHooks {
  std::function<std::vector<double>(std::span<const double>)> superiorize;
  int superiorize_every = 0; // apply after every this many successful seeks
  std::function<void(std::span<const double>, double)> on_accepted;
};

/// Drives one priority level to completion: repeatedly lowers the objective
/// bound and re-seeks feasibility until a seek fails (or, for penalty
/// objectives, the floor is reached). Leaves the level optimum and the best
/// feasible point in `state`.
void run_level(LevelState& state, const LevelContext& ctx, const LevelSetConfig& config,
               Evaluator& ev, const LevelHooks& hooks = {});

}  // namespace slo
