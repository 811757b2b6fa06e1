#pragma once

#include <optional>
#include <string>
#include <vector>

#include "slo/levelset.hpp"
#include "slo/superiorize.hpp"

namespace slo {

struct StopRuleConfig {
  enum class Kind { tmin, known_optimum };
  Kind kind = Kind::tmin;
  std::vector<double> phi_target; // required for known_optimum
  double tolerance = 1e-2;
};

struct SolveOptions {
  ProjectionConfig projection;
  double reduce_fraction = 0.1;
  double reduce_abs = 1e-6;
  double t_min = 1e-8;
  std::optional<SuperiorizationConfig> superiorization;
  StopRuleConfig stop;
  std::optional<std::vector<double>> start_point;
};

/// One logged iterate: objective vector and counter snapshot at an accepted
/// point. Level 0 is the initial hard-feasibility seek.
struct TrajectoryPoint {
  int iter = 0;
  int level = 0;
  std::int64_t dose_mults = 0;
  std::int64_t projections = 0;
  std::vector<double> phi;
  double max_hard_violation = 0.0;
};

struct LexSolution {
  std::vector<double> x_final;
  std::vector<double> phi_stars;
  std::vector<std::vector<double>> per_level_solutions;
  RunMetrics metrics;
  double max_constraint_violation = 0.0;
  std::vector<TrajectoryPoint> trajectory;
  bool stopped_by_rule = false;
};

LexSolution solve_lex(const LexProblem& problem, const SolveOptions& options);

/// Per-quantity comparison between two runs of the same problem.
struct RatioEntry {
  double a = 0.0;
  double b = 0.0;
  double ratio = 1.0;
  bool solved = false; // both magnitudes at or below the penalty floor
};

struct RunSummary {
  std::vector<double> phi_stars;
  std::vector<std::vector<double>> phi_at_level_entry;
  std::vector<std::int64_t> dose_mults_per_level;
  std::string problem_hash;
};

struct RatioReport {
  std::vector<RatioEntry> phi_star;                       // per level
  RatioEntry total_dose_mults;
  std::vector<RatioEntry> dose_mults_per_level;
  std::vector<std::vector<RatioEntry>> level_entry_phi;   // [level][objective]
};

RunSummary summarize(const LexSolution& solution, const std::string& problem_hash = "");

RatioReport compare_runs(const RunSummary& a, const RunSummary& b, double t_min = 1e-8);
RatioReport compare_runs(const LexSolution& a, const LexSolution& b, double t_min = 1e-8);

/// Grid search over perturbation parameters. K <= 0 disables perturbation
/// for that point. Points are evaluated concurrently and reported in grid
/// order (K-major); `best_index` picks the successful point with the fewest
/// dose multiplications (ties: smaller K, then smaller Lambda).
struct SweepPoint {
  int K = 0;
  int Lambda = 0;
  bool failed = false;
  std::string error;
  LexSolution solution;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  int best_index = -1;
};

SweepResult sweep_parameters(const LexProblem& problem, const std::vector<int>& k_grid,
                             const std::vector<int>& lambda_grid,
                             const SolveOptions& base_options);

}  // namespace slo
