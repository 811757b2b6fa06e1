#include "slo/lexdriver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>

#include "slo/errors.hpp"
#include "slo/vec.hpp"

namespace slo {

namespace {

class StopWatch {
 public:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void validate_options(const LexProblem& problem, const SolveOptions& options) {
  if (!(options.reduce_fraction >= 0.0))
    throw InvalidInput("bound reduction fraction must be nonnegative");
  if (!(options.reduce_abs > 0.0))
    throw InvalidInput("absolute bound reduction must be positive");
  if (!(options.t_min > 0.0)) throw InvalidInput("penalty floor t_min must be positive");
  if (options.superiorization) options.superiorization->validate();
  if (options.stop.kind == StopRuleConfig::Kind::known_optimum) {
    if (static_cast<int>(options.stop.phi_target.size()) != problem.level_count())
      throw InvalidInput("known-optimum rule needs one target value per priority level (" +
                         std::to_string(problem.level_count()) + "), got " +
                         std::to_string(options.stop.phi_target.size()));
    if (!(options.stop.tolerance > 0.0))
      throw InvalidInput("known-optimum tolerance must be positive");
  }
  if (options.start_point &&
      static_cast<int>(options.start_point->size()) != problem.n_vars)
    throw InvalidInput("start point has " + std::to_string(options.start_point->size()) +
                       " entries for " + std::to_string(problem.n_vars) + " variables");
}

}  // namespace

LexSolution solve_lex(const LexProblem& problem, const SolveOptions& options) {
  problem.validate();
  ProjectionConfig proj = options.projection;
  proj.clip_nonnegative = problem.nonnegative_vars;
  proj.validate();
  validate_options(problem, options);

  const int M = problem.level_count();
  LexSolution sol;
  sol.metrics = RunMetrics(M + 1);  // bucket 0: initial feasibility seek
  Evaluator ev(problem.dose, sol.metrics);

  std::vector<double> x(problem.n_vars, 0.0);
  if (options.start_point) x = *options.start_point;
  if (problem.nonnegative_vars)
    for (auto& v : x) v = std::max(v, 0.0);

  std::optional<Superiorizer> sup;
  if (options.superiorization) sup.emplace(*options.superiorization, problem.nonnegative_vars);

  int iter = 0;
  auto log_point = [&](std::span<const double> p, int level) {
    TrajectoryPoint tp;
    tp.iter = iter++;
    tp.level = level;
    const auto totals = sol.metrics.totals();
    tp.dose_mults = totals.dose_mults;
    tp.projections = totals.projections;
    tp.phi = eval_phi_all(problem, p, ev);
    tp.max_hard_violation = max_violation(p, problem.hard_constraints, ev);
    sol.trajectory.push_back(std::move(tp));
  };

  sol.metrics.set_active_level(0);
  {
    StopWatch watch;
    auto seek = seek_feasible(x, problem.hard_constraints, proj, ev);
    sol.metrics.add_wall_seconds(watch.elapsed());
    if (seek.status == SeekStatus::exhausted)
      throw InfeasibleProblem(
          "no point satisfying the hard constraints was found within " +
              std::to_string(proj.n_max) + " projection steps; worst remaining violation " +
              std::to_string(seek.max_violation),
          seek.max_violation);
    x = std::move(seek.point);
  }
  log_point(x, 0);

  sol.phi_stars.assign(M, std::numeric_limits<double>::quiet_NaN());
  std::vector<Constraint> active(problem.hard_constraints.begin(),
                                 problem.hard_constraints.end());

  KnownOptimumRule rule;
  const KnownOptimumRule* rule_ptr = nullptr;
  if (options.stop.kind == StopRuleConfig::Kind::known_optimum) {
    rule.phi_target = options.stop.phi_target;
    rule.tolerance = options.stop.tolerance;
    rule_ptr = &rule;
  }

  LevelSetConfig lcfg;
  lcfg.projection = proj;
  lcfg.reduce_fraction = options.reduce_fraction;
  lcfg.reduce_abs = options.reduce_abs;
  lcfg.t_min = options.t_min;

  for (int level = 1; level <= M; ++level) {
    sol.metrics.set_active_level(level);
    sol.metrics.phi_at_level_entry.push_back(eval_phi_all(problem, x, ev));

    LevelContext ctx;
    ctx.problem = &problem;
    ctx.objective = &problem.groups[level - 1];
    ctx.accumulated = active;
    ctx.stop_rule = rule_ptr;

    std::vector<EvaluationFunction> psi;  // must outlive run_level
    LevelHooks hooks;
    hooks.on_accepted = [&](std::span<const double> p, double) { log_point(p, level); };
    if (sup) {
      psi = make_psi(problem, level, sup->config());
      if (!psi.empty()) {
        hooks.superiorize = [&](std::span<const double> p) { return sup->perturb(p, psi, ev); };
        hooks.superiorize_every = sup->config().K;
      }
    }

    LevelState state;
    state.level = level;
    state.best_feasible = x;

    StopWatch watch;
    run_level(state, ctx, lcfg, ev, hooks);
    sol.metrics.add_wall_seconds(watch.elapsed());

    x = state.best_feasible;
    sol.phi_stars[level - 1] = state.phi_star;
    sol.per_level_solutions.push_back(x);

    if (state.stop_rule_hit) {
      sol.stopped_by_rule = true;
      const auto phis = eval_phi_all(problem, x, ev);
      for (int g = level; g < M; ++g) {
        sol.phi_stars[g] = phis[g];
        sol.per_level_solutions.push_back(x);
      }
      break;
    }
    if (level < M) {
      Constraint keep;
      keep.terms = problem.groups[level - 1].functions;
      keep.bound = state.phi_star + problem.delta_fraction * std::fabs(state.phi_star);
      keep.label = "level " + std::to_string(level) + " bound";
      active.push_back(std::move(keep));
    }
  }

  sol.x_final = x;
  sol.max_constraint_violation = max_violation(x, problem.hard_constraints, ev);
  return sol;
}

RunSummary summarize(const LexSolution& solution, const std::string& problem_hash) {
  RunSummary r;
  r.phi_stars = solution.phi_stars;
  r.phi_at_level_entry = solution.metrics.phi_at_level_entry;
  for (const auto& c : solution.metrics.per_level()) r.dose_mults_per_level.push_back(c.dose_mults);
  r.problem_hash = problem_hash;
  return r;
}

namespace {

RatioEntry value_ratio(double a, double b, double t_min) {
  RatioEntry e;
  e.a = a;
  e.b = b;
  if (std::fabs(a) <= t_min && std::fabs(b) <= t_min) {
    e.ratio = 1.0;
    e.solved = true;  // both at the penalty floor: treat as equally solved
  } else if (b == 0.0) {
    e.ratio = a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  } else {
    e.ratio = a / b;
  }
  return e;
}

RatioEntry count_ratio(std::int64_t a, std::int64_t b) {
  RatioEntry e;
  e.a = static_cast<double>(a);
  e.b = static_cast<double>(b);
  if (a == 0 && b == 0)
    e.ratio = 1.0;
  else if (b == 0)
    e.ratio = std::numeric_limits<double>::infinity();
  else
    e.ratio = e.a / e.b;
  return e;
}

}  // namespace

RatioReport compare_runs(const RunSummary& a, const RunSummary& b, double t_min) {
  if (a.phi_stars.size() != b.phi_stars.size())
    throw InvalidInput("runs have different level counts (" + std::to_string(a.phi_stars.size()) +
                       " vs " + std::to_string(b.phi_stars.size()) + ")");
  if (!a.problem_hash.empty() && !b.problem_hash.empty() && a.problem_hash != b.problem_hash)
    throw InvalidInput("runs were produced from different problems (hash " + a.problem_hash +
                       " vs " + b.problem_hash + ")");

  RatioReport r;
  for (std::size_t i = 0; i < a.phi_stars.size(); ++i)
    r.phi_star.push_back(value_ratio(a.phi_stars[i], b.phi_stars[i], t_min));

  std::int64_t ta = 0, tb = 0;
  const std::size_t levels = std::min(a.dose_mults_per_level.size(), b.dose_mults_per_level.size());
  for (std::size_t i = 0; i < levels; ++i)
    r.dose_mults_per_level.push_back(
        count_ratio(a.dose_mults_per_level[i], b.dose_mults_per_level[i]));
  for (auto v : a.dose_mults_per_level) ta += v;
  for (auto v : b.dose_mults_per_level) tb += v;
  r.total_dose_mults = count_ratio(ta, tb);

  const std::size_t entry_levels = std::min(a.phi_at_level_entry.size(), b.phi_at_level_entry.size());
  for (std::size_t lvl = 0; lvl < entry_levels; ++lvl) {
    std::vector<RatioEntry> row;
    const std::size_t n =
        std::min(a.phi_at_level_entry[lvl].size(), b.phi_at_level_entry[lvl].size());
    for (std::size_t g = 0; g < n; ++g)
      row.push_back(value_ratio(a.phi_at_level_entry[lvl][g], b.phi_at_level_entry[lvl][g], t_min));
    r.level_entry_phi.push_back(std::move(row));
  }
  return r;
}

RatioReport compare_runs(const LexSolution& a, const LexSolution& b, double t_min) {
  return compare_runs(summarize(a), summarize(b), t_min);
}

SweepResult sweep_parameters(const LexProblem& problem, const std::vector<int>& k_grid,
                             const std::vector<int>& lambda_grid,
                             const SolveOptions& base_options) {
  if (k_grid.empty() || lambda_grid.empty())
    throw InvalidInput("parameter sweep needs at least one K and one Lambda value");

  std::vector<std::future<SweepPoint>> futures;
  futures.reserve(k_grid.size() * lambda_grid.size());
  for (int k : k_grid)
    for (int lam : lambda_grid)
      futures.push_back(std::async(std::launch::async, [&problem, &base_options, k, lam]() {
        SweepPoint pt;
        pt.K = k;
        pt.Lambda = lam;
        SolveOptions opt = base_options;
        if (k <= 0) {
          opt.superiorization.reset();
        } else {
          SuperiorizationConfig sc =
              base_options.superiorization ? *base_options.superiorization
                                           : SuperiorizationConfig{};
          sc.K = k;
          sc.Lambda = lam;
          opt.superiorization = sc;
        }
        try {
          pt.solution = solve_lex(problem, opt);
        } catch (const Error& e) {
          pt.failed = true;
          pt.error = e.what();
        }
        return pt;
      }));

  SweepResult result;
  result.points.reserve(futures.size());
  for (auto& f : futures) result.points.push_back(f.get());

  for (std::size_t i = 0; i < result.points.size(); ++i) {
    const auto& p = result.points[i];
    if (p.failed) continue;
    if (result.best_index < 0) {
      result.best_index = static_cast<int>(i);
      continue;
    }
    const auto& q = result.points[result.best_index];
    const auto pm = p.solution.metrics.totals().dose_mults;
    const auto qm = q.solution.metrics.totals().dose_mults;
    if (pm < qm || (pm == qm && (p.K < q.K || (p.K == q.K && p.Lambda < q.Lambda))))
      result.best_index = static_cast<int>(i);
  }
  return result;
}

}  // namespace slo
