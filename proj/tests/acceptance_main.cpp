// End-to-end behavior checks. Each check prints one [PASS]/[FAIL] line and
// the process exits with the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "helpers.hpp"
#include "slo/errors.hpp"
#include "slo/lexdriver.hpp"
#include "slo/phantom.hpp"
#include "slo/problem_io.hpp"
#include "slo/vec.hpp"

using namespace slo;
namespace fs = std::filesystem;

namespace {

using Outcome = std::pair<bool, std::string>;

int failures = 0;

template <typename F>
void criterion(int idx, const std::string& name, F&& body) {
  bool ok = false;
  std::string detail;
  try {
    std::tie(ok, detail) = body();
  } catch (const std::exception& e) {
    ok = false;
    detail = std::string("exception: ") + e.what();
  }
  std::printf("[%s] criterion %2d: %s%s%s\n", ok ? "PASS" : "FAIL", idx, name.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double phi_distance(const LexProblem& problem, std::span<const double> x,
                    const std::vector<double>& target) {
  RunMetrics scratch;
  Evaluator ev(problem.dose, scratch);
  const auto phi = eval_phi_all(problem, x, ev);
  double d2 = 0.0;
  for (std::size_t g = 0; g < phi.size(); ++g) d2 += (phi[g] - target[g]) * (phi[g] - target[g]);
  return std::sqrt(d2);
}

// Shared runs, built on first use so one broken fixture fails only the
// checks that need it.
struct Fixtures {
  const std::string data_dir = SLO_DATA_DIR;

  LexProblem toy() {
    if (!toy_) toy_ = load_problem(data_dir + "/toy.json");
    return *toy_;
  }

  std::vector<double> toy_target() {
    if (!toy_target_) toy_target_ = load_point_json(data_dir + "/toy_optimum.json", "phi");
    return *toy_target_;
  }

  SolveOptions toy_options() {
    SolveOptions opt;
    opt.projection.n_max = 20000;
    // fine bound steps let successful feasibility problems track the active
    // boundary into the optimal vertex instead of overshooting past it
    opt.reduce_fraction = 3e-6;
    opt.start_point = std::vector<double>{0.0, 47.5};
    opt.stop.kind = StopRuleConfig::Kind::known_optimum;
    opt.stop.phi_target = toy_target();
    opt.stop.tolerance = 1e-2;
    return opt;
  }

  const LexSolution& toy_lo() {
    if (!toy_lo_) {
      const auto t0 = std::chrono::steady_clock::now();
      toy_lo_ = solve_lex(toy(), toy_options());
      toy_lo_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return *toy_lo_;
  }
  double toy_lo_seconds() {
    toy_lo();
    return toy_lo_seconds_;
  }

  SolveOptions toy_slo_options(int k, int lambda) {
    auto opt = toy_options();
    opt.superiorization = SuperiorizationConfig{};
    opt.superiorization->K = k;
    opt.superiorization->Lambda = lambda;
    opt.superiorization->policy = ExponentPolicy::reset_per_call;
    return opt;
  }

  const LexSolution& toy_slo() {
    if (!toy_slo_) toy_slo_ = solve_lex(toy(), toy_slo_options(2, 4));
    return *toy_slo_;
  }

  const SweepResult& toy_sweep() {
    if (!toy_sweep_) toy_sweep_ = sweep_parameters(toy(), {1, 2, 4}, {1, 2, 4, 8},
                                                   toy_slo_options(1, 1));
    return *toy_sweep_;
  }

  const LexProblem& phantom() {
    if (!phantom_) {
      const auto config = load_phantom_config(data_dir + "/phantom12.json");
      phantom_ = generate_phantom(config).problem;
    }
    return *phantom_;
  }

  SolveOptions phantom_options() {
    SolveOptions opt;
    opt.projection.n_max = 1500;
    return opt;
  }

  const LexSolution& phantom_lo() {
    if (!phantom_lo_) phantom_lo_ = solve_lex(phantom(), phantom_options());
    return *phantom_lo_;
  }

  const SweepResult& phantom_sweep() {
    if (!phantom_sweep_) {
      auto base = phantom_options();
      base.superiorization = SuperiorizationConfig{};
      base.superiorization->policy = ExponentPolicy::reset_per_call;
      phantom_sweep_ = sweep_parameters(phantom(), {1, 2, 4}, {1, 2, 4}, base);
    }
    return *phantom_sweep_;
  }

 private:
  std::optional<LexProblem> toy_;
  std::optional<std::vector<double>> toy_target_;
  std::optional<LexSolution> toy_lo_, toy_slo_;
  std::optional<SweepResult> toy_sweep_;
  std::optional<LexProblem> phantom_;
  std::optional<LexSolution> phantom_lo_;
  std::optional<SweepResult> phantom_sweep_;
  double toy_lo_seconds_ = 0.0;
};

Fixtures fx;

// 1: the plain prioritized solve finds the pentagon's lexicographic optimum.
Outcome check_known_optimum() {
  const auto& sol = fx.toy_lo();
  const double dist = phi_distance(fx.toy(), sol.x_final, fx.toy_target());
  const auto x_opt = load_point_json(fx.data_dir + "/toy_optimum.json", "x");
  double dx2 = 0.0;
  for (std::size_t i = 0; i < x_opt.size(); ++i)
    dx2 += (sol.x_final[i] - x_opt[i]) * (sol.x_final[i] - x_opt[i]);
  const double point_dist = std::sqrt(dx2);
  const double seconds = fx.toy_lo_seconds();
  const bool ok = sol.stopped_by_rule && dist <= 1e-2 && point_dist <= 1e-2 && seconds < 5.0;
  return {ok, "objective distance " + fmt(dist) + ", point distance " + fmt(point_dist) +
                  ", " + fmt(seconds) + " s"};
}

// 2: some perturbed configuration reaches the same optimum with strictly
// fewer projection steps and gradient evaluations.
Outcome check_perturbed_savings() {
  const auto lo_totals = fx.toy_lo().metrics.totals();
  const double lo_dist = phi_distance(fx.toy(), fx.toy_lo().x_final, fx.toy_target());
  if (lo_dist > 1e-2) return {false, "baseline run missed the optimum"};
  std::string best;
  for (const auto& pt : fx.toy_sweep().points) {
    if (pt.failed) continue;
    const auto t = pt.solution.metrics.totals();
    const double dist = phi_distance(fx.toy(), pt.solution.x_final, fx.toy_target());
    if (dist <= 1e-2 && t.projections < lo_totals.projections &&
        t.gradient_evals < lo_totals.gradient_evals) {
      best = "K=" + std::to_string(pt.K) + " Lambda=" + std::to_string(pt.Lambda) +
             ": projections " + std::to_string(t.projections) + " vs " +
             std::to_string(lo_totals.projections) + ", gradients " +
             std::to_string(t.gradient_evals) + " vs " +
             std::to_string(lo_totals.gradient_evals);
      break;
    }
  }
  return {!best.empty(), best.empty() ? "no grid point beat the plain run on both counters" : best};
}

// 3: on the synthetic planning problem, perturbation during the first level
// hands the second level a strictly better starting objective.
Outcome check_next_level_head_start() {
  const auto& lo_entry = fx.phantom_lo().metrics.phi_at_level_entry;
  if (lo_entry.size() < 2 || lo_entry[1].size() < 2)
    return {false, "baseline run has no second level"};
  const double lo_phi2 = lo_entry[1][1];
  if (!(lo_phi2 > 0.0)) return {false, "baseline second objective already zero at entry"};
  double best_ratio = std::numeric_limits<double>::infinity();
  std::string best;
  for (const auto& pt : fx.phantom_sweep().points) {
    if (pt.failed) continue;
    const auto& entry = pt.solution.metrics.phi_at_level_entry;
    if (entry.size() < 2 || entry[1].size() < 2) continue;
    const double ratio = entry[1][1] / lo_phi2;
    if (ratio < best_ratio) {
      best_ratio = ratio;
      best = "K=" + std::to_string(pt.K) + " Lambda=" + std::to_string(pt.Lambda);
    }
  }
  return {best_ratio < 1.0,
          best.empty() ? "no finished grid point"
                       : best + " entered level 2 at ratio " + fmt(best_ratio)};
}

// 4: every point the solver logs satisfies the hard constraints.
Outcome check_logged_feasibility() {
  std::size_t rows = 0;
  double worst = 0.0;
  for (const LexSolution* sol : {&fx.toy_lo(), &fx.toy_slo(), &fx.phantom_lo()}) {
    for (const auto& tp : sol->trajectory) {
      worst = std::max(worst, tp.max_hard_violation);
      ++rows;
    }
  }
  return {rows > 0 && worst <= 1e-8,
          std::to_string(rows) + " rows, worst violation " + fmt(worst)};
}

// 5: after a level is solved, later work keeps its objective within the
// configured slack.
Outcome check_levels_preserved() {
  std::string detail;
  for (const auto* pair : {&fx.phantom_lo(), &fx.toy_lo()}) {
    const auto& sol = *pair;
    const auto& problem = &sol == &fx.phantom_lo() ? fx.phantom() : fx.toy();
    RunMetrics scratch;
    Evaluator ev(problem.dose, scratch);
    const auto phi = eval_phi_all(problem, sol.x_final, ev);
    for (int g = 0; g + 1 < problem.level_count(); ++g) {
      const double allowed =
          sol.phi_stars[g] + problem.delta_fraction * std::fabs(sol.phi_stars[g]) + 1e-8;
      if (phi[g] > allowed)
        return {false, "level " + std::to_string(g + 1) + " drifted to " + fmt(phi[g]) +
                           " past " + fmt(allowed)};
      detail = "worst margin ok";
    }
  }
  return {true, detail};
}

// 6: perturbation never increases its guidance objective, and its search
// direction is never longer than unit.
Outcome check_perturbation_safety() {
  testutil::Rng rng(97);
  int calls = 0;
  double worst_norm = 0.0;
  while (calls < 1000) {
    const int n = rng.integer(2, 6);
    RunMetrics metrics;
    const auto dose = DoseMatrix::identity(n);
    Evaluator ev(dose, metrics);
    std::vector<int> voxels;
    for (int v = 0; v < n; ++v) voxels.push_back(v);
    std::vector<EvaluationFunction> psi{
        testutil::penalty_term(FunctionKind::upper_tail, "s", voxels, rng.range(0.2, 2.0)),
        testutil::affine_term(rng.vector(n, -1.0, 1.0), rng.range(-1.0, 1.0),
                              rng.range(0.1, 2.0))};
    SuperiorizationConfig config;
    config.Lambda = rng.integer(1, 6);
    config.policy = calls % 2 ? ExponentPolicy::persistent : ExponentPolicy::reset_per_call;
    Superiorizer sup(config, true);
    const auto x = rng.vector(n, 0.0, 3.0);
    worst_norm = std::max(worst_norm, norm(sup_direction(x, psi, ev)));
    const double before = ev.group_value(psi, x);
    const auto out = sup.perturb(x, psi, ev);
    const double after = ev.group_value(psi, out);
    if (after > before + 1e-12)
      return {false, "objective rose from " + fmt(before) + " to " + fmt(after) + " on call " +
                         std::to_string(calls)};
    if (!all_nonnegative(out)) return {false, "perturbed point left the admissible orthant"};
    ++calls;
  }
  return {worst_norm <= 1.0 + 1e-12,
          "1000 calls, max direction norm " + fmt(worst_norm)};
}

// 7: a single violated halfspace is projected exactly.
Outcome check_projection_closed_form() {
  testutil::Rng rng(131);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = rng.integer(2, 7);
    RunMetrics metrics;
    const auto dose = DoseMatrix::identity(n);
    Evaluator ev(dose, metrics);
    auto coeffs = rng.vector(n, -2.0, 2.0);
    if (squared_norm(coeffs) < 1e-2) coeffs[0] += 1.0;
    const auto x = rng.vector(n, -3.0, 3.0);
    double ax = 0.0;
    for (int i = 0; i < n; ++i) ax += coeffs[i] * x[i];
    const double violation = rng.range(0.1, 5.0);
    const std::vector<Constraint> cs{
        testutil::affine_constraint(coeffs, violation - ax, "plane")};
    ProjectionConfig config;
    const auto stepped = simultaneous_step(x, cs, config, ev);
    const double s2 = squared_norm(coeffs);
    for (int i = 0; i < n; ++i) {
      const double expected = x[i] - violation * coeffs[i] / s2;
      worst = std::max(worst, std::fabs(stepped[i] - expected) /
                                  std::max(1.0, std::fabs(expected)));
    }
  }

  // one case whose arithmetic is exact in floating point
  const auto toy = fx.toy();
  RunMetrics metrics;
  Evaluator ev(toy.dose, metrics);
  ProjectionConfig config;
  const auto stepped =
      simultaneous_step(std::vector<double>{0.0, 47.5}, toy.hard_constraints, config, ev);
  const bool exact = stepped == std::vector<double>{5.0, 57.5};
  return {worst <= 1e-12 && exact,
          "max relative deviation " + fmt(worst) + (exact ? ", exact case ok" : ", exact case FAILED")};
}

// 8: analytic subgradients of every scoring kind match central differences.
Outcome check_gradients_match_differences() {
  testutil::Rng rng(173);
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 400; ++trial) {
    const int n = rng.integer(3, 9);
    EvaluationFunction f;
    switch (trial % 4) {
      case 0:
      case 1:
      case 2: {
        std::vector<int> voxels;
        for (int v = 0; v < n; ++v)
          if (rng.unit() < 0.8) voxels.push_back(v);
        if (voxels.empty()) voxels.push_back(0);
        const auto kind = std::array{FunctionKind::lower_tail, FunctionKind::upper_tail,
                                     FunctionKind::mean_upper_tail}[trial % 4];
        f = testutil::penalty_term(kind, "s", voxels, rng.range(2.0, 8.0));
        break;
      }
      default:
        f = testutil::affine_term(rng.vector(n, -3.0, 3.0), rng.range(-2.0, 2.0));
    }

    auto d = rng.vector(n, 0.0, 10.0);
    if (f.kind == FunctionKind::mean_upper_tail) {
      double mean = 0.0;
      for (int v : f.structure.voxels) mean += d[v];
      mean /= f.structure.voxels.size();
      if (std::fabs(mean - f.threshold) < 1e-2)
        for (int v : f.structure.voxels) d[v] += 3e-2;
    } else if (f.kind != FunctionKind::affine) {
      for (int v : f.structure.voxels)
        if (std::fabs(d[v] - f.threshold) < 1e-2) d[v] += 2e-2;
    }

    const auto g = eval_function_subgradient(f, d);
    for (int i = 0; i < n; ++i) {
      auto hi = d, lo = d;
      hi[i] += h;
      lo[i] -= h;
      const double fd = (eval_function(f, hi) - eval_function(f, lo)) / (2 * h);
      worst = std::max(worst, std::fabs(g[i] - fd) / std::max(1.0, std::fabs(fd)));
    }
  }
  return {worst <= 1e-4, "400 instances, worst relative deviation " + fmt(worst)};
}

// 9: vanishing extra steps do not stop the seek from reaching feasibility.
Outcome check_perturbation_resilience() {
  testutil::Rng rng(211);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.integer(3, 6);
    const auto sys = testutil::random_consistent_system(rng, n, rng.integer(3, 8));
    RunMetrics metrics;
    const auto dose = DoseMatrix::identity(n);
    Evaluator ev(dose, metrics);
    ProjectionConfig config;
    config.n_max = 2000;
    const Perturber perturber = [&rng, n](int k, std::span<const double>) {
      auto u = rng.vector(n, -1.0, 1.0);
      const double len = norm(u);
      const double scale = std::pow(0.5, k) / (len > 0 ? len : 1.0);
      for (auto& v : u) v *= scale;
      return u;
    };
    const auto start = rng.vector(n, -4.0, 4.0);
    const auto result = seek_feasible(start, sys.constraints, config, ev, perturber);
    if (result.status != SeekStatus::feasible)
      return {false, "system " + std::to_string(trial) + " stuck at violation " +
                         fmt(result.max_violation)};
  }
  return {true, "100 perturbed systems all reached feasibility"};
}

// 10: rerunning the same configuration writes byte-identical artifacts.
Outcome check_deterministic_artifacts() {
  const auto scratch = fs::path(SLO_SCRATCH_DIR);
  fs::create_directories(scratch / "a");
  fs::create_directories(scratch / "b");
  RunArtifacts art;
  art.mode = "slo";
  art.problem_hash = file_hash_hex(fx.data_dir + "/toy.json");
  art.config_json = "{\"K\":2,\"Lambda\":4}";
  for (const auto& dir : {scratch / "a", scratch / "b"}) {
    const auto sol = solve_lex(fx.toy(), fx.toy_slo_options(2, 4));
    write_solution_json(sol, art, (dir / "solution.json").string());
    write_metrics_csv(sol, (dir / "metrics.csv").string());
    write_trajectory_csv(sol, (dir / "trajectory.csv").string());
  }
  for (const char* name : {"solution.json", "metrics.csv", "trajectory.csv"}) {
    std::ifstream fa((scratch / "a" / name).string(), std::ios::binary);
    std::ifstream fb((scratch / "b" / name).string(), std::ios::binary);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    if (sa.str().empty() || sa.str() != sb.str())
      return {false, std::string(name) + " differs between identical runs"};
  }
  return {true, "solution.json, metrics.csv and trajectory.csv are byte-identical"};
}

}  // namespace

int main() {
  criterion(1, "plain solve reaches the pentagon's known optimum in time",
            check_known_optimum);
  criterion(2, "a perturbed run reaches the same optimum with less work",
            check_perturbed_savings);
  criterion(3, "perturbation gives the next level a head start", check_next_level_head_start);
  criterion(4, "every logged iterate satisfies the hard constraints", check_logged_feasibility);
  criterion(5, "later levels keep earlier objectives within their slack", check_levels_preserved);
  criterion(6, "perturbation never harms its guidance objective", check_perturbation_safety);
  criterion(7, "projection steps match the halfspace closed form", check_projection_closed_form);
  criterion(8, "analytic gradients agree with finite differences",
            check_gradients_match_differences);
  criterion(9, "feasibility seeking survives vanishing perturbations",
            check_perturbation_resilience);
  criterion(10, "identical configurations write identical artifacts",
            check_deterministic_artifacts);
  return failures;
}
