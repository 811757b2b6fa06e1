#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slo/errors.hpp"
#include "slo/lexdriver.hpp"
#include "slo/phantom.hpp"
#include "slo/problem_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct SolverFlags {
  double relaxation = 1.0;
  double violation_tol = 1e-8;
  int n_max = 1000;
  double reduce_fraction = 0.1;
  double reduce_abs = 1e-6;
  double t_min = 1e-8;
  std::string stop_rule = "tmin";
  std::string optimum_path;
  double stop_tol = 1e-2;
  std::vector<double> x0;
  std::optional<double> delta_fraction;
  std::uint64_t seed = 0;

  std::string mode = "lo";
  int K = 0;
  int Lambda = 0;
  double base = 0.5;
  double min_stepsize = 1e-6;
  std::string exponent_policy = "persistent";
  std::string psi_arg;
};

void add_solver_flags(CLI::App* cmd, SolverFlags& f, bool with_mode) {
  cmd->add_option("--relaxation", f.relaxation, "projection step scale in (0,2)");
  cmd->add_option("--violation-tol", f.violation_tol, "feasibility tolerance");
  cmd->add_option("--n-max", f.n_max, "projection iteration cap per feasibility seek");
  cmd->add_option("--reduce-fraction", f.reduce_fraction, "relative objective bound decrease");
  cmd->add_option("--reduce-abs", f.reduce_abs, "minimum absolute bound decrease");
  cmd->add_option("--t-min", f.t_min, "bound floor for penalty objectives");
  cmd->add_option("--stop-rule", f.stop_rule, "tmin or known-optimum")
      ->check(CLI::IsMember({"tmin", "known-optimum"}));
  cmd->add_option("--optimum", f.optimum_path,
                  "JSON file with the target objective vector under key 'phi'");
  cmd->add_option("--stop-tol", f.stop_tol, "known-optimum distance tolerance");
  cmd->add_option("--x0", f.x0, "start point (comma separated)")->delimiter(',');
  cmd->add_option("--delta-fraction", f.delta_fraction,
                  "override the problem's relative slack on solved levels");
  cmd->add_option("--seed", f.seed, "echoed into the run configuration");
  cmd->add_option("--base", f.base, "perturbation step base in (0,1)");
  cmd->add_option("--min-stepsize", f.min_stepsize, "smallest perturbation step tried");
  cmd->add_option("--exponent-policy", f.exponent_policy, "reset or persistent")
      ->check(CLI::IsMember({"reset", "persistent"}));
  cmd->add_option("--psi", f.psi_arg,
                  "guidance objective as group:weight pairs, e.g. 2:1.0,3:0.5");
  if (with_mode) {
    cmd->add_option("--mode", f.mode, "lo (plain) or slo (perturbed)")
        ->check(CLI::IsMember({"lo", "slo"}));
    cmd->add_option("--K", f.K, "perturb after every K successful seeks");
    cmd->add_option("--Lambda", f.Lambda, "accepted perturbation steps per call");
  }
}

std::vector<std::pair<int, double>> parse_psi(const std::string& arg) {
  std::vector<std::pair<int, double>> out;
  std::size_t pos = 0;
  while (pos < arg.size()) {
    const auto comma = arg.find(',', pos);
    const auto item = arg.substr(pos, comma == std::string::npos ? comma : comma - pos);
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos)
        out.emplace_back(std::stoi(item), 1.0);
      else
        out.emplace_back(std::stoi(item.substr(0, colon)), std::stod(item.substr(colon + 1)));
    } catch (const std::exception&) {
      throw slo::InvalidInput("cannot parse guidance term '" + item +
                              "'; expected group:weight");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

slo::SuperiorizationConfig make_sup_config(const SolverFlags& f) {
  slo::SuperiorizationConfig sc;
  sc.K = f.K;
  sc.Lambda = f.Lambda;
  sc.base = f.base;
  sc.min_stepsize = f.min_stepsize;
  sc.policy = f.exponent_policy == "reset" ? slo::ExponentPolicy::reset_per_call
                                           : slo::ExponentPolicy::persistent;
  sc.psi_groups = parse_psi(f.psi_arg);
  return sc;
}

slo::SolveOptions make_options(const SolverFlags& f, bool superiorized) {
  slo::SolveOptions opt;
  opt.projection.relaxation = f.relaxation;
  opt.projection.violation_tol = f.violation_tol;
  opt.projection.n_max = f.n_max;
  opt.reduce_fraction = f.reduce_fraction;
  opt.reduce_abs = f.reduce_abs;
  opt.t_min = f.t_min;
  if (f.stop_rule == "known-optimum") {
    if (f.optimum_path.empty())
      throw slo::InvalidInput("--stop-rule known-optimum needs --optimum");
    opt.stop.kind = slo::StopRuleConfig::Kind::known_optimum;
    opt.stop.phi_target = slo::load_point_json(f.optimum_path, "phi");
    opt.stop.tolerance = f.stop_tol;
  }
  if (!f.x0.empty()) opt.start_point = f.x0;
  if (superiorized) opt.superiorization = make_sup_config(f);
  return opt;
}

json config_echo(const SolverFlags& f, double effective_delta, bool superiorized) {
  json j;
  j["mode"] = superiorized ? "slo" : "lo";
  j["relaxation"] = f.relaxation;
  j["violation_tol"] = f.violation_tol;
  j["n_max"] = f.n_max;
  j["reduce_fraction"] = f.reduce_fraction;
  j["reduce_abs"] = f.reduce_abs;
  j["t_min"] = f.t_min;
  j["stop_rule"] = f.stop_rule;
  j["stop_tol"] = f.stop_tol;
  j["delta_fraction"] = effective_delta;
  j["seed"] = f.seed;
  j["x0"] = f.x0;
  if (superiorized) {
    json s;
    s["K"] = f.K;
    s["Lambda"] = f.Lambda;
    s["base"] = f.base;
    s["min_stepsize"] = f.min_stepsize;
    s["exponent_policy"] = f.exponent_policy;
    s["psi"] = f.psi_arg;
    j["superiorization"] = std::move(s);
  } else {
    j["superiorization"] = nullptr;
  }
  return j;
}

void write_run(const slo::LexSolution& solution, const slo::RunArtifacts& art,
               const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  slo::write_solution_json(solution, art, (dir / "solution.json").string());
  slo::write_metrics_csv(solution, (dir / "metrics.csv").string());
  slo::write_trajectory_csv(solution, (dir / "trajectory.csv").string());
  slo::write_timings_csv(solution, (dir / "timings.csv").string());
}

int run_solve(const std::string& problem_path, const std::string& out_dir,
              const SolverFlags& flags) {
  auto problem = slo::load_problem(problem_path);
  if (flags.delta_fraction) problem.delta_fraction = *flags.delta_fraction;
  const bool superiorized = flags.mode == "slo";
  if (superiorized && (flags.K < 1 || flags.Lambda < 1))
    throw slo::InvalidInput("mode 'slo' needs --K and --Lambda (both at least 1)");

  const auto solution = slo::solve_lex(problem, make_options(flags, superiorized));

  slo::RunArtifacts art;
  art.mode = flags.mode;
  art.problem_hash = slo::file_hash_hex(problem_path);
  art.config_json = config_echo(flags, problem.delta_fraction, superiorized).dump();
  write_run(solution, art, out_dir);

  std::cout << "levels " << solution.phi_stars.size() << ", dose multiplications "
            << solution.metrics.totals().dose_mults << ", final objectives [";
  for (std::size_t i = 0; i < solution.phi_stars.size(); ++i)
    std::cout << (i ? ", " : "") << solution.phi_stars[i];
  std::cout << "]" << (solution.stopped_by_rule ? " (stop rule)" : "") << "\n";
  return 0;
}

int run_compare(const std::string& dir_a, const std::string& dir_b, const std::string& out_path,
                double t_min) {
  const auto a = slo::load_run_summary(dir_a);
  const auto b = slo::load_run_summary(dir_b);
  const auto report = slo::compare_runs(a, b, t_min);
  if (const auto parent = fs::path(out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  slo::write_ratios_csv(report, out_path);
  std::cout << "total dose multiplication ratio " << report.total_dose_mults.ratio << "\n";
  return 0;
}

int run_phantom(const std::string& config_path, const std::string& out_dir) {
  const auto config = slo::load_phantom_config(config_path);
  auto result = slo::generate_phantom(config);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  slo::save_matrix_market(result.problem.dose, (dir / "dose.mtx").string());
  slo::save_problem(result.problem, (dir / "problem.json").string(), "dose.mtx");
  {
    json j;
    j["x"] = result.reference_fluence;
    std::ofstream out((dir / "reference_fluence.json").string());
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out((dir / "notes.txt").string());
    for (const auto& n : result.notes) out << n << "\n";
  }
  std::cout << "phantom: " << result.problem.dose.rows() << " voxels, "
            << result.problem.dose.cols() << " beamlets, " << result.problem.dose.nonzeros()
            << " nonzeros, " << result.problem.groups.size() << " priority levels\n";
  return 0;
}

int run_dvh(const std::string& problem_path, const std::string& solution_path,
            const std::string& out_path, double bin_width) {
  const auto problem = slo::load_problem(problem_path);
  if (problem.structures.empty())
    throw slo::InvalidInput("problem has no structures to build curves for");
  const auto x = slo::load_point_json(solution_path, "x_final");
  if (static_cast<int>(x.size()) != problem.n_vars)
    throw slo::InvalidInput("solution has " + std::to_string(x.size()) + " variables, problem " +
                            std::to_string(problem.n_vars));
  slo::RunMetrics scratch;
  const auto dose = problem.dose.apply(x, scratch);
  std::vector<slo::DvhCurve> curves;
  for (const auto& s : problem.structures)
    curves.push_back({s.name, slo::dvh(dose, s, bin_width)});
  if (const auto parent = fs::path(out_path).parent_path(); !parent.empty())
    fs::create_directories(parent);
  slo::write_dvh_csv(curves, out_path);
  return 0;
}

int run_sweep(const std::string& problem_path, const std::string& out_dir,
              const std::vector<int>& k_grid, const std::vector<int>& lambda_grid,
              const SolverFlags& flags) {
  auto problem = slo::load_problem(problem_path);
  if (flags.delta_fraction) problem.delta_fraction = *flags.delta_fraction;
  auto base = make_options(flags, true);
  // grid points override K and Lambda; placeholders keep validation happy
  base.superiorization->K = 1;
  base.superiorization->Lambda = 1;
  const auto result = slo::sweep_parameters(problem, k_grid, lambda_grid, base);
  fs::create_directories(out_dir);
  slo::write_sweep_csv(result, problem.level_count(), (fs::path(out_dir) / "sweep.csv").string());
  if (result.best_index >= 0) {
    const auto& best = result.points[result.best_index];
    std::cout << "best point K=" << best.K << " Lambda=" << best.Lambda << " with "
              << best.solution.metrics.totals().dose_mults << " dose multiplications\n";
  } else {
    std::cout << "no sweep point finished\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prioritized dose optimization by feasibility seeking"};
  app.require_subcommand(1);

  SolverFlags solve_flags;
  std::string solve_problem, solve_out;
  auto* solve_cmd = app.add_subcommand("solve", "optimize a problem and write run artifacts");
  solve_cmd->add_option("problem", solve_problem, "problem JSON file")->required();
  solve_cmd->add_option("--out", solve_out, "output directory")->required();
  add_solver_flags(solve_cmd, solve_flags, true);

  std::string cmp_a, cmp_b, cmp_out;
  double cmp_t_min = 1e-8;
  auto* cmp_cmd = app.add_subcommand("compare", "write quantity ratios between two runs");
  cmp_cmd->add_option("run_a", cmp_a, "first run directory")->required();
  cmp_cmd->add_option("run_b", cmp_b, "second run directory (denominator)")->required();
  cmp_cmd->add_option("--out", cmp_out, "ratios CSV path")->required();
  cmp_cmd->add_option("--t-min", cmp_t_min, "treat objectives at or below this as solved");

  std::string ph_config, ph_out;
  auto* ph_cmd = app.add_subcommand("phantom", "generate a synthetic planning problem");
  ph_cmd->add_option("config", ph_config, "phantom configuration JSON")->required();
  ph_cmd->add_option("--out", ph_out, "output directory")->required();

  std::string dvh_problem, dvh_solution, dvh_out;
  double dvh_bin = 1.0;
  auto* dvh_cmd = app.add_subcommand("dvh", "dose-volume curves for a solved run");
  dvh_cmd->add_option("problem", dvh_problem, "problem JSON file")->required();
  dvh_cmd->add_option("solution", dvh_solution, "solution JSON file")->required();
  dvh_cmd->add_option("--out", dvh_out, "curves CSV path")->required();
  dvh_cmd->add_option("--bin-width", dvh_bin, "dose sampling step");

  SolverFlags sweep_flags;
  std::string sweep_problem, sweep_out;
  std::vector<int> k_grid, lambda_grid;
  auto* sweep_cmd = app.add_subcommand("sweep", "grid search over perturbation parameters");
  sweep_cmd->add_option("problem", sweep_problem, "problem JSON file")->required();
  sweep_cmd->add_option("--out", sweep_out, "output directory")->required();
  sweep_cmd->add_option("--K-grid", k_grid, "K values (non-positive disables perturbation)")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_option("--Lambda-grid", lambda_grid, "Lambda values")->delimiter(',')->required();
  add_solver_flags(sweep_cmd, sweep_flags, false);

  try {
    app.parse(argc, argv);
    if (solve_cmd->parsed()) return run_solve(solve_problem, solve_out, solve_flags);
    if (cmp_cmd->parsed()) return run_compare(cmp_a, cmp_b, cmp_out, cmp_t_min);
    if (ph_cmd->parsed()) return run_phantom(ph_config, ph_out);
    if (dvh_cmd->parsed()) return run_dvh(dvh_problem, dvh_solution, dvh_out, dvh_bin);
    if (sweep_cmd->parsed())
      return run_sweep(sweep_problem, sweep_out, k_grid, lambda_grid, sweep_flags);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const slo::InfeasibleProblem& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const slo::ZeroSubgradient& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const slo::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const slo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
