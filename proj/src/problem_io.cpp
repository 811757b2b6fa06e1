#include "slo/problem_io.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "slo/errors.hpp"

namespace slo {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput("malformed JSON in '" + path + "': " + e.what());
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write '" + path + "'");
  return out;
}

EvaluationFunction function_from_json(const json& j,
                                      const std::map<std::string, Structure>& structures,
                                      int n_vars) {
  EvaluationFunction f;
  f.kind = function_kind_from_string(j.at("kind").get<std::string>());
  f.weight = j.value("weight", 1.0);
  if (f.kind == FunctionKind::affine) {
    f.affine_coeffs = j.at("coeffs").get<std::vector<double>>();
    f.affine_offset = j.value("offset", 0.0);
    if (static_cast<int>(f.affine_coeffs.size()) != n_vars)
      throw InvalidInput("affine term has " + std::to_string(f.affine_coeffs.size()) +
                         " coefficients for " + std::to_string(n_vars) + " variables");
  } else {
    const auto name = j.at("structure").get<std::string>();
    const auto it = structures.find(name);
    if (it == structures.end()) throw InvalidInput("unknown structure '" + name + "'");
    f.structure = it->second;
    f.threshold = j.at("threshold").get<double>();
  }
  return f;
}

json function_to_json(const EvaluationFunction& f) {
  json j;
  j["kind"] = to_string(f.kind);
  j["weight"] = f.weight;
  if (f.kind == FunctionKind::affine) {
    j["coeffs"] = f.affine_coeffs;
    j["offset"] = f.affine_offset;
  } else {
    j["structure"] = f.structure.name;
    j["threshold"] = f.threshold;
  }
  return j;
}

}  // namespace

LexProblem load_problem(const std::string& path) {
  const json j = parse_file(path);
  LexProblem p;
  try {
    p.n_vars = j.at("n_vars").get<int>();
    p.delta_fraction = j.value("delta_fraction", 0.1);
    p.nonnegative_vars = j.value("nonnegative_vars", true);

    std::map<std::string, Structure> by_name;
    if (j.contains("structures"))
      for (const auto& [name, voxels] : j.at("structures").items()) {
        Structure s{name, voxels.get<std::vector<int>>()};
        by_name[name] = s;
        p.structures.push_back(std::move(s));
      }

    const auto dose_ref = j.at("dose_matrix").get<std::string>();
    if (dose_ref == "identity") {
      p.dose = DoseMatrix::identity(p.n_vars);
    } else {
      const auto dir = std::filesystem::path(path).parent_path();
      p.dose = load_matrix_market((dir / dose_ref).string());
    }

    for (const auto& cj : j.value("hard_constraints", json::array())) {
      Constraint c;
      c.terms.push_back(function_from_json(cj, by_name, p.n_vars));
      c.weight = cj.value("weight", 1.0);
      c.terms.front().weight = 1.0;
      c.label = cj.value("label", "constraint " + std::to_string(p.hard_constraints.size()));
      p.hard_constraints.push_back(std::move(c));
    }

    auto gj = j.at("groups");
    std::sort(gj.begin(), gj.end(),
              [](const json& a, const json& b) { return a.at("index") < b.at("index"); });
    for (const auto& g : gj) {
      PriorityGroup group;
      group.index = g.at("index").get<int>();
      for (const auto& fj : g.at("functions"))
        group.functions.push_back(function_from_json(fj, by_name, p.n_vars));
      p.groups.push_back(std::move(group));
    }
  } catch (const json::exception& e) {
    throw InvalidInput("problem file '" + path + "': " + e.what());
  }
  p.validate();
  return p;
}

void save_problem(const LexProblem& problem, const std::string& path,
                  const std::string& dose_ref) {
  json j;
  j["n_vars"] = problem.n_vars;
  j["dose_matrix"] = dose_ref;
  j["delta_fraction"] = problem.delta_fraction;
  j["nonnegative_vars"] = problem.nonnegative_vars;
  json structures = json::object();
  for (const auto& s : problem.structures) structures[s.name] = s.voxels;
  j["structures"] = std::move(structures);
  json constraints = json::array();
  for (const auto& c : problem.hard_constraints) {
    if (c.terms.size() != 1)
      throw InvalidInput("only single-term constraints can be saved; '" + c.label + "' has " +
                         std::to_string(c.terms.size()));
    json cj = function_to_json(c.terms.front());
    cj["weight"] = c.weight;
    cj["label"] = c.label;
    constraints.push_back(std::move(cj));
  }
  j["hard_constraints"] = std::move(constraints);
  json groups = json::array();
  for (const auto& g : problem.groups) {
    json gj;
    gj["index"] = g.index;
    json fns = json::array();
    for (const auto& f : g.functions) fns.push_back(function_to_json(f));
    gj["functions"] = std::move(fns);
    groups.push_back(std::move(gj));
  }
  j["groups"] = std::move(groups);
  open_out(path) << j.dump(2) << "\n";
}

DoseMatrix load_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot read '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0)
    throw InvalidInput("'" + path + "' is not a MatrixMarket file");
  {
    std::istringstream hdr(line);
    std::string tag, object, format, field, symmetry;
    hdr >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" || field != "real" ||
        symmetry != "general")
      throw InvalidInput("'" + path + "' must be a general real coordinate matrix");
  }
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '%') break;
  int rows = 0, cols = 0;
  std::int64_t nnz = 0;
  {
    std::istringstream dims(line);
    if (!(dims >> rows >> cols >> nnz))
      throw InvalidInput("'" + path + "' has a malformed size line");
  }
  std::vector<DoseMatrix::Entry> entries;
  entries.reserve(nnz);
  for (std::int64_t k = 0; k < nnz; ++k) {
    int r = 0, c = 0;
    double v = 0.0;
    if (!(in >> r >> c >> v))
      throw InvalidInput("'" + path + "' ends after " + std::to_string(k) + " of " +
                         std::to_string(nnz) + " entries");
    entries.push_back({r - 1, c - 1, v});
  }
  return DoseMatrix(rows, cols, std::move(entries));
}

void save_matrix_market(const DoseMatrix& m, const std::string& path) {
  auto out = open_out(path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << " " << m.cols() << " " << m.nonzeros() << "\n";
  char buf[64];
  m.for_each_entry([&](int r, int c, double v) {
    std::snprintf(buf, sizeof buf, "%d %d %.17g\n", r + 1, c + 1, v);
    out << buf;
  });
}

PhantomConfig load_phantom_config(const std::string& path) {
  const json j = parse_file(path);
  PhantomConfig cfg;
  try {
    if (j.contains("grid")) {
      const auto g = j.at("grid").get<std::vector<int>>();
      if (g.size() != 3) throw InvalidInput("phantom grid must have three dimensions");
      cfg.grid = {g[0], g[1], g[2]};
    }
    cfg.beam_count = j.value("beam_count", cfg.beam_count);
    cfg.beamlets_per_beam = j.value("beamlets_per_beam", cfg.beamlets_per_beam);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("kernel")) {
      const auto& k = j.at("kernel");
      cfg.kernel.attenuation = k.value("attenuation", cfg.kernel.attenuation);
      cfg.kernel.lateral_sigma = k.value("lateral_sigma", cfg.kernel.lateral_sigma);
      cfg.kernel.cutoff = k.value("cutoff", cfg.kernel.cutoff);
    }
    for (const auto& sj : j.at("structures")) {
      StructureSpec s;
      s.name = sj.at("name").get<std::string>();
      const auto shape = sj.at("shape").get<std::string>();
      if (shape == "sphere")
        s.shape = StructureSpec::Shape::sphere;
      else if (shape == "box")
        s.shape = StructureSpec::Shape::box;
      else if (shape == "shell")
        s.shape = StructureSpec::Shape::shell;
      else if (shape == "margin")
        s.shape = StructureSpec::Shape::margin;
      else if (shape == "complement")
        s.shape = StructureSpec::Shape::complement;
      else
        throw InvalidInput("unknown shape '" + shape + "'");
      const auto role = sj.at("role").get<std::string>();
      if (role == "target")
        s.role = StructureSpec::Role::target;
      else if (role == "organ")
        s.role = StructureSpec::Role::organ;
      else if (role == "tissue")
        s.role = StructureSpec::Role::tissue;
      else
        throw InvalidInput("unknown role '" + role + "'");
      if (sj.contains("center")) {
        const auto c = sj.at("center").get<std::vector<double>>();
        if (c.size() != 3) throw InvalidInput("structure center must have three coordinates");
        s.center = {c[0], c[1], c[2]};
      }
      s.radius = sj.value("radius", 0.0);
      s.inner_radius = sj.value("inner_radius", 0.0);
      s.outer_radius = sj.value("outer_radius", 0.0);
      if (sj.contains("half_size")) {
        const auto h = sj.at("half_size").get<std::vector<double>>();
        if (h.size() != 3) throw InvalidInput("structure half_size must have three extents");
        s.half_size = {h[0], h[1], h[2]};
      }
      s.source = sj.value("source", std::string{});
      s.margin_width = sj.value("margin_width", 0.0);
      if (sj.contains("exclude")) s.exclude = sj.at("exclude").get<std::vector<std::string>>();
      s.weight = sj.value("weight", 1.0);
      cfg.structures.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw InvalidInput("phantom config '" + path + "': " + e.what());
  }
  cfg.validate();
  return cfg;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot read '" + path + "'");
  std::uint64_t h = 14695981039346656037ull;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

std::string csv_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_solution_json(const LexSolution& s, const RunArtifacts& art, const std::string& path) {
  json j;
  j["mode"] = art.mode;
  j["problem_hash"] = art.problem_hash;
  try {
    j["config"] = art.config_json.empty() ? json::object() : json::parse(art.config_json);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("run configuration is not valid JSON: ") + e.what());
  }
  j["x_final"] = s.x_final;
  j["phi_stars"] = s.phi_stars;
  j["per_level_solutions"] = s.per_level_solutions;
  j["phi_at_level_entry"] = s.metrics.phi_at_level_entry;
  j["max_constraint_violation"] = s.max_constraint_violation;
  j["stopped_by_rule"] = s.stopped_by_rule;
  open_out(path) << j.dump(2) << "\n";
}

void write_metrics_csv(const LexSolution& s, const std::string& path) {
  auto out = open_out(path);
  out << "level,dose_mults,projections,gradient_evals,sup_steps\n";
  const auto& levels = s.metrics.per_level();
  for (std::size_t i = 0; i < levels.size(); ++i)
    out << i << "," << levels[i].dose_mults << "," << levels[i].projections << ","
        << levels[i].gradient_evals << "," << levels[i].sup_steps << "\n";
  const auto t = s.metrics.totals();
  out << "total," << t.dose_mults << "," << t.projections << "," << t.gradient_evals << ","
      << t.sup_steps << "\n";
}

void write_timings_csv(const LexSolution& s, const std::string& path) {
  auto out = open_out(path);
  out << "level,wall_seconds\n";
  const auto& levels = s.metrics.per_level();
  for (std::size_t i = 0; i < levels.size(); ++i)
    out << i << "," << csv_number(levels[i].wall_seconds) << "\n";
  out << "total," << csv_number(s.metrics.totals().wall_seconds) << "\n";
}

void write_trajectory_csv(const LexSolution& s, const std::string& path) {
  auto out = open_out(path);
  const std::size_t n_phi = s.trajectory.empty() ? 0 : s.trajectory.front().phi.size();
  out << "iter,level,dose_mults,projections";
  for (std::size_t g = 1; g <= n_phi; ++g) out << ",phi_" << g;
  out << ",max_violation\n";
  for (const auto& tp : s.trajectory) {
    out << tp.iter << "," << tp.level << "," << tp.dose_mults << "," << tp.projections;
    for (double v : tp.phi) out << "," << csv_number(v);
    out << "," << csv_number(tp.max_hard_violation) << "\n";
  }
}

RunSummary load_run_summary(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const auto sol_path = (fs::path(run_dir) / "solution.json").string();
  const json j = parse_file(sol_path);
  RunSummary r;
  try {
    r.phi_stars = j.at("phi_stars").get<std::vector<double>>();
    r.phi_at_level_entry = j.at("phi_at_level_entry").get<std::vector<std::vector<double>>>();
    r.problem_hash = j.value("problem_hash", std::string{});
  } catch (const json::exception& e) {
    throw InvalidInput("solution file '" + sol_path + "': " + e.what());
  }

  const auto metrics_path = (fs::path(run_dir) / "metrics.csv").string();
  std::ifstream in(metrics_path);
  if (!in) throw InvalidInput("cannot read '" + metrics_path + "'");
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string level, mults;
    std::getline(row, level, ',');
    std::getline(row, mults, ',');
    if (level == "total") continue;
    try {
      r.dose_mults_per_level.push_back(std::stoll(mults));
    } catch (const std::exception&) {
      throw InvalidInput("metrics file '" + metrics_path + "' has a malformed row: " + line);
    }
  }
  return r;
}

namespace {

std::string ratio_text(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return csv_number(v);
}

void ratio_row(std::ofstream& out, const std::string& quantity, const std::string& level,
               const std::string& gamma, const RatioEntry& e) {
  out << quantity << "," << level << "," << gamma << "," << csv_number(e.a) << ","
      << csv_number(e.b) << "," << ratio_text(e.ratio) << "," << (e.solved ? "true" : "false")
      << "\n";
}

}  // namespace

void write_ratios_csv(const RatioReport& r, const std::string& path) {
  auto out = open_out(path);
  out << "quantity,level,gamma,a,b,ratio,solved\n";
  for (std::size_t i = 0; i < r.phi_star.size(); ++i)
    ratio_row(out, "phi_star", std::to_string(i + 1), "", r.phi_star[i]);
  ratio_row(out, "total_dose_mults", "", "", r.total_dose_mults);
  for (std::size_t i = 0; i < r.dose_mults_per_level.size(); ++i)
    ratio_row(out, "dose_mults", std::to_string(i), "", r.dose_mults_per_level[i]);
  for (std::size_t lvl = 0; lvl < r.level_entry_phi.size(); ++lvl)
    for (std::size_t g = 0; g < r.level_entry_phi[lvl].size(); ++g)
      ratio_row(out, "level_entry_phi", std::to_string(lvl + 1), std::to_string(g + 1),
                r.level_entry_phi[lvl][g]);
}

void write_dvh_csv(const std::vector<DvhCurve>& curves, const std::string& path) {
  auto out = open_out(path);
  out << "structure,dose,volume_fraction\n";
  for (const auto& c : curves)
    for (const auto& p : c.points)
      out << c.structure << "," << csv_number(p.dose) << "," << csv_number(p.volume_fraction)
          << "\n";
}

void write_sweep_csv(const SweepResult& r, int level_count, const std::string& path) {
  auto out = open_out(path);
  out << "K,Lambda,status,selected,total_dose_mults,total_projections,total_gradient_evals,"
         "total_sup_steps";
  for (int g = 1; g <= level_count; ++g) out << ",phi_star_" << g;
  out << "\n";
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    out << p.K << "," << p.Lambda << "," << (p.failed ? "failed" : "ok") << ","
        << (static_cast<int>(i) == r.best_index ? 1 : 0);
    if (p.failed) {
      for (int c = 0; c < 4 + level_count; ++c) out << ",";
    } else {
      const auto t = p.solution.metrics.totals();
      out << "," << t.dose_mults << "," << t.projections << "," << t.gradient_evals << ","
          << t.sup_steps;
      for (int g = 0; g < level_count; ++g)
        out << ","
            << (g < static_cast<int>(p.solution.phi_stars.size())
                    ? csv_number(p.solution.phi_stars[g])
                    : "");
    }
    out << "\n";
  }
}

std::vector<double> load_point_json(const std::string& path, const std::string& key) {
  const json j = parse_file(path);
  try {
    return j.at(key).get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw InvalidInput("'" + path + "' has no numeric array '" + key + "': " + e.what());
  }
}

}  // namespace slo
