#pragma once

#include <string>
#include <vector>

#include "slo/lexdriver.hpp"
#include "slo/phantom.hpp"

namespace slo {

/// Loads a problem description from JSON. A dose matrix named "identity"
/// becomes an identity of size n_vars; any other name is resolved as a
/// MatrixMarket file relative to the JSON's directory.
LexProblem load_problem(const std::string& path);

/// Writes the problem back out; `dose_ref` is the dose_matrix field to
/// embed ("identity" or a relative .mtx path — the matrix itself is saved
/// separately with save_matrix_market).
void save_problem(const LexProblem& problem, const std::string& path,
                  const std::string& dose_ref);

DoseMatrix load_matrix_market(const std::string& path);
void save_matrix_market(const DoseMatrix& m, const std::string& path);

PhantomConfig load_phantom_config(const std::string& path);

/// FNV-1a 64-bit hash of a file's bytes, as fixed-width hex.
std::string file_hash_hex(const std::string& path);

/// Shortest decimal form preserving 12 significant digits.
std::string csv_number(double v);

struct RunArtifacts {
  std::string mode;         // "lo" or "slo"
  std::string problem_hash;
  std::string config_json;  // serialized solver configuration
};

void write_solution_json(const LexSolution& s, const RunArtifacts& art, const std::string& path);
void write_metrics_csv(const LexSolution& s, const std::string& path);
void write_timings_csv(const LexSolution& s, const std::string& path);
void write_trajectory_csv(const LexSolution& s, const std::string& path);

/// Reconstructs the comparable summary of a finished run directory
/// (solution.json + metrics.csv).
RunSummary load_run_summary(const std::string& run_dir);

void write_ratios_csv(const RatioReport& r, const std::string& path);

struct DvhCurve {
  std::string structure;
  std::vector<DvhPoint> points;
};

void write_dvh_csv(const std::vector<DvhCurve>& curves, const std::string& path);

void write_sweep_csv(const SweepResult& r, int level_count, const std::string& path);

/// Reads a JSON file and returns the named numeric-array field.
std::vector<double> load_point_json(const std::string& path, const std::string& key);

}  // namespace slo
