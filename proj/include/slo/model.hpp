#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slo/dose_matrix.hpp"
#include "slo/metrics.hpp"

namespace slo {

/// A named set of voxel indices (strictly increasing, within the dose grid).
struct Structure {
  std::string name;
  std::vector<int> voxels;
};

enum class FunctionKind {
  lower_tail,      // mean squared underdose below a threshold
  upper_tail,      // mean squared overdose above a threshold
  mean_upper_tail, // squared excess of the structure mean over a threshold
  affine,          // a.x + offset, evaluated on the decision variables
};

std::string to_string(FunctionKind kind);
FunctionKind function_kind_from_string(const std::string& s);

/// One scoring term. Dose-based kinds read the dose vector restricted to
/// `structure`; the affine kind reads the decision variables directly.
struct EvaluationFunction {
  FunctionKind kind = FunctionKind::lower_tail;
  Structure structure;
  double threshold = 0.0;
  double weight = 1.0;
  std::vector<double> affine_coeffs;
  double affine_offset = 0.0;
};

double eval_function(const EvaluationFunction& f, std::span<const double> dose_or_x);

/// Subgradient with respect to the dose (or x, for affine terms). Dose-based
/// kinds return a dense vector over all voxels, zero off the structure and
/// zero wherever the function is flat.
std::vector<double> eval_function_subgradient(const EvaluationFunction& f,
                                              std::span<const double> dose_or_x);

/// Weighted bundle of terms optimized at one priority level. Index 1 is the
/// most important.
struct PriorityGroup {
  int index = 1;
  std::vector<EvaluationFunction> functions;
};

bool is_penalty_group(const PriorityGroup& g);

/// Inequality g(x) <= bound, where g is a weighted sum of terms. The weight
/// controls this constraint's share in simultaneous projection steps.
struct Constraint {
  std::vector<EvaluationFunction> terms;
  double bound = 0.0;
  double weight = 1.0;
  std::string label;
};

/// A prioritized problem: hard constraints always hold; priority groups are
/// minimized in index order, each later level constrained to keep earlier
/// objectives within a relative slack of their achieved optima.
struct LexProblem {
  int n_vars = 0;
  DoseMatrix dose;
  std::vector<Structure> structures;
  std::vector<Constraint> hard_constraints;
  std::vector<PriorityGroup> groups;
  double delta_fraction = 0.1;
  bool nonnegative_vars = true;

  int level_count() const { return static_cast<int>(groups.size()); }
  void validate() const;
};

/// Evaluates terms, groups, and constraints at points, caching the dose of
/// the most recent point so repeated reads cost one forward multiplication.
class Evaluator {
 public:
  Evaluator(const DoseMatrix& dose, RunMetrics& metrics);

  const std::vector<double>& dose_at(std::span<const double> x);

  double value(const EvaluationFunction& f, std::span<const double> x);
  double group_value(std::span<const EvaluationFunction> fs, std::span<const double> x);

  /// Gradient of a weighted term sum with respect to x. Counts one gradient
  /// evaluation; penalty terms share a single transpose multiplication.
  std::vector<double> group_gradient(std::span<const EvaluationFunction> fs,
                                     std::span<const double> x);

  double constraint_value(const Constraint& c, std::span<const double> x);
  std::vector<double> constraint_subgradient(const Constraint& c, std::span<const double> x);

  RunMetrics& metrics() { return metrics_; }

 private:
  const DoseMatrix* dose_;
  RunMetrics& metrics_;
  std::vector<double> cached_x_;
  std::vector<double> cached_dose_;
  bool has_cache_ = false;
};

double eval_phi(const LexProblem& problem, int level, std::span<const double> x, Evaluator& ev);
std::vector<double> eval_phi_gradient(const LexProblem& problem, int level,
                                      std::span<const double> x, Evaluator& ev);
std::vector<double> eval_phi_all(const LexProblem& problem, std::span<const double> x,
                                 Evaluator& ev);

}  // namespace slo
