#include "slo/model.hpp"

#include <algorithm>
#include <cmath>

#include "slo/errors.hpp"
#include "slo/vec.hpp"

namespace slo {

std::string to_string(FunctionKind kind) {
  switch (kind) {
    case FunctionKind::lower_tail: return "lower_tail";
    case FunctionKind::upper_tail: return "upper_tail";
    case FunctionKind::mean_upper_tail: return "mean_upper_tail";
    case FunctionKind::affine: return "affine";
  }
  throw InvalidInput("unknown function kind value");
}

FunctionKind function_kind_from_string(const std::string& s) {
  if (s == "lower_tail") return FunctionKind::lower_tail;
  if (s == "upper_tail") return FunctionKind::upper_tail;
  if (s == "mean_upper_tail") return FunctionKind::mean_upper_tail;
  if (s == "affine") return FunctionKind::affine;
  throw InvalidInput("unknown function kind '" + s + "'");
}

namespace {

void check_voxels(const EvaluationFunction& f, std::span<const double> dose) {
  if (f.structure.voxels.empty())
    throw InvalidInput("function over structure '" + f.structure.name + "' has no voxels");
  for (int v : f.structure.voxels)
    if (v < 0 || v >= static_cast<int>(dose.size()))
      throw InvalidInput("structure '" + f.structure.name + "' voxel " + std::to_string(v) +
                         " outside dose vector of size " + std::to_string(dose.size()));
}

}  // namespace

double eval_function(const EvaluationFunction& f, std::span<const double> d) {
  switch (f.kind) {
    case FunctionKind::lower_tail: {
      check_voxels(f, d);
      double acc = 0.0;
      for (int v : f.structure.voxels) {
        const double gap = std::max(f.threshold - d[v], 0.0);
        acc += gap * gap;
      }
      return acc / static_cast<double>(f.structure.voxels.size());
    }
    case FunctionKind::upper_tail: {
      check_voxels(f, d);
      double acc = 0.0;
      for (int v : f.structure.voxels) {
        const double gap = std::max(d[v] - f.threshold, 0.0);
        acc += gap * gap;
      }
      return acc / static_cast<double>(f.structure.voxels.size());
    }
    case FunctionKind::mean_upper_tail: {
      check_voxels(f, d);
      double mean = 0.0;
      for (int v : f.structure.voxels) mean += d[v];
      mean /= static_cast<double>(f.structure.voxels.size());
      const double gap = std::max(mean - f.threshold, 0.0);
      return gap * gap;
    }
    case FunctionKind::affine: {
      if (f.affine_coeffs.size() != d.size())
        throw InvalidInput("affine term has " + std::to_string(f.affine_coeffs.size()) +
                           " coefficients for " + std::to_string(d.size()) + " variables");
      return dot(f.affine_coeffs, d) + f.affine_offset;
    }
  }
  throw InvalidInput("unknown function kind value");
}

std::vector<double> eval_function_subgradient(const EvaluationFunction& f,
                                              std::span<const double> d) {
  std::vector<double> g(d.size(), 0.0);
  switch (f.kind) {
    case FunctionKind::lower_tail: {
      check_voxels(f, d);
      const double scale = 2.0 / static_cast<double>(f.structure.voxels.size());
      for (int v : f.structure.voxels) {
        const double gap = std::max(f.threshold - d[v], 0.0);
        if (gap > 0.0) g[v] = -scale * gap;
      }
      return g;
    }
    case FunctionKind::upper_tail: {
      check_voxels(f, d);
      const double scale = 2.0 / static_cast<double>(f.structure.voxels.size());
      for (int v : f.structure.voxels) {
        const double gap = std::max(d[v] - f.threshold, 0.0);
        if (gap > 0.0) g[v] = scale * gap;
      }
      return g;
    }
    case FunctionKind::mean_upper_tail: {
      check_voxels(f, d);
      const double n = static_cast<double>(f.structure.voxels.size());
      double mean = 0.0;
      for (int v : f.structure.voxels) mean += d[v];
      mean /= n;
      const double gap = std::max(mean - f.threshold, 0.0);
      if (gap > 0.0)
        for (int v : f.structure.voxels) g[v] = 2.0 * gap / n;
      return g;
    }
    case FunctionKind::affine: {
      if (f.affine_coeffs.size() != d.size())
        throw InvalidInput("affine term has " + std::to_string(f.affine_coeffs.size()) +
                           " coefficients for " + std::to_string(d.size()) + " variables");
      return f.affine_coeffs;
    }
  }
  throw InvalidInput("unknown function kind value");
}

bool is_penalty_group(const PriorityGroup& g) {
  return std::none_of(g.functions.begin(), g.functions.end(),
                      [](const EvaluationFunction& f) { return f.kind == FunctionKind::affine; });
}

void LexProblem::validate() const {
  if (n_vars < 1) throw InvalidInput("problem needs at least one variable");
  if (dose.empty()) throw InvalidInput("problem has no dose matrix");
  if (dose.cols() != n_vars)
    throw InvalidInput("dose matrix has " + std::to_string(dose.cols()) + " columns for " +
                       std::to_string(n_vars) + " variables");
  for (const auto& s : structures) {
    if (s.voxels.empty()) throw InvalidInput("structure '" + s.name + "' is empty");
    for (std::size_t i = 0; i < s.voxels.size(); ++i) {
      if (s.voxels[i] < 0 || s.voxels[i] >= dose.rows())
        throw InvalidInput("structure '" + s.name + "' voxel " + std::to_string(s.voxels[i]) +
                           " outside dose grid of " + std::to_string(dose.rows()));
      if (i > 0 && s.voxels[i] <= s.voxels[i - 1])
        throw InvalidInput("structure '" + s.name + "' voxels must be strictly increasing");
    }
  }
  auto check_function = [&](const EvaluationFunction& f, const std::string& where) {
    if (!(f.weight > 0.0))
      throw InvalidInput(where + ": term weights must be positive");
    if (f.kind == FunctionKind::affine) {
      if (static_cast<int>(f.affine_coeffs.size()) != n_vars)
        throw InvalidInput(where + ": affine term has " + std::to_string(f.affine_coeffs.size()) +
                           " coefficients for " + std::to_string(n_vars) + " variables");
    } else {
      if (f.structure.voxels.empty())
        throw InvalidInput(where + ": structure '" + f.structure.name + "' is empty");
      for (int v : f.structure.voxels)
        if (v < 0 || v >= dose.rows())
          throw InvalidInput(where + ": structure '" + f.structure.name + "' voxel " +
                             std::to_string(v) + " outside dose grid");
    }
  };
  for (const auto& c : hard_constraints) {
    if (c.terms.empty()) throw InvalidInput("constraint '" + c.label + "' has no terms");
    if (!(c.weight > 0.0))
      throw InvalidInput("constraint '" + c.label + "' weight must be positive");
    for (const auto& f : c.terms) check_function(f, "constraint '" + c.label + "'");
  }
  if (groups.empty()) throw InvalidInput("problem has no priority groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].index != static_cast<int>(i) + 1)
      throw InvalidInput("priority groups must be numbered 1.." + std::to_string(groups.size()) +
                         " in order; group " + std::to_string(i) + " has index " +
                         std::to_string(groups[i].index));
    if (groups[i].functions.empty())
      throw InvalidInput("priority group " + std::to_string(groups[i].index) + " has no terms");
    for (const auto& f : groups[i].functions)
      check_function(f, "group " + std::to_string(groups[i].index));
  }
  if (!(delta_fraction >= 0.0))
    throw InvalidInput("delta_fraction must be nonnegative");
}

Evaluator::Evaluator(const DoseMatrix& dose, RunMetrics& metrics)
    : dose_(&dose), metrics_(metrics) {}

const std::vector<double>& Evaluator::dose_at(std::span<const double> x) {
  if (has_cache_ && cached_x_.size() == x.size() &&
      std::equal(cached_x_.begin(), cached_x_.end(), x.begin()))
    return cached_dose_;
  cached_dose_ = dose_->apply(x, metrics_);
  cached_x_.assign(x.begin(), x.end());
  has_cache_ = true;
  return cached_dose_;
}

double Evaluator::value(const EvaluationFunction& f, std::span<const double> x) {
  if (f.kind == FunctionKind::affine) return eval_function(f, x);
  return eval_function(f, dose_at(x));
}

double Evaluator::group_value(std::span<const EvaluationFunction> fs, std::span<const double> x) {
  double acc = 0.0;
  for (const auto& f : fs) acc += f.weight * value(f, x);
  return acc;
}

std::vector<double> Evaluator::group_gradient(std::span<const EvaluationFunction> fs,
                                              std::span<const double> x) {
  metrics_.add_gradient_eval();
  std::vector<double> grad(x.size(), 0.0);
  std::vector<double> vox;  // accumulated dose-space subgradient
  bool any_vox = false;
  for (const auto& f : fs) {
    if (f.kind == FunctionKind::affine) {
      if (f.affine_coeffs.size() != x.size())
        throw InvalidInput("affine term has " + std::to_string(f.affine_coeffs.size()) +
                           " coefficients for " + std::to_string(x.size()) + " variables");
      for (std::size_t i = 0; i < x.size(); ++i) grad[i] += f.weight * f.affine_coeffs[i];
      continue;
    }
    const auto& d = dose_at(x);
    if (vox.empty()) vox.assign(d.size(), 0.0);
    const auto sub = eval_function_subgradient(f, d);
    for (int v : f.structure.voxels)
      if (sub[v] != 0.0) {
        vox[v] += f.weight * sub[v];
        any_vox = true;
      }
  }
  if (any_vox) {
    const auto back = dose_->apply_transpose(vox, metrics_);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += back[i];
  }
  return grad;
}

double Evaluator::constraint_value(const Constraint& c, std::span<const double> x) {
  return group_value(c.terms, x) - c.bound;
}

std::vector<double> Evaluator::constraint_subgradient(const Constraint& c,
                                                      std::span<const double> x) {
  return group_gradient(c.terms, x);
}

double eval_phi(const LexProblem& problem, int level, std::span<const double> x, Evaluator& ev) {
  if (level < 1 || level > problem.level_count())
    throw InvalidInput("no priority group " + std::to_string(level));
  return ev.group_value(problem.groups[level - 1].functions, x);
}

std::vector<double> eval_phi_gradient(const LexProblem& problem, int level,
                                      std::span<const double> x, Evaluator& ev) {
  if (level < 1 || level > problem.level_count())
    throw InvalidInput("no priority group " + std::to_string(level));
  return ev.group_gradient(problem.groups[level - 1].functions, x);
}

std::vector<double> eval_phi_all(const LexProblem& problem, std::span<const double> x,
                                 Evaluator& ev) {
  std::vector<double> out;
  out.reserve(problem.groups.size());
  for (const auto& g : problem.groups) out.push_back(ev.group_value(g.functions, x));
  return out;
}

}  // namespace slo
