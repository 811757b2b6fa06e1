#include "slo/projection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slo/errors.hpp"
#include "slo/vec.hpp"

namespace slo {

void ProjectionConfig::validate() const {
  if (!(relaxation > 0.0) || !(relaxation < 2.0))
    throw InvalidInput("relaxation must lie strictly between 0 and 2, got " +
                       std::to_string(relaxation));
  if (!(violation_tol >= 0.0)) throw InvalidInput("violation tolerance must be nonnegative");
  if (n_max < 1) throw InvalidInput("projection iteration cap must be at least 1");
}

std::vector<int> violated_set(std::span<const double> x, std::span<const Constraint> constraints,
                              double tol, Evaluator& ev) {
  std::vector<int> out;
  for (std::size_t j = 0; j < constraints.size(); ++j)
    if (ev.constraint_value(constraints[j], x) > tol) out.push_back(static_cast<int>(j));
  return out;
}

double max_violation(std::span<const double> x, std::span<const Constraint> constraints,
                     Evaluator& ev) {
  double worst = 0.0;
  for (const auto& c : constraints) worst = std::max(worst, ev.constraint_value(c, x));
  return worst;
}

std::vector<double> simultaneous_step(std::span<const double> x,
                                      std::span<const Constraint> constraints,
                                      const ProjectionConfig& config, Evaluator& ev) {
  std::vector<double> values(constraints.size());
  std::vector<int> violated;
  for (std::size_t j = 0; j < constraints.size(); ++j) {
    values[j] = ev.constraint_value(constraints[j], x);
    if (values[j] > config.violation_tol) violated.push_back(static_cast<int>(j));
  }
  std::vector<double> next(x.begin(), x.end());
  if (violated.empty()) return next;

  double weight_sum = 0.0;
  for (int j : violated) weight_sum += constraints[j].weight;

  for (int j : violated) {
    const auto xi = ev.constraint_subgradient(constraints[j], x);
    const double s2 = squared_norm(xi);
    if (s2 == 0.0)
      throw ZeroSubgradient("constraint '" + constraints[j].label + "' is violated by " +
                            std::to_string(values[j]) +
                            " but has a zero subgradient, so no projection step can reduce it");
    const double scale = config.relaxation * (constraints[j].weight / weight_sum) * values[j] / s2;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] -= scale * xi[i];
  }
  if (config.clip_nonnegative)
    for (auto& v : next) v = std::max(v, 0.0);
  ev.metrics().add_projection();
  return next;
}

SeekResult seek_feasible(std::span<const double> x0, std::span<const Constraint> constraints,
                         const ProjectionConfig& config, Evaluator& ev,
                         const Perturber& perturber) {
  config.validate();
  std::vector<double> x(x0.begin(), x0.end());
  SeekResult result;
  for (int k = 0;; ++k) {
    const double viol = max_violation(x, constraints, ev);
    if (viol <= config.violation_tol) {
      result.point = std::move(x);
      result.status = SeekStatus::feasible;
      result.max_violation = viol;
      return result;
    }
    if (k == config.n_max) {
      result.point = std::move(x);
      result.status = SeekStatus::exhausted;
      result.max_violation = viol;
      return result;
    }
    if (perturber) {
      const auto p = perturber(k, x);
      if (p.size() != x.size())
        throw InvalidInput("perturbation has " + std::to_string(p.size()) + " entries for " +
                           std::to_string(x.size()) + " variables");
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += p[i];
      if (config.clip_nonnegative)
        for (auto& v : x) v = std::max(v, 0.0);
    }
    x = simultaneous_step(x, constraints, config, ev);
    ++result.steps;
  }
}

}  // namespace slo
