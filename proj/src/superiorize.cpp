#include "slo/superiorize.hpp"

#include <algorithm>
#include <cmath>

#include "slo/errors.hpp"
#include "slo/vec.hpp"

namespace slo {

void SuperiorizationConfig::validate() const {
  if (K < 1) throw InvalidInput("perturbation interval K must be at least 1");
  if (Lambda < 1) throw InvalidInput("accepted-step budget Lambda must be at least 1");
  if (!(base > 0.0) || !(base < 1.0))
    throw InvalidInput("step base must lie strictly between 0 and 1");
  if (!(min_stepsize > 0.0)) throw InvalidInput("minimum step size must be positive");
  for (const auto& [idx, w] : psi_groups) {
    if (idx < 1) throw InvalidInput("guidance group indices must be positive");
    if (!(w > 0.0)) throw InvalidInput("guidance group weights must be positive");
  }
}

std::vector<double> sup_direction(std::span<const double> x,
                                  std::span<const EvaluationFunction> psi, Evaluator& ev) {
  auto grad = ev.group_gradient(psi, x);
  const double n = norm(grad);
  if (n == 0.0) return std::vector<double>(x.size(), 0.0);
  for (auto& g : grad) g = -g / n;
  return grad;
}

Superiorizer::Superiorizer(SuperiorizationConfig config, bool nonnegative_vars)
    : config_(std::move(config)), nonnegative_vars_(nonnegative_vars) {
  config_.validate();
}

std::vector<double> Superiorizer::perturb(std::span<const double> x,
                                          std::span<const EvaluationFunction> psi,
                                          Evaluator& ev) {
  std::vector<double> cur(x.begin(), x.end());
  if (psi.empty()) return cur;
  if (config_.policy == ExponentPolicy::persistent &&
      std::pow(config_.base, exponent_) <= config_.min_stepsize)
    return cur;  // step budget exhausted for the rest of the run
  double psi_cur = ev.group_value(psi, cur);

  int accepted = 0;
  bool steps_remain = true;
  while (accepted < config_.Lambda && steps_remain) {
    const auto dir = sup_direction(cur, psi, ev);
    if (is_zero(dir)) break;

    int local_exponent = 1;
    while (true) {
      const int e = config_.policy == ExponentPolicy::persistent ? exponent_ : local_exponent;
      const double coefficient = std::pow(config_.base, e);
      if (config_.policy == ExponentPolicy::persistent) ++exponent_;

      std::vector<double> candidate(cur.size());
      for (std::size_t i = 0; i < cur.size(); ++i)
        candidate[i] = cur[i] + coefficient * dir[i];

      const bool admissible = !nonnegative_vars_ || all_nonnegative(candidate);
      if (admissible && ev.group_value(psi, candidate) <= psi_cur) {
        cur = std::move(candidate);
        psi_cur = ev.group_value(psi, cur);
        ev.metrics().add_sup_step();
        ++accepted;
        break;
      }
      if (config_.policy == ExponentPolicy::reset_per_call) {
        if (coefficient > config_.min_stepsize) {
          ++local_exponent;
        } else {
          steps_remain = false;
          break;
        }
      } else if (coefficient <= config_.min_stepsize) {
        steps_remain = false;
        break;
      }
    }
  }
  return cur;
}

std::vector<EvaluationFunction> make_psi(const LexProblem& problem, int level,
                                         const SuperiorizationConfig& config) {
  std::vector<EvaluationFunction> psi;
  if (config.psi_groups.empty()) {
    if (level < problem.level_count()) psi = problem.groups[level].functions;
    return psi;
  }
  for (const auto& [idx, w] : config.psi_groups) {
    if (idx <= level || idx > problem.level_count()) continue;
    for (EvaluationFunction f : problem.groups[idx - 1].functions) {
      f.weight *= w;
      psi.push_back(std::move(f));
    }
  }
  return psi;
}

}  // namespace slo
