#pragma once

#include <span>
#include <utility>
#include <vector>

#include "slo/model.hpp"

namespace slo {

/// How the step-size exponent evolves across perturbation calls.
enum class ExponentPolicy {
  reset_per_call, // exponent restarts at 1 inside every accepted-step search
  persistent,     // one exponent counter for the whole run, advanced per candidate
};

struct SuperiorizationConfig {
  int K = 1;                    // perturb after every K successful seeks
  int Lambda = 1;               // accepted steps per perturbation call
  double base = 0.5;            // step sizes are base^exponent
  double min_stepsize = 1e-6;   // exponents stop growing once steps shrink below this
  ExponentPolicy policy = ExponentPolicy::persistent;
  // Optional override for the guidance objective: (group index, weight)
  // pairs merged into one weighted term set. Empty means "next level".
  std::vector<std::pair<int, double>> psi_groups;

  void validate() const;
};

/// Normalized descent direction of the guidance objective, or zero where the
/// objective is flat.
std::vector<double> sup_direction(std::span<const double> x,
                                  std::span<const EvaluationFunction> psi, Evaluator& ev);

/// Applies objective-reducing perturbations between feasibility seeks.
/// Each call takes up to Lambda accepted steps along the current descent
/// direction; a candidate is accepted only if it stays in the admissible
/// orthant and does not increase the guidance objective.
class Superiorizer {
 public:
  Superiorizer(SuperiorizationConfig config, bool nonnegative_vars);

  std::vector<double> perturb(std::span<const double> x,
                              std::span<const EvaluationFunction> psi, Evaluator& ev);

  int next_exponent() const { return exponent_; }
  const SuperiorizationConfig& config() const { return config_; }

 private:
  SuperiorizationConfig config_;
  bool nonnegative_vars_;
  int exponent_ = 1; // used by the persistent policy
};

/// Guidance term set for a given level (1-based): the next group's terms by
/// default, or the configured mixture. Empty when the level has nothing
/// after it to steer toward.
std::vector<EvaluationFunction> make_psi(const LexProblem& problem, int level,
                                         const SuperiorizationConfig& config);

}  // namespace slo
