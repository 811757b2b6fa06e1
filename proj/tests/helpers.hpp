#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "slo/model.hpp"

namespace testutil {

// raw engine draws keep the stream identical across standard libraries
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * unit(); }
  int integer(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(unit() * (hi - lo + 1));
  }

  std::vector<double> vector(std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = range(lo, hi);
    return v;
  }

 private:
  std::mt19937_64 engine_;
};

inline slo::EvaluationFunction affine_term(std::vector<double> coeffs, double offset,
                                           double weight = 1.0) {
  slo::EvaluationFunction f;
  f.kind = slo::FunctionKind::affine;
  f.affine_coeffs = std::move(coeffs);
  f.affine_offset = offset;
  f.weight = weight;
  return f;
}

inline slo::EvaluationFunction penalty_term(slo::FunctionKind kind, std::string name,
                                            std::vector<int> voxels, double threshold,
                                            double weight = 1.0) {
  slo::EvaluationFunction f;
  f.kind = kind;
  f.structure = {std::move(name), std::move(voxels)};
  f.threshold = threshold;
  f.weight = weight;
  return f;
}

inline slo::Constraint affine_constraint(std::vector<double> coeffs, double offset,
                                         std::string label) {
  slo::Constraint c;
  c.terms.push_back(affine_term(std::move(coeffs), offset));
  c.label = std::move(label);
  return c;
}

// pentagon in the plane with three competing linear objectives; the
// prioritized optimum sits at the vertex (30, 80)
inline slo::LexProblem make_toy_problem() {
  slo::LexProblem p;
  p.n_vars = 2;
  p.dose = slo::DoseMatrix::identity(2);
  p.delta_fraction = 0.0;
  p.nonnegative_vars = false;
  p.hard_constraints.push_back(affine_constraint({2, 1}, -150, "cap A"));
  p.hard_constraints.push_back(affine_constraint({2, 3}, -300, "cap B"));
  p.hard_constraints.push_back(affine_constraint({4, 3}, -360, "cap C"));
  p.hard_constraints.push_back(affine_constraint({-1, -2}, 120, "floor D"));
  p.hard_constraints.push_back(affine_constraint({-1, 0}, 0, "x1 sign"));
  p.hard_constraints.push_back(affine_constraint({0, -1}, 0, "x2 sign"));
  p.groups.push_back({1, {affine_term({-8, -12}, 0)}});
  p.groups.push_back({2, {affine_term({-14, -10}, 0)}});
  p.groups.push_back({3, {affine_term({-1, -1}, 0)}});
  return p;
}

struct RandomSystem {
  std::vector<slo::Constraint> constraints;
  std::vector<double> feasible_point;
};

// constraints all satisfied at a random interior point with positive slack
inline RandomSystem random_consistent_system(Rng& rng, int n_vars, int n_constraints) {
  RandomSystem sys;
  sys.feasible_point = rng.vector(n_vars, 1.0, 2.0);
  for (int j = 0; j < n_constraints; ++j) {
    auto coeffs = rng.vector(n_vars, -1.0, 1.0);
    double at_feasible = 0.0;
    for (int i = 0; i < n_vars; ++i) at_feasible += coeffs[i] * sys.feasible_point[i];
    const double slack = rng.range(0.1, 1.0);
    sys.constraints.push_back(
        affine_constraint(std::move(coeffs), -(at_feasible + slack), "c" + std::to_string(j)));
  }
  return sys;
}

}  // namespace testutil
