#include "slo/levelset.hpp"

#include <algorithm>
#include <cmath>

#include "slo/errors.hpp"
#include "slo/vec.hpp"

namespace slo {

double reduce_bound(double current, double fraction, double abs_step,
                    std::optional<double> floor) {
  double next = current - std::max(fraction * std::fabs(current), abs_step);
  if (floor && next < *floor) next = *floor;
  return next;
}

namespace {

bool within_target(const LexProblem& problem, std::span<const double> x,
                   const KnownOptimumRule& rule, Evaluator& ev) {
  const auto phi = eval_phi_all(problem, x, ev);
  double dist2 = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const double diff = phi[i] - rule.phi_target[i];
    dist2 += diff * diff;
  }
  return std::sqrt(dist2) <= rule.tolerance;
}

}  // namespace

CfpOutcome find_feasible_solution(double bound, std::span<const double> start,
                                  std::span<const double> fallback, const LevelContext& ctx,
                                  const LevelSetConfig& config, Evaluator& ev) {
  std::vector<Constraint> cfp(ctx.accumulated.begin(), ctx.accumulated.end());
  cfp.push_back(Constraint{ctx.objective->functions, bound, 1.0, "objective bound"});
  const std::size_t bound_idx = cfp.size() - 1;

  std::vector<double> x(start.begin(), start.end());
  std::vector<double> best(fallback.begin(), fallback.end());
  double best_phi = ev.group_value(ctx.objective->functions, best);

  const auto& proj = config.projection;
  for (int k = 0;; ++k) {
    double acc_viol = 0.0;
    bool any_violated = false;
    double bound_value = 0.0;
    for (std::size_t j = 0; j < cfp.size(); ++j) {
      const double v = ev.constraint_value(cfp[j], x);
      if (j == bound_idx)
        bound_value = v;
      else
        acc_viol = std::max(acc_viol, v);
      if (v > proj.violation_tol) any_violated = true;
    }
    const double phi = bound_value + bound;

    if (acc_viol <= proj.violation_tol) {
      if (phi < best_phi) {
        best_phi = phi;
        best.assign(x.begin(), x.end());
      }
      if (ctx.stop_rule && within_target(*ctx.problem, x, *ctx.stop_rule, ev))
        return {std::move(x), phi, bound_value <= proj.violation_tol, true};
      if (!any_violated) return {std::move(x), phi, true, false};
    }

    if (k == proj.n_max) break;
    x = simultaneous_step(x, cfp, proj, ev);
  }
  return {std::move(best), best_phi, false, false};
}

void run_level(LevelState& state, const LevelContext& ctx, const LevelSetConfig& config,
               Evaluator& ev, const LevelHooks& hooks) {
  const std::optional<double> floor =
      is_penalty_group(*ctx.objective) ? std::optional<double>(config.t_min) : std::nullopt;

  std::vector<double> x = state.best_feasible;
  state.bound = reduce_bound(ev.group_value(ctx.objective->functions, x), config.reduce_fraction,
                             config.reduce_abs, floor);

  while (!state.finished) {
    CfpOutcome out = find_feasible_solution(state.bound, x, state.best_feasible, ctx, config, ev);
    if (out.stop_rule_hit) {
      state.best_feasible = std::move(out.point);
      state.phi_star = out.phi_value;
      state.finished = true;
      state.stop_rule_hit = true;
      if (hooks.on_accepted) hooks.on_accepted(state.best_feasible, out.phi_value);
      break;
    }
    if (out.success) {
      ++state.cfp_success_count;
      state.best_feasible = out.point;
      x = std::move(out.point);
      if (hooks.on_accepted) hooks.on_accepted(state.best_feasible, out.phi_value);
      if (floor && state.bound == *floor) {
        state.phi_star = out.phi_value;
        state.finished = true;
        break;
      }
      if (hooks.superiorize && hooks.superiorize_every > 0 &&
          state.cfp_success_count % hooks.superiorize_every == 0) {
        // perturbed iterate may be infeasible; the next seek restores it
        x = hooks.superiorize(x);
      }
      state.bound = reduce_bound(ev.group_value(ctx.objective->functions, x),
                                 config.reduce_fraction, config.reduce_abs, floor);
    } else {
      state.best_feasible = std::move(out.point);
      state.phi_star = out.phi_value;
      state.finished = true;
      if (hooks.on_accepted) hooks.on_accepted(state.best_feasible, out.phi_value);
      break;
    }
  }
}

}  // namespace slo
