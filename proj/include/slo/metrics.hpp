#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace slo {

/// Counters for one optimization level.
struct LevelCounters {
  std::int64_t dose_mults = 0;
  std::int64_t projections = 0;
  std::int64_t gradient_evals = 0;
  std::int64_t sup_steps = 0;
  double wall_seconds = 0.0;
};

/// Per-level instrumentation of a solver run. Dose-matrix products are the
/// unit of computational progress; every counter update is attributed to
/// whichever level is active when the work happens.
class RunMetrics {
 public:
  RunMetrics() : per_level_(1) {}
  explicit RunMetrics(int level_count)
      : per_level_(static_cast<std::size_t>(std::max(level_count, 1))) {}

  int level_count() const { return static_cast<int>(per_level_.size()); }

  /// Selects the 0-based level that subsequent counts belong to.
  void set_active_level(int level) {
    active_ = std::min(static_cast<std::size_t>(std::max(level, 0)), per_level_.size() - 1);
  }
  int active_level() const { return static_cast<int>(active_); }

  void add_dose_mult() { ++per_level_[active_].dose_mults; }
  void add_projection() { ++per_level_[active_].projections; }
  void add_gradient_eval() { ++per_level_[active_].gradient_evals; }
  void add_sup_step() { ++per_level_[active_].sup_steps; }
  void add_wall_seconds(double s) { per_level_[active_].wall_seconds += s; }

  const std::vector<LevelCounters>& per_level() const { return per_level_; }

  LevelCounters totals() const {
    LevelCounters t;
    for (const auto& c : per_level_) {
      t.dose_mults += c.dose_mults;
      t.projections += c.projections;
      t.gradient_evals += c.gradient_evals;
      t.sup_steps += c.sup_steps;
      t.wall_seconds += c.wall_seconds;
    }
    return t;
  }

  /// phi value of every priority group at each level's starting point,
  /// recorded before any work on that level.
  std::vector<std::vector<double>> phi_at_level_entry;

 private:
  std::vector<LevelCounters> per_level_;
  std::size_t active_ = 0;
};

}  // namespace slo
