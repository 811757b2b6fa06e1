#include "slo/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string>

#include "slo/errors.hpp"

namespace slo {

void PhantomConfig::validate() const {
  for (int d : grid)
    if (d < 1) throw InvalidInput("phantom grid dimensions must be positive");
  if (beam_count < 1) throw InvalidInput("phantom needs at least one beam");
  if (beamlets_per_beam < 1) throw InvalidInput("phantom needs at least one beamlet per beam");
  if (structures.empty()) throw InvalidInput("phantom needs at least one structure");
  bool has_target = false;
  std::set<std::string> names;
  for (const auto& s : structures) {
    if (s.name.empty()) throw InvalidInput("phantom structures need names");
    if (!names.insert(s.name).second)
      throw InvalidInput("duplicate phantom structure name '" + s.name + "'");
    if (s.role == StructureSpec::Role::target) has_target = true;
  }
  if (!has_target) throw InvalidInput("phantom needs a target structure");
  if (!(kernel.attenuation > 0.0)) throw InvalidInput("kernel attenuation must be positive");
  if (!(kernel.lateral_sigma > 0.0)) throw InvalidInput("kernel lateral sigma must be positive");
  if (!(kernel.cutoff > 0.0) || !(kernel.cutoff < 1.0))
    throw InvalidInput("kernel cutoff must lie strictly between 0 and 1");
}

namespace {

struct Vec3 {
  double x = 0, y = 0, z = 0;
};

double dist2(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

// uniform in [0, 1); raw engine draws so the stream is identical everywhere
double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<int> rasterize(const StructureSpec& spec,
                           const std::vector<std::pair<std::string, std::vector<int>>>& previous,
                           const std::array<int, 3>& grid) {
  const int nx = grid[0], ny = grid[1], nz = grid[2];
  auto center_of = [&](int linear) {
    Vec3 p;
    p.x = linear % nx + 0.5;
    p.y = (linear / nx) % ny + 0.5;
    p.z = linear / (nx * ny) + 0.5;
    return p;
  };
  auto find_previous = [&](const std::string& name) -> const std::vector<int>& {
    for (const auto& [n, v] : previous)
      if (n == name) return v;
    throw InvalidInput("structure '" + spec.name + "' refers to unknown structure '" + name +
                       "'");
  };

  const int total = nx * ny * nz;
  std::vector<int> voxels;
  switch (spec.shape) {
    case StructureSpec::Shape::sphere: {
      const Vec3 c{spec.center[0], spec.center[1], spec.center[2]};
      const double r2 = spec.radius * spec.radius;
      for (int i = 0; i < total; ++i)
        if (dist2(center_of(i), c) <= r2) voxels.push_back(i);
      break;
    }
    case StructureSpec::Shape::box: {
      for (int i = 0; i < total; ++i) {
        const Vec3 p = center_of(i);
        if (std::fabs(p.x - spec.center[0]) <= spec.half_size[0] &&
            std::fabs(p.y - spec.center[1]) <= spec.half_size[1] &&
            std::fabs(p.z - spec.center[2]) <= spec.half_size[2])
          voxels.push_back(i);
      }
      break;
    }
    case StructureSpec::Shape::shell: {
      const Vec3 c{spec.center[0], spec.center[1], spec.center[2]};
      const double lo2 = spec.inner_radius * spec.inner_radius;
      const double hi2 = spec.outer_radius * spec.outer_radius;
      for (int i = 0; i < total; ++i) {
        const double d2 = dist2(center_of(i), c);
        if (d2 >= lo2 && d2 <= hi2) voxels.push_back(i);
      }
      break;
    }
    case StructureSpec::Shape::margin: {
      const auto& source = find_previous(spec.source);
      std::vector<bool> in_source(total, false);
      for (int v : source) in_source[v] = true;
      const double w2 = spec.margin_width * spec.margin_width;
      for (int i = 0; i < total; ++i) {
        if (in_source[i]) continue;
        const Vec3 p = center_of(i);
        for (int q : source)
          if (dist2(p, center_of(q)) <= w2) {
            voxels.push_back(i);
            break;
          }
      }
      break;
    }
    case StructureSpec::Shape::complement: {
      std::vector<bool> excluded(total, false);
      if (spec.exclude.empty()) {
        for (const auto& [n, vs] : previous)
          for (int v : vs) excluded[v] = true;
      } else {
        for (const auto& name : spec.exclude)
          for (int v : find_previous(name)) excluded[v] = true;
      }
      for (int i = 0; i < total; ++i)
        if (!excluded[i]) voxels.push_back(i);
      break;
    }
  }
  return voxels;
}

struct RefStats {
  double min = 0, max = 0, mean = 0;
};

RefStats stats_over(const std::vector<double>& dose, const std::vector<int>& voxels) {
  RefStats s;
  s.min = dose[voxels[0]];
  s.max = dose[voxels[0]];
  for (int v : voxels) {
    s.min = std::min(s.min, dose[v]);
    s.max = std::max(s.max, dose[v]);
    s.mean += dose[v];
  }
  s.mean /= static_cast<double>(voxels.size());
  return s;
}

EvaluationFunction penalty_term(FunctionKind kind, const Structure& s, double threshold,
                                double weight) {
  EvaluationFunction f;
  f.kind = kind;
  f.structure = s;
  f.threshold = threshold;
  f.weight = weight;
  return f;
}

}  // namespace

PhantomResult generate_phantom(const PhantomConfig& config) {
  config.validate();
  const int nx = config.grid[0], ny = config.grid[1], nz = config.grid[2];
  const int n_voxels = nx * ny * nz;

  PhantomResult result;
  auto& notes = result.notes;

  // --- structures, resolving same-role overlaps in declaration order
  std::vector<std::pair<std::string, std::vector<int>>> raster;
  std::vector<std::vector<int>> voxel_sets;
  {
    std::vector<std::vector<bool>> claimed_by_role(3, std::vector<bool>(n_voxels, false));
    for (const auto& spec : config.structures) {
      auto voxels = rasterize(spec, raster, config.grid);
      auto& claimed = claimed_by_role[static_cast<int>(spec.role)];
      std::vector<int> kept;
      for (int v : voxels) {
        if (claimed[v]) continue;
        claimed[v] = true;
        kept.push_back(v);
      }
      if (kept.size() != voxels.size())
        notes.push_back("structure '" + spec.name + "' lost " +
                        std::to_string(voxels.size() - kept.size()) +
                        " voxels to earlier structures of the same role");
      if (kept.empty())
        throw InvalidInput("structure '" + spec.name + "' rasterized to zero voxels");
      raster.emplace_back(spec.name, kept);
      voxel_sets.push_back(std::move(kept));
    }
  }

  // --- beamlet columns confined to the targets' beam's-eye view so every
  // beamlet contributes to coverage; beam-major, then lateral offset, then
  // z slice within the targets' z extent
  std::vector<bool> is_target_voxel(n_voxels, false);
  for (std::size_t i = 0; i < config.structures.size(); ++i)
    if (config.structures[i].role == StructureSpec::Role::target)
      for (int v : voxel_sets[i]) is_target_voxel[v] = true;

  int z_lo = nz, z_hi = -1;
  for (int v = 0; v < n_voxels; ++v)
    if (is_target_voxel[v]) {
      const int iz = v / (nx * ny);
      z_lo = std::min(z_lo, iz);
      z_hi = std::max(z_hi, iz);
    }

  const int n_beamlets = config.beamlets_per_beam;
  const int n_slices = z_hi - z_lo + 1;
  const int n_cols = config.beam_count * n_beamlets * n_slices;
  std::mt19937_64 rng(config.seed);
  const double cx = nx / 2.0, cy = ny / 2.0;
  const double mu = config.kernel.attenuation;
  const double two_sigma2 = 2.0 * config.kernel.lateral_sigma * config.kernel.lateral_sigma;

  std::vector<DoseMatrix::Entry> entries;
  std::vector<bool> column_used(n_cols, false);
  for (int b = 0; b < config.beam_count; ++b) {
    const double theta = M_PI * static_cast<double>(b) / static_cast<double>(config.beam_count);
    const double dx = std::cos(theta), dy = std::sin(theta);
    const double ux = -dy, uy = dx;
    double proj_lo = std::numeric_limits<double>::infinity(), proj_hi = -proj_lo;
    for (int v = 0; v < n_voxels; ++v)
      if (is_target_voxel[v]) {
        const int ix = v % nx, iy = (v / nx) % ny;
        const double proj = (ix + 0.5 - cx) * ux + (iy + 0.5 - cy) * uy;
        proj_lo = std::min(proj_lo, proj);
        proj_hi = std::max(proj_hi, proj);
      }
    const double spacing = (proj_hi - proj_lo + 1.0) / static_cast<double>(n_beamlets);
    for (int l = 0; l < n_beamlets; ++l) {
      const double jitter = 2.0 * unit_draw(rng) - 1.0;
      const double off = proj_lo - 0.5 + (l + 0.5) * spacing + 0.1 * spacing * jitter;
      const double ox = cx + ux * off, oy = cy + uy * off;
      // parameter at which the ray enters the xy extent of the volume
      double t_entry = -std::numeric_limits<double>::infinity();
      if (dx != 0.0)
        t_entry = std::max(t_entry, std::min((0.0 - ox) / dx, (nx - ox) / dx));
      if (dy != 0.0)
        t_entry = std::max(t_entry, std::min((0.0 - oy) / dy, (ny - oy) / dy));
      for (int s = z_lo; s <= z_hi; ++s) {
        const int col = (b * n_beamlets + l) * n_slices + (s - z_lo);
        const double oz = s + 0.5;
        for (int iz = 0; iz < nz; ++iz)
          for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
              const double px = ix + 0.5, py = iy + 0.5, pz = iz + 0.5;
              const double along = (px - ox) * dx + (py - oy) * dy;
              const double qx = ox + along * dx, qy = oy + along * dy;
              const double lat2 = (px - qx) * (px - qx) + (py - qy) * (py - qy) +
                                  (pz - oz) * (pz - oz);
              const double depth = std::max(0.0, along - t_entry);
              const double value = std::exp(-mu * depth) * std::exp(-lat2 / two_sigma2);
              if (value < config.kernel.cutoff) continue;
              entries.push_back({ix + nx * (iy + ny * iz), col, value});
              column_used[col] = true;
            }
      }
    }
  }
  for (int c = 0; c < n_cols; ++c)
    if (!column_used[c])
      throw InvalidInput("beamlet column " + std::to_string(c) +
                         " deposits no dose anywhere; widen the kernel or lower the cutoff");

  // --- reference plan: unit weight on every beamlet that touches a target
  std::vector<double> x_ref(n_cols, 0.0);
  for (const auto& e : entries)
    if (is_target_voxel[e.row]) x_ref[e.col] = 1.0;

  std::vector<double> d_ref(n_voxels, 0.0);
  for (const auto& e : entries) d_ref[e.row] += e.value * x_ref[e.col];

  double target_mean = 0.0;
  int target_count = 0;
  for (int v = 0; v < n_voxels; ++v)
    if (is_target_voxel[v]) {
      target_mean += d_ref[v];
      ++target_count;
    }
  target_mean /= static_cast<double>(target_count);
  if (!(target_mean > 0.0))
    throw InvalidInput("reference plan deposits no dose in the target; check beam geometry");
  const double scale = 60.0 / target_mean;
  for (auto& e : entries) e.value *= scale;
  for (auto& d : d_ref) d *= scale;
  notes.push_back("dose matrix scaled by " + std::to_string(scale) +
                  " so the reference plan's mean target dose is 60");

  // --- prescription thresholds from the reference plan's statistics
  LexProblem& problem = result.problem;
  problem.n_vars = n_cols;
  problem.dose = DoseMatrix(n_voxels, n_cols, entries);
  problem.delta_fraction = 0.1;
  problem.nonnegative_vars = true;

  std::vector<std::vector<EvaluationFunction>> group_terms(3);
  int organ_ordinal = 0;
  for (std::size_t i = 0; i < config.structures.size(); ++i) {
    const auto& spec = config.structures[i];
    Structure s{spec.name, voxel_sets[i]};
    problem.structures.push_back(s);
    const RefStats st = stats_over(d_ref, s.voxels);

    switch (spec.role) {
      case StructureSpec::Role::target: {
        problem.hard_constraints.push_back(
            {{penalty_term(FunctionKind::lower_tail, s, 0.95 * st.min, 1.0)}, 0.0, 1.0,
             spec.name + " minimum dose"});
        problem.hard_constraints.push_back(
            {{penalty_term(FunctionKind::upper_tail, s, 1.05 * st.max, 1.0)}, 0.0, 1.0,
             spec.name + " maximum dose"});
        group_terms[0].push_back(
            penalty_term(FunctionKind::lower_tail, s, 0.5 * (st.min + st.mean), spec.weight));
        break;
      }
      case StructureSpec::Role::organ: {
        if (organ_ordinal == 0) {
          problem.hard_constraints.push_back(
              {{penalty_term(FunctionKind::upper_tail, s, st.max, 1.0)}, 0.0, 1.0,
               spec.name + " maximum dose"});
          group_terms[1].push_back(
              penalty_term(FunctionKind::mean_upper_tail, s, 0.15 * st.mean, spec.weight));
        } else if (organ_ordinal % 2 == 1) {
          group_terms[0].push_back(
              penalty_term(FunctionKind::upper_tail, s, 0.8 * st.max, spec.weight));
        } else {
          group_terms[2].push_back(
              penalty_term(FunctionKind::upper_tail, s, 0.9 * st.max, spec.weight));
        }
        ++organ_ordinal;
        break;
      }
      case StructureSpec::Role::tissue: {
        if (spec.shape == StructureSpec::Shape::margin)
          group_terms[2].push_back(
              penalty_term(FunctionKind::mean_upper_tail, s, 0.25 * st.mean, spec.weight));
        else
          group_terms[1].push_back(
              penalty_term(FunctionKind::mean_upper_tail, s, 0.10 * st.mean, spec.weight));
        break;
      }
    }
  }

  int next_index = 1;
  for (std::size_t g = 0; g < group_terms.size(); ++g) {
    if (group_terms[g].empty()) {
      notes.push_back("priority " + std::to_string(g + 1) + " has no terms; dropped");
      continue;
    }
    problem.groups.push_back({next_index++, std::move(group_terms[g])});
  }

  // --- the reference plan must satisfy every hard constraint
  RunMetrics scratch;
  Evaluator ev(problem.dose, scratch);
  for (auto& c : problem.hard_constraints) {
    if (ev.constraint_value(c, x_ref) <= 1e-9) continue;
    auto& f = c.terms.front();
    const RefStats st = stats_over(d_ref, f.structure.voxels);
    const double relaxed = f.kind == FunctionKind::lower_tail ? st.min : st.max;
    notes.push_back("relaxed '" + c.label + "' threshold from " + std::to_string(f.threshold) +
                    " to " + std::to_string(relaxed) + " so the reference plan is feasible");
    f.threshold = relaxed;
  }

  problem.validate();
  result.reference_fluence = std::move(x_ref);
  return result;
}

std::vector<DvhPoint> dvh(std::span<const double> dose, const Structure& s, double bin_width) {
  if (!(bin_width > 0.0)) throw InvalidInput("DVH bin width must be positive");
  if (s.voxels.empty()) throw InvalidInput("DVH of empty structure '" + s.name + "'");
  double dmax = 0.0;
  for (int v : s.voxels) {
    if (v < 0 || v >= static_cast<int>(dose.size()))
      throw InvalidInput("structure '" + s.name + "' voxel " + std::to_string(v) +
                         " outside dose vector");
    dmax = std::max(dmax, dose[v]);
  }
  std::vector<DvhPoint> points;
  const double n = static_cast<double>(s.voxels.size());
  for (int k = 0;; ++k) {
    const double t = k * bin_width;
    int count = 0;
    for (int v : s.voxels)
      if (dose[v] >= t) ++count;
    points.push_back({t, count / n});
    if (t > dmax) break;
  }
  return points;
}

}  // namespace slo
