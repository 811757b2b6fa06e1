#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "slo/model.hpp"

namespace slo {

/// Geometric description of one structure on the voxel grid.
struct StructureSpec {
  enum class Shape { sphere, box, shell, margin, complement };
  enum class Role { target, organ, tissue };

  std::string name;
  Shape shape = Shape::sphere;
  Role role = Role::tissue;
  std::array<double, 3> center{0, 0, 0};
  double radius = 0.0;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
  std::array<double, 3> half_size{0, 0, 0};
  std::string source;       // margin: structure the margin wraps
  double margin_width = 0.0;
  std::vector<std::string> exclude; // complement: empty means "all previous"
  double weight = 1.0;
};

/// Pencil-beam deposition model: exponential depth attenuation times a
/// Gaussian lateral falloff, truncated below `cutoff`.
struct KernelConfig {
  double attenuation = 0.08;
  double lateral_sigma = 0.6;
  double cutoff = 1e-6;
};

struct PhantomConfig {
  std::array<int, 3> grid{8, 8, 8};
  int beam_count = 3;
  int beamlets_per_beam = 6; // lateral offsets; each is repeated per z slice
  std::vector<StructureSpec> structures;
  KernelConfig kernel;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PhantomResult {
  LexProblem problem;
  std::vector<double> reference_fluence; // unit weight on target-covering beamlets
  std::vector<std::string> notes;        // threshold adjustments, dropped groups
};

PhantomResult generate_phantom(const PhantomConfig& config);

struct DvhPoint {
  double dose = 0.0;
  double volume_fraction = 0.0;
};

/// Cumulative dose-volume histogram: fraction of structure voxels at or
/// above each dose level, sampled every `bin_width`.
std::vector<DvhPoint> dvh(std::span<const double> dose, const Structure& s, double bin_width);

}  // namespace slo
