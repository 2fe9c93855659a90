#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "laflow/grid.hpp"
#include "laflow/vec3.hpp"

namespace laflow {

/// Three velocity components in m/s, layout [t][z][y][x], RAS axes.
struct VelocityField {
  GridMeta meta;
  std::vector<float> vx, vy, vz;

  Vec3 at(int x, int y, int z, int t) const {
    const std::size_t i = meta.index4(x, y, z, t);
    return {vx[i], vy[i], vz[i]};
  }

  /// Trilinear sample at a physical point (mm). Outside the grid -> 0.
  Vec3 sample(const Vec3& p_mm, int t) const;

  /// Sample with linear interpolation in time; tf in frames, wrapped
  /// periodically over the cardiac cycle.
  Vec3 sample_periodic(const Vec3& p_mm, double tf) const;

  void validate() const;
};

/// Scalar voxel data with a declared unit (nt may be 1 or N).
struct ScalarVolume {
  GridMeta meta;
  std::string unit;
  std::vector<float> values;

  float at(int x, int y, int z, int t = 0) const {
    return values[meta.index4(x, y, z, t)];
  }

  void validate() const;
};

/// Integer label volume, nt = 1. 0 = background, 1 = LA, 2 = LV, 3 = aorta.
struct Mask {
  GridMeta meta;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int x, int y, int z) const {
    return labels[meta.index3(x, y, z)];
  }

  bool has_label(int label) const;
  std::size_t count_label(int label) const;

  /// Nearest-voxel label lookup at a physical point; outside grid -> false.
  bool contains(const Vec3& p_mm, int label) const;

  void validate() const;
};

struct Dataset {
  VelocityField velocity;
  ScalarVolume magnitude;
  std::optional<Mask> mask;
  FluidProps fluid;

  void validate() const;
};

/// Zero velocities outside `label` voxels; inside unchanged.
VelocityField apply_mask(const VelocityField& vel, const Mask& mask,
                         int label);

}  // namespace laflow
