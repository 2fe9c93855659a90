#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

#include "laflow/vec3.hpp"

namespace laflow {

/// Grid metadata shared by every volume of one acquisition.
/// Arrays are C-order [t][z][y][x] with x fastest.
struct GridMeta {
  std::array<int, 4> dims{1, 1, 1, 1};  // nx, ny, nz, nt
  Vec3 spacing{1.0, 1.0, 1.0};          // mm
  Vec3 origin{0.0, 0.0, 0.0};           // mm
  std::array<double, 9> direction{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  double dt_ms = 1.0;
  double venc_cm_s = 150.0;

  int nx() const { return dims[0]; }
  int ny() const { return dims[1]; }
  int nz() const { return dims[2]; }
  int nt() const { return dims[3]; }

  std::size_t frame_size() const {
    return static_cast<std::size_t>(nx()) * ny() * nz();
  }
  std::size_t total_size() const { return frame_size() * nt(); }

  std::size_t index3(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * ny() + y) * nx() + x;
  }
  std::size_t index4(int x, int y, int z, int t) const {
    return static_cast<std::size_t>(t) * frame_size() + index3(x, y, z);
  }

  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && x < nx() && y >= 0 && y < ny() && z >= 0 && z < nz();
  }

  double voxel_volume_mm3() const {
    return spacing[0] * spacing[1] * spacing[2];
  }

  bool direction_is_identity(double tol = 1e-9) const;
  bool direction_is_orthonormal(double tol = 1e-6) const;

  /// Physical position (mm) of the voxel center at integer index.
  Vec3 voxel_center(int x, int y, int z) const;

  /// Continuous voxel index of a physical point (mm). Uses the transpose
  /// of the direction matrix, valid for orthonormal directions.
  Vec3 continuous_index(const Vec3& p) const;

  /// Equality of the spatial part (dims[0..2], spacing, origin, direction).
  bool same_space(const GridMeta& other, double tol = 1e-9) const;

  /// Throws FormatError when any invariant is violated.
  void validate() const;
};

/// Blood properties; defaults are the conventional literature values.
struct FluidProps {
  double rho = 1060.0;  // kg/m^3
  double mu = 0.0035;   // Pa.s

  void validate() const;
};

constexpr double kMmHgPerPa = 1.0 / 133.322;

}  // namespace laflow
