#include "laflow/grid.hpp"

#include <cmath>
#include <string>

#include "laflow/errors.hpp"

namespace laflow {

bool GridMeta::direction_is_identity(double tol) const {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double want = (r == c) ? 1.0 : 0.0;
      if (std::abs(direction[r * 3 + c] - want) > tol) return false;
    }
  return true;
}

bool GridMeta::direction_is_orthonormal(double tol) const {
  // max-norm of D^T D - I
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        s += direction[k * 3 + i] * direction[k * 3 + j];
      const double want = (i == j) ? 1.0 : 0.0;
      if (std::abs(s - want) > tol) return false;
    }
  return true;
}

Vec3 GridMeta::voxel_center(int x, int y, int z) const {
  const Vec3 local{x * spacing[0], y * spacing[1], z * spacing[2]};
  Vec3 p = origin;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p[r] += direction[r * 3 + c] * local[c];
  return p;
}

Vec3 GridMeta::continuous_index(const Vec3& p) const {
  const Vec3 d = p - origin;
  Vec3 local{0, 0, 0};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) local[c] += direction[r * 3 + c] * d[r];
  return {local[0] / spacing[0], local[1] / spacing[1],
          local[2] / spacing[2]};
}

bool GridMeta::same_space(const GridMeta& other, double tol) const {
  for (int i = 0; i < 3; ++i) {
    if (dims[i] != other.dims[i]) return false;
    if (std::abs(spacing[i] - other.spacing[i]) > tol) return false;
    if (std::abs(origin[i] - other.origin[i]) > tol) return false;
  }
  for (int i = 0; i < 9; ++i)
    if (std::abs(direction[i] - other.direction[i]) > tol) return false;
  return true;
}

void GridMeta::validate() const {
  for (int i = 0; i < 4; ++i)
    if (dims[i] < 1)
      throw FormatError("GridMeta: dims must be >= 1 (dim " +
                        std::to_string(i) + " = " + std::to_string(dims[i]) +
                        ")");
  for (int i = 0; i < 3; ++i)
    if (!(spacing[i] > 0.0))
      throw FormatError("GridMeta: spacing must be positive");
  if (!(dt_ms > 0.0)) throw FormatError("GridMeta: dt_ms must be positive");
  if (!(venc_cm_s > 0.0))
    throw FormatError("GridMeta: venc_cm_s must be positive");
  if (!direction_is_orthonormal())
    throw FormatError("GridMeta: direction matrix is not orthonormal");
}

void FluidProps::validate() const {
  if (!(rho > 0.0)) throw ParamError("FluidProps: rho must be positive");
  if (!(mu > 0.0)) throw ParamError("FluidProps: mu must be positive");
}

}  // namespace laflow
