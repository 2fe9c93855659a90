#include "laflow/fields.hpp"

#include <cmath>
#include <string>

#include "laflow/errors.hpp"

namespace laflow {

namespace {

// Trilinear weights for one component array.
double trilinear(const std::vector<float>& a, const GridMeta& m,
                 double u, double v, double w, int t) {
  const int x0 = static_cast<int>(std::floor(u));
  const int y0 = static_cast<int>(std::floor(v));
  const int z0 = static_cast<int>(std::floor(w));
  const double fx = u - x0, fy = v - y0, fz = w - z0;
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const int x = x0 + dx, y = y0 + dy, z = z0 + dz;
        if (!m.in_bounds(x, y, z)) continue;
        const double wgt = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) *
                           (dz ? fz : 1.0 - fz);
        acc += wgt * a[m.index4(x, y, z, t)];
      }
  return acc;
}

}  // namespace

Vec3 VelocityField::sample(const Vec3& p_mm, int t) const {
  const Vec3 ci = meta.continuous_index(p_mm);
  if (ci[0] < -1.0 || ci[0] > meta.nx() || ci[1] < -1.0 ||
      ci[1] > meta.ny() || ci[2] < -1.0 || ci[2] > meta.nz())
    return {0, 0, 0};
  return {trilinear(vx, meta, ci[0], ci[1], ci[2], t),
          trilinear(vy, meta, ci[0], ci[1], ci[2], t),
          trilinear(vz, meta, ci[0], ci[1], ci[2], t)};
}

Vec3 VelocityField::sample_periodic(const Vec3& p_mm, double tf) const {
  const int nt = meta.nt();
  double w = tf - nt * std::floor(tf / nt);
  const int t0 = static_cast<int>(std::floor(w)) % nt;
  const int t1 = (t0 + 1) % nt;
  const double f = w - std::floor(w);
  const Vec3 a = sample(p_mm, t0);
  const Vec3 b = sample(p_mm, t1);
  return (1.0 - f) * a + f * b;
}

void VelocityField::validate() const {
  meta.validate();
  const std::size_t n = meta.total_size();
  if (vx.size() != n || vy.size() != n || vz.size() != n)
    throw FormatError("VelocityField: component length != dims product");
  const double vmax = 2.0 * meta.venc_cm_s / 100.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double s2 = static_cast<double>(vx[i]) * vx[i] +
                      static_cast<double>(vy[i]) * vy[i] +
                      static_cast<double>(vz[i]) * vz[i];
    if (!std::isfinite(s2))
      throw FormatError("VelocityField: non-finite velocity");
    if (s2 > vmax * vmax * (1.0 + 1e-6))
      throw FormatError("VelocityField: |v| exceeds 2*venc at voxel " +
                        std::to_string(i));
  }
}

void ScalarVolume::validate() const {
  meta.validate();
  if (values.size() != meta.total_size())
    throw FormatError("ScalarVolume: length != dims product");
  for (const float v : values)
    if (!std::isfinite(v)) throw FormatError("ScalarVolume: non-finite value");
}

bool Mask::has_label(int label) const { return count_label(label) > 0; }

std::size_t Mask::count_label(int label) const {
  std::size_t n = 0;
  for (const auto l : labels)
    if (l == label) ++n;
  return n;
}

bool Mask::contains(const Vec3& p_mm, int label) const {
  const Vec3 ci = meta.continuous_index(p_mm);
  const int x = static_cast<int>(std::lround(ci[0]));
  const int y = static_cast<int>(std::lround(ci[1]));
  const int z = static_cast<int>(std::lround(ci[2]));
  if (!meta.in_bounds(x, y, z)) return false;
  return at(x, y, z) == label;
}

void Mask::validate() const {
  meta.validate();
  if (meta.nt() != 1) throw FormatError("Mask: nt must be 1");
  if (labels.size() != meta.frame_size())
    throw FormatError("Mask: length != dims product");
}

void Dataset::validate() const {
  velocity.validate();
  magnitude.validate();
  fluid.validate();
  if (!velocity.meta.same_space(magnitude.meta))
    throw FormatError("Dataset: magnitude grid differs from velocity grid");
  if (mask) {
    mask->validate();
    if (!velocity.meta.same_space(mask->meta))
      throw FormatError("Dataset: mask grid differs from velocity grid");
  }
}

VelocityField apply_mask(const VelocityField& vel, const Mask& mask,
                         int label) {
  if (!vel.meta.same_space(mask.meta))
    throw FormatError("apply_mask: grid mismatch");
  if (!mask.has_label(label))
    throw LabelError("apply_mask: label " + std::to_string(label) +
                     " absent from mask");
  VelocityField out = vel;
  const std::size_t fs = vel.meta.frame_size();
  for (int t = 0; t < vel.meta.nt(); ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * fs;
    for (std::size_t i = 0; i < fs; ++i) {
      if (mask.labels[i] != label) {
        out.vx[off + i] = 0.0f;
        out.vy[off + i] = 0.0f;
        out.vz[off + i] = 0.0f;
      }
    }
  }
  return out;
}

}  // namespace laflow
