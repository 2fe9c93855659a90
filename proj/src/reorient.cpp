#include "laflow/reorient.hpp"

#include <cmath>

#include "laflow/errors.hpp"

namespace laflow {

namespace {

struct AxisPerm {
  std::array<int, 3> target;   // voxel axis j -> physical axis target[j]
  std::array<int, 3> sign;     // +1 or -1
  bool identity;
};

AxisPerm decompose(const std::array<double, 9>& d) {
  constexpr double tol = 1e-6;
  AxisPerm p{};
  std::array<bool, 3> used{false, false, false};
  p.identity = true;
  for (int j = 0; j < 3; ++j) {
    int hit = -1;
    for (int r = 0; r < 3; ++r) {
      const double e = d[r * 3 + j];
      if (std::abs(std::abs(e) - 1.0) < tol) {
        if (hit >= 0)
          throw UnsupportedOrientation("direction is not an axis permutation");
        hit = r;
        p.sign[j] = e > 0 ? 1 : -1;
      } else if (std::abs(e) > tol) {
        throw UnsupportedOrientation(
            "direction is a general rotation; resampling is not supported");
      }
    }
    if (hit < 0 || used[hit])
      throw UnsupportedOrientation("direction is not an axis permutation");
    used[hit] = true;
    p.target[j] = hit;
    if (hit != j || p.sign[j] != 1) p.identity = false;
  }
  return p;
}

GridMeta reoriented_meta(const GridMeta& m, const AxisPerm& p) {
  GridMeta out = m;
  out.direction = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  for (int j = 0; j < 3; ++j) {
    out.dims[p.target[j]] = m.dims[j];
    out.spacing[p.target[j]] = m.spacing[j];
  }
  // origin = physical position of the voxel that becomes index (0,0,0)
  std::array<int, 3> n0{};
  for (int j = 0; j < 3; ++j) n0[j] = p.sign[j] > 0 ? 0 : m.dims[j] - 1;
  out.origin = m.voxel_center(n0[0], n0[1], n0[2]);
  return out;
}

// Remap a scalar array through the permutation; one frame at a time.
template <typename T>
std::vector<T> permute(const std::vector<T>& in, const GridMeta& m,
                       const GridMeta& om, const AxisPerm& p, int nt) {
  std::vector<T> out(in.size());
  for (int t = 0; t < nt; ++t)
    for (int z = 0; z < m.nz(); ++z)
      for (int y = 0; y < m.ny(); ++y)
        for (int x = 0; x < m.nx(); ++x) {
          const std::array<int, 3> n{x, y, z};
          std::array<int, 3> np{};
          for (int j = 0; j < 3; ++j)
            np[p.target[j]] =
                p.sign[j] > 0 ? n[j] : m.dims[j] - 1 - n[j];
          out[om.index4(np[0], np[1], np[2], t)] =
              in[m.index4(x, y, z, t)];
        }
  return out;
}

}  // namespace

Dataset reorient_to_ras(const Dataset& ds) {
  const GridMeta& m = ds.velocity.meta;
  const AxisPerm p = decompose(m.direction);
  if (p.identity && m.direction_is_identity()) return ds;

  Dataset out;
  out.fluid = ds.fluid;
  out.velocity.meta = reoriented_meta(m, p);
  const GridMeta& om = out.velocity.meta;

  // Rotate components: physical component target[j] takes sign[j] * old j.
  const std::array<const std::vector<float>*, 3> comp_in{
      &ds.velocity.vx, &ds.velocity.vy, &ds.velocity.vz};
  std::array<std::vector<float>*, 3> comp_out{
      &out.velocity.vx, &out.velocity.vy, &out.velocity.vz};
  for (int j = 0; j < 3; ++j) {
    std::vector<float> c = permute(*comp_in[j], m, om, p, m.nt());
    if (p.sign[j] < 0)
      for (float& v : c) v = -v;
    *comp_out[p.target[j]] = std::move(c);
  }

  out.magnitude.meta = om;
  out.magnitude.unit = ds.magnitude.unit;
  out.magnitude.values = permute(ds.magnitude.values, m, om, p, m.nt());

  if (ds.mask) {
    Mask mask;
    mask.meta = om;
    mask.meta.dims[3] = 1;
    GridMeta m1 = m;
    m1.dims[3] = 1;
    GridMeta om1 = om;
    om1.dims[3] = 1;
    mask.labels = permute(ds.mask->labels, m1, om1, p, 1);
    out.mask = std::move(mask);
  }
  return out;
}

}  // namespace laflow
