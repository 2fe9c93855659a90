#include "laflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numeric>

#include "laflow/errors.hpp"

namespace laflow {

ProbeRole probe_role_from_string(const std::string& s) {
  if (s == "valve") return ProbeRole::Valve;
  if (s == "vein") return ProbeRole::Vein;
  if (s == "custom") return ProbeRole::Custom;
  throw ConfigError("unknown probe role: " + s);
}

std::vector<Vec3> sphere_voxel_centers(const Mask& mask, int label,
                                       const Probe& probe) {
  if (!(probe.diameter_mm > 0))
    throw GeometryError("probe diameter must be positive");
  const GridMeta& m = mask.meta;
  const double r = probe.diameter_mm / 2.0;
  const Vec3 ci = m.continuous_index(probe.center_mm);
  std::vector<Vec3> pts;
  for (int a = 0; a < 3; ++a)
    if (ci[a] < -r / m.spacing[a] || ci[a] > m.dims[a] + r / m.spacing[a])
      return pts;
  const int x0 = std::max(0, static_cast<int>(std::floor(ci[0] - r / m.spacing[0])));
  const int x1 = std::min(m.nx() - 1, static_cast<int>(std::ceil(ci[0] + r / m.spacing[0])));
  const int y0 = std::max(0, static_cast<int>(std::floor(ci[1] - r / m.spacing[1])));
  const int y1 = std::min(m.ny() - 1, static_cast<int>(std::ceil(ci[1] + r / m.spacing[1])));
  const int z0 = std::max(0, static_cast<int>(std::floor(ci[2] - r / m.spacing[2])));
  const int z1 = std::min(m.nz() - 1, static_cast<int>(std::ceil(ci[2] + r / m.spacing[2])));
  for (int z = z0; z <= z1; ++z)
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        if (mask.at(x, y, z) != label) continue;
        const Vec3 p = m.voxel_center(x, y, z);
        if (norm(p - probe.center_mm) <= r) pts.push_back(p);
      }
  return pts;
}

Vec3 derive_direction(const VelocityField& vel,
                      const std::vector<Vec3>& region_points, int k) {
  const int nt = vel.meta.nt();
  if (k < 1 || k > nt)
    throw ParamError("derive_direction: k must be in [1, nt]");
  if (region_points.empty())
    throw GeometryError("derive_direction: empty region");

  std::vector<Vec3> mean(nt, Vec3{0, 0, 0});
  for (int t = 0; t < nt; ++t) {
    Vec3 acc{0, 0, 0};
    for (const Vec3& p : region_points) acc += vel.sample(p, t);
    mean[t] = (1.0 / region_points.size()) * acc;
  }

  // Stable ordering: speed descending, earlier timestep wins ties.
  std::vector<int> order(nt);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return norm(mean[a]) > norm(mean[b]);
  });

  Vec3 avg{0, 0, 0};
  for (int i = 0; i < k; ++i) avg += mean[order[i]];
  avg = (1.0 / k) * avg;
  if (norm(avg) < 1e-3)
    throw AmbiguousDirection(
        "derive_direction: averaged velocity below 1e-3 m/s");
  return normalized(avg);
}

SectionGrid extract_section(const Mask& mask, int label, const Probe& probe) {
  if (!probe.direction)
    throw GeometryError("extract_section: probe direction not derived");
  if (!mask.contains(probe.center_mm, label))
    throw GeometryError("extract_section: probe center outside mask label");

  SectionGrid grid;
  grid.origin_mm = probe.center_mm;
  grid.normal = normalized(*probe.direction);
  grid.basis_u = orthogonal_unit(grid.normal);
  grid.basis_v = normalized(cross(grid.normal, grid.basis_u));

  const double h =
      0.5 * std::min({mask.meta.spacing[0], mask.meta.spacing[1],
                      mask.meta.spacing[2]});
  const double max_radius = std::max(4.0 * probe.diameter_mm, 32.0);
  const int bound = static_cast<int>(std::ceil(max_radius / h));

  // Flood fill over plane cells, 4-connected, confined to in-mask points.
  std::map<std::pair<int, int>, bool> visited;
  std::deque<std::pair<int, int>> queue;
  queue.push_back({0, 0});
  visited[{0, 0}] = true;
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    const Vec3 p = grid.origin_mm + (i * h) * grid.basis_u +
                   (j * h) * grid.basis_v;
    if (!mask.contains(p, label)) continue;
    grid.samples.push_back({p, h * h});
    if (std::abs(i) >= bound || std::abs(j) >= bound) {
      grid.open_section_warning = true;
      continue;
    }
    for (const auto& [di, dj] :
         {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1},
          std::pair{0, -1}}) {
      const std::pair<int, int> nb{i + di, j + dj};
      if (!visited[nb]) {
        visited[nb] = true;
        queue.push_back(nb);
      }
    }
  }
  return grid;
}

double mask_volume_ml(const Mask& mask, int label) {
  const std::size_t n = mask.count_label(label);
  if (n == 0)
    throw LabelError("mask_volume: label " + std::to_string(label) +
                     " absent");
  return n * mask.meta.voxel_volume_mm3() / 1000.0;
}

double bsa_dubois_m2(double weight_kg, double height_cm) {
  if (!(weight_kg > 0) || !(height_cm > 0))
    throw ParamError("bsa_dubois: weight and height must be positive");
  return 0.007184 * std::pow(height_cm, 0.725) * std::pow(weight_kg, 0.425);
}

double index_by_bsa(double volume_ml, double weight_kg, double height_cm) {
  return volume_ml / bsa_dubois_m2(weight_kg, height_cm);
}

ScalarVolume median_filter3(const ScalarVolume& v) {
  const GridMeta& m = v.meta;
  ScalarVolume out = v;
  float window[27];
  for (int t = 0; t < m.nt(); ++t)
    for (int z = 0; z < m.nz(); ++z)
      for (int y = 0; y < m.ny(); ++y)
        for (int x = 0; x < m.nx(); ++x) {
          int n = 0;
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int xx = x + dx, yy = y + dy, zz = z + dz;
                if (m.in_bounds(xx, yy, zz))
                  window[n++] = v.values[m.index4(xx, yy, zz, t)];
              }
          std::nth_element(window, window + n / 2, window + n);
          float med = window[n / 2];
          if (n % 2 == 0) {
            // even in-bounds count at edges: mean of the middle pair
            const float lo = *std::max_element(window, window + n / 2);
            med = (lo + med) / 2.0f;
          }
          out.values[m.index4(x, y, z, t)] = med;
        }
  return out;
}

PathlineResult trace_pathlines(const VelocityField& vel, const Mask& mask,
                               int label, const std::vector<Vec3>& seeds_mm,
                               int window) {
  if (window < 1) throw ParamError("trace_pathlines: window must be >= 1");
  const int nt = vel.meta.nt();
  const double dt_s = vel.meta.dt_ms * 1e-3;
  const double sub = 0.25;              // substep, frames
  const double sub_s = sub * dt_s;      // substep, seconds
  PathlineResult res;

  for (std::size_t si = 0; si < seeds_mm.size(); ++si) {
    if (!mask.contains(seeds_mm[si], label)) {
      ++res.skipped_seeds;
      continue;
    }
    for (int t0 = 0; t0 < nt; ++t0) {
      Pathline line;
      line.seed_index = static_cast<int>(si);
      line.emit_timestep = t0;
      Vec3 p = seeds_mm[si];
      line.points_mm.push_back(p);
      double tf = t0;
      const int steps = 4 * window;
      for (int s = 0; s < steps; ++s) {
        // RK4, displacement in mm (velocity m/s -> mm/s factor 1000)
        const Vec3 k1 = vel.sample_periodic(p, tf);
        const Vec3 k2 = vel.sample_periodic(
            p + (500.0 * sub_s) * k1, tf + 0.5 * sub);
        const Vec3 k3 = vel.sample_periodic(
            p + (500.0 * sub_s) * k2, tf + 0.5 * sub);
        const Vec3 k4 = vel.sample_periodic(
            p + (1000.0 * sub_s) * k3, tf + sub);
        const Vec3 dp = (1000.0 * sub_s / 6.0) *
                        (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        p += dp;
        tf += sub;
        if (!mask.contains(p, label)) break;
        if (norm(dp) > 0.0) line.points_mm.push_back(p);
      }
      res.lines.push_back(std::move(line));
    }
  }
  return res;
}

}  // namespace laflow
