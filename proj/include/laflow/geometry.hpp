#pragma once

#include <vector>

#include "laflow/fields.hpp"
#include "laflow/geometry_types.hpp"

namespace laflow {

/// In-mask voxel centers inside the probe sphere.
std::vector<Vec3> sphere_voxel_centers(const Mask& mask, int label,
                                       const Probe& probe);

/// Mean in-region velocity per timestep; the k timesteps with the largest
/// mean speed are selected, their mean vectors averaged and normalized.
/// Regions are given as a list of sample points (sphere voxel centers or
/// section sample points).
Vec3 derive_direction(const VelocityField& vel,
                      const std::vector<Vec3>& region_points, int k = 5);

/// Plane through the probe center with normal = derived direction,
/// rasterized at half the minimum voxel spacing, flood-filled from the
/// center restricted to in-mask points.
SectionGrid extract_section(const Mask& mask, int label, const Probe& probe);

/// Voxel-counting volume, ml.
double mask_volume_ml(const Mask& mask, int label);

/// Dubois body surface area, m^2.
double bsa_dubois_m2(double weight_kg, double height_cm);

/// volume / BSA(Dubois), ml/m^2.
double index_by_bsa(double volume_ml, double weight_kg, double height_cm);

/// 3x3x3 median filter per timestep; edge voxels use the in-bounds part
/// of the neighborhood.
ScalarVolume median_filter3(const ScalarVolume& v);

struct Pathline {
  int seed_index = 0;
  int emit_timestep = 0;
  std::vector<Vec3> points_mm;
};

struct PathlineResult {
  std::vector<Pathline> lines;  // ordered by (seed index, emission timestep)
  int skipped_seeds = 0;        // seeds outside the mask
};

/// RK4 integration of the time-varying field over `window` timesteps per
/// emission timestep, substep dt/4, trilinear in space, linear in time
/// (periodic over the cycle). A line terminates when it exits the mask.
PathlineResult trace_pathlines(const VelocityField& vel, const Mask& mask,
                               int label, const std::vector<Vec3>& seeds_mm,
                               int window = 6);

}  // namespace laflow
