#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "laflow/fields.hpp"

namespace laflow {

/// One point-data array of a single timestep, interleaved when components>1.
struct VtiArray {
  std::string name;
  int components = 1;
  std::vector<float> data;  // frame_size * components floats
};

/// VTK XML ImageData file: appended raw binary, little-endian, UInt64
/// block headers. Spatial metadata comes from `meta`; arrays are point
/// data of one timestep.
void write_vti(const GridMeta& meta, const std::vector<VtiArray>& arrays,
               const std::filesystem::path& file);

/// One file per timestep: <stem>_t000.vti, ... in `dir`. `arrays_per_t`
/// is indexed [t][array]. Returns the written paths in time order.
std::vector<std::filesystem::path> write_vti_series(
    const GridMeta& meta,
    const std::vector<std::vector<VtiArray>>& arrays_per_t,
    const std::filesystem::path& dir, const std::string& stem);

/// Timestep extraction helpers.
VtiArray vti_from_scalar(const ScalarVolume& vol, const std::string& name,
                         int t);
VtiArray vti_from_velocity(const VelocityField& vel, int t);

/// Polylines (mm coordinates) as VTK XML PolyData, appended raw binary.
void write_polylines_vtp(const std::vector<std::vector<Vec3>>& lines,
                         const std::filesystem::path& file);

}  // namespace laflow
