#pragma once

#include <optional>
#include <string>
#include <vector>

#include "laflow/vec3.hpp"

namespace laflow {

enum class ProbeRole { Valve, Vein, Custom };

ProbeRole probe_role_from_string(const std::string& s);

/// Named measurement site: a sphere placed on a vessel or valve.
struct Probe {
  std::string name;       // MV, RSPV, RIPV, LSPV, LIPV, ...
  Vec3 center_mm{0, 0, 0};
  double diameter_mm = 6.0;
  ProbeRole role = ProbeRole::Custom;
  std::optional<Vec3> direction;  // unit vector once derived
};

struct SectionSample {
  Vec3 point_mm;
  double area_mm2;
};

/// Planar cross-section patch: contiguous in-mask samples around the
/// probe center, with orthonormal in-plane basis.
struct SectionGrid {
  Vec3 origin_mm{0, 0, 0};
  Vec3 normal{1, 0, 0};
  Vec3 basis_u{0, 1, 0};
  Vec3 basis_v{0, 0, 1};
  std::vector<SectionSample> samples;
  bool open_section_warning = false;  // patch touched the raster bound

  double area_mm2() const {
    double a = 0.0;
    for (const auto& s : samples) a += s.area_mm2;
    return a;
  }
};

}  // namespace laflow
