#pragma once

#include <vector>

#include "laflow/fields.hpp"
#include "laflow/geometry_types.hpp"
#include "laflow/spectro.hpp"
#include "laflow/trace.hpp"

namespace laflow {

/// Steady divergence-free virtual velocity field through the label path,
/// built from a Laplace solve with Neumann influx/efflux on the inlet and
/// outlet patches and zero flux on walls.
struct VirtualField {
  GridMeta meta;  // nt = 1
  std::vector<std::uint8_t> domain;     // voxel in the label path
  std::vector<double> wx, wy, wz;       // collocated, m/s
  // face gradients (face between c and c+e_a), zero across walls
  std::vector<double> fx, fy, fz;
  double q_w = 1.0;                     // net inlet flux, m^3/s
  int iterations = 0;
  double final_residual = 0.0;
  double divergence_residual = 0.0;     // max interior |div w|, s^-1
  double mean_abs_w = 0.0;              // m/s, for the divergence bound
};

struct SolverParams {
  double rel_tol = 1e-8;
  int max_iterations = 20000;
};

VirtualField virtual_field(const Mask& mask, const std::vector<int>& labels,
                           const SectionGrid& inlet,
                           const SectionGrid& outlet,
                           const SolverParams& params = {});

/// Work-energy relative pressure between the inlet and outlet planes,
/// mmHg; positive when the inlet-side pressure exceeds the outlet side.
/// The time derivative uses periodic central differences over the cycle.
TimeTrace vwerp_trace(const VelocityField& vel, const VirtualField& vf,
                      const FluidProps& fluid);

struct PressurePeaks {
  double e_max = 0.0, e_min = 0.0;
  double a_max = 0.0, a_min = 0.0;
  std::vector<double> zero_crossings_ms;
  bool crossings_defined = false;
};

PressurePeaks pressure_peaks(const TimeTrace& pressure,
                             const PhaseWindows& windows);

}  // namespace laflow
