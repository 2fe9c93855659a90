#pragma once

#include <vector>

#include "laflow/fields.hpp"
#include "laflow/geometry_types.hpp"
#include "laflow/trace.hpp"

namespace laflow {

/// Per-voxel velocity gradient tensor for one timestep (s^-1).
/// g[i3 * 9 + i * 3 + j] = d v_i / d x_j. Voxels whose stencil cannot be
/// formed (an axis with no in-mask neighbor, or out of label) are invalid
/// and excluded from every reduction.
struct TensorField {
  GridMeta meta;  // nt = 1
  std::vector<double> g;
  std::vector<std::uint8_t> valid;

  const double* at(std::size_t i3) const { return &g[i3 * 9]; }
};

/// Stencil validity derived from the mask alone; identical to the valid
/// flags of velocity_gradient on the same (mask, label).
std::vector<std::uint8_t> stencil_validity(const Mask& mask, int label);

/// Second-order central differences where both neighbors are in-mask,
/// one-sided first-order at the mask boundary.
TensorField velocity_gradient(const VelocityField& vel, const Mask& mask,
                              int label, int t);

struct VorticityVolumes {
  ScalarVolume wx, wy, wz;  // s^-1, invalid voxels are 0

  double magnitude(std::size_t i3) const {
    const double a = wx.values[i3], b = wy.values[i3], c = wz.values[i3];
    return std::sqrt(a * a + b * b + c * c);
  }
};

VorticityVolumes vorticity_field(const TensorField& g);

/// Q = 0.5 (|Omega|_F^2 - |S|_F^2), s^-2.
ScalarVolume q_criterion_field(const TensorField& g);

/// Phi_v = 0.5 sum_ij [(dvi/dxj + dvj/dxi) - (2/3)(div v) delta_ij]^2, s^-2.
ScalarVolume dissipation_field(const TensorField& g);

struct EnergyTraces {
  TimeTrace total;       // J (kinetic) or W (loss)
  TimeTrace per_volume;  // J/m^3 or W/m^3
};

EnergyTraces kinetic_energy_trace(const VelocityField& vel, const Mask& mask,
                                  int label, const FluidProps& fluid);

/// EL_t = mu * sum_i Phi_v,i * Vol_i over valid voxels.
EnergyTraces energy_loss_trace(const std::vector<ScalarVolume>& phi,
                               const Mask& mask, int label,
                               const FluidProps& fluid);

/// Elementwise KE/EL on the per-volume variants. Near-zero EL entries are
/// capped and flagged instead of producing NaN/Inf.
TimeTrace ke_vel_ratio(const TimeTrace& ke, const TimeTrace& el);

enum class VorticityReduction {
  MeanMagnitude,  // sum |w| Vol / V_label, s^-1
  SumPerVolume,   // sum |w| / V_label, s^-1 m^-3
};

TimeTrace vorticity_trace(const std::vector<VorticityVolumes>& omega,
                          const Mask& mask, int label,
                          VorticityReduction reduction =
                              VorticityReduction::MeanMagnitude);

/// Percentage of valid voxels with Q above threshold, per timestep.
TimeTrace qcrit_ratio_trace(const std::vector<ScalarVolume>& q,
                            const Mask& mask, int label,
                            double threshold_s2 = 500.0);

/// Oriented flux through a cross-section, ml/s, trilinear interpolation.
TimeTrace flow_rate_trace(const VelocityField& vel,
                          const SectionGrid& section);

}  // namespace laflow
