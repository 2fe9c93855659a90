#include "laflow/metrics.hpp"

#include <cmath>
#include <string>

#include "laflow/errors.hpp"

namespace laflow {

namespace {

// Per-axis neighbor classification for the difference stencil.
enum class Stencil : std::uint8_t { None, Central, Forward, Backward };

inline bool in_label(const Mask& mask, int label, int x, int y, int z) {
  return mask.meta.in_bounds(x, y, z) && mask.at(x, y, z) == label;
}

}  // namespace

std::vector<std::uint8_t> stencil_validity(const Mask& mask, int label) {
  const GridMeta& m = mask.meta;
  std::vector<std::uint8_t> valid(m.frame_size(), 0);
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y)
      for (int x = 0; x < m.nx(); ++x) {
        if (mask.at(x, y, z) != label) continue;
        bool ok = true;
        for (int a = 0; a < 3 && ok; ++a) {
          int lo[3] = {x, y, z}, hi[3] = {x, y, z};
          --lo[a];
          ++hi[a];
          if (!in_label(mask, label, lo[0], lo[1], lo[2]) &&
              !in_label(mask, label, hi[0], hi[1], hi[2]))
            ok = false;
        }
        if (ok) valid[m.index3(x, y, z)] = 1;
      }
  return valid;
}

TensorField velocity_gradient(const VelocityField& vel, const Mask& mask,
                              int label, int t) {
  if (!vel.meta.same_space(mask.meta))
    throw FormatError("velocity_gradient: grid mismatch");
  if (!mask.has_label(label))
    throw LabelError("velocity_gradient: label " + std::to_string(label) +
                     " absent");
  const GridMeta& m = vel.meta;
  TensorField out;
  out.meta = m;
  out.meta.dims[3] = 1;
  out.g.assign(m.frame_size() * 9, 0.0);
  out.valid = stencil_validity(mask, label);

  const std::vector<float>* comp[3] = {&vel.vx, &vel.vy, &vel.vz};
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y)
      for (int x = 0; x < m.nx(); ++x) {
        const std::size_t i3 = m.index3(x, y, z);
        if (!out.valid[i3]) continue;
        for (int a = 0; a < 3; ++a) {
          int lo[3] = {x, y, z}, hi[3] = {x, y, z};
          --lo[a];
          ++hi[a];
          const bool has_lo = in_label(mask, label, lo[0], lo[1], lo[2]);
          const bool has_hi = in_label(mask, label, hi[0], hi[1], hi[2]);
          const double h_m = m.spacing[a] * 1e-3;
          const std::size_t ic = m.index4(x, y, z, t);
          const std::size_t il =
              has_lo ? m.index4(lo[0], lo[1], lo[2], t) : ic;
          const std::size_t ih =
              has_hi ? m.index4(hi[0], hi[1], hi[2], t) : ic;
          for (int i = 0; i < 3; ++i) {
            const auto& c = *comp[i];
            double g;
            if (has_lo && has_hi)
              g = (c[ih] - c[il]) / (2.0 * h_m);
            else if (has_hi)
              g = (c[ih] - c[ic]) / h_m;
            else
              g = (c[ic] - c[il]) / h_m;
            out.g[i3 * 9 + i * 3 + a] = g;
          }
        }
      }
  return out;
}

VorticityVolumes vorticity_field(const TensorField& g) {
  VorticityVolumes out;
  for (ScalarVolume* v : {&out.wx, &out.wy, &out.wz}) {
    v->meta = g.meta;
    v->unit = "s^-1";
    v->values.assign(g.meta.frame_size(), 0.0f);
  }
  for (std::size_t i = 0; i < g.valid.size(); ++i) {
    if (!g.valid[i]) continue;
    const double* t = g.at(i);
    // omega = (dVz/dy - dVy/dz, dVx/dz - dVz/dx, dVy/dx - dVx/dy)
    out.wx.values[i] = static_cast<float>(t[2 * 3 + 1] - t[1 * 3 + 2]);
    out.wy.values[i] = static_cast<float>(t[0 * 3 + 2] - t[2 * 3 + 0]);
    out.wz.values[i] = static_cast<float>(t[1 * 3 + 0] - t[0 * 3 + 1]);
  }
  return out;
}

ScalarVolume q_criterion_field(const TensorField& g) {
  ScalarVolume out;
  out.meta = g.meta;
  out.unit = "s^-2";
  out.values.assign(g.meta.frame_size(), 0.0f);
  for (std::size_t i = 0; i < g.valid.size(); ++i) {
    if (!g.valid[i]) continue;
    const double* t = g.at(i);
    double s2 = 0.0, o2 = 0.0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        const double s = 0.5 * (t[r * 3 + c] + t[c * 3 + r]);
        const double o = 0.5 * (t[r * 3 + c] - t[c * 3 + r]);
        s2 += s * s;
        o2 += o * o;
      }
    out.values[i] = static_cast<float>(0.5 * (o2 - s2));
  }
  return out;
}

ScalarVolume dissipation_field(const TensorField& g) {
  ScalarVolume out;
  out.meta = g.meta;
  out.unit = "s^-2";
  out.values.assign(g.meta.frame_size(), 0.0f);
  for (std::size_t i = 0; i < g.valid.size(); ++i) {
    if (!g.valid[i]) continue;
    const double* t = g.at(i);
    const double div = t[0] + t[4] + t[8];
    double phi = 0.0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        double e = t[r * 3 + c] + t[c * 3 + r];
        if (r == c) e -= (2.0 / 3.0) * div;
        phi += e * e;
      }
    out.values[i] = static_cast<float>(0.5 * phi);
  }
  return out;
}

EnergyTraces kinetic_energy_trace(const VelocityField& vel, const Mask& mask,
                                  int label, const FluidProps& fluid) {
  if (!vel.meta.same_space(mask.meta))
    throw FormatError("kinetic_energy_trace: grid mismatch");
  const std::size_t n_label = mask.count_label(label);
  if (n_label == 0)
    throw LabelError("kinetic_energy_trace: label absent");

  const GridMeta& m = vel.meta;
  const double vol_m3 = m.voxel_volume_mm3() * 1e-9;
  const double v_label_m3 = n_label * vol_m3;

  EnergyTraces out;
  out.total = {"KE", "J", std::vector<double>(m.nt(), 0.0), m.dt_ms,
               TimeTrace::Normalization::None, {}};
  out.per_volume = {"KE_per_volume", "J/m^3",
                    std::vector<double>(m.nt(), 0.0), m.dt_ms,
                    TimeTrace::Normalization::PerLaVolume, {}};
  const std::size_t fs = m.frame_size();
  for (int t = 0; t < m.nt(); ++t) {
    double acc = 0.0;
    const std::size_t off = static_cast<std::size_t>(t) * fs;
    for (std::size_t i = 0; i < fs; ++i) {
      if (mask.labels[i] != label) continue;
      const double v2 = static_cast<double>(vel.vx[off + i]) * vel.vx[off + i] +
                        static_cast<double>(vel.vy[off + i]) * vel.vy[off + i] +
                        static_cast<double>(vel.vz[off + i]) * vel.vz[off + i];
      acc += v2;
    }
    out.total.values[t] = 0.5 * fluid.rho * acc * vol_m3;
    out.per_volume.values[t] = out.total.values[t] / v_label_m3;
  }
  return out;
}

EnergyTraces energy_loss_trace(const std::vector<ScalarVolume>& phi,
                               const Mask& mask, int label,
                               const FluidProps& fluid) {
  const std::size_t n_label = mask.count_label(label);
  if (n_label == 0) throw LabelError("energy_loss_trace: label absent");
  const int nt = static_cast<int>(phi.size());
  if (nt == 0) throw ParamError("energy_loss_trace: no dissipation fields");
  const GridMeta& m = mask.meta;
  const double vol_m3 = m.voxel_volume_mm3() * 1e-9;
  const double v_label_m3 = n_label * vol_m3;
  const auto valid = stencil_validity(mask, label);

  EnergyTraces out;
  out.total = {"EL", "W", std::vector<double>(nt, 0.0),
               phi[0].meta.dt_ms, TimeTrace::Normalization::None, {}};
  out.per_volume = {"EL_per_volume", "W/m^3",
                    std::vector<double>(nt, 0.0), phi[0].meta.dt_ms,
                    TimeTrace::Normalization::PerLaVolume, {}};
  for (int t = 0; t < nt; ++t) {
    if (!phi[t].meta.same_space(m))
      throw FormatError("energy_loss_trace: grid mismatch at t=" +
                        std::to_string(t));
    double acc = 0.0;
    for (std::size_t i = 0; i < m.frame_size(); ++i)
      if (valid[i]) acc += phi[t].values[i];
    out.total.values[t] = fluid.mu * acc * vol_m3;
    out.per_volume.values[t] = out.total.values[t] / v_label_m3;
  }
  return out;
}

TimeTrace ke_vel_ratio(const TimeTrace& ke, const TimeTrace& el) {
  if (ke.values.size() != el.values.size())
    throw ParamError("ke_vel_ratio: trace lengths differ");
  constexpr double kGuard = 1e-12;
  constexpr double kCap = 1e12;
  TimeTrace out{"KE_VEL_ratio", "s", std::vector<double>(ke.values.size()),
                ke.dt_ms, ke.normalization, {}};
  std::vector<std::uint8_t> flags(ke.values.size(), 0);
  bool any = false;
  for (std::size_t i = 0; i < ke.values.size(); ++i) {
    if (el.values[i] < kGuard) {
      out.values[i] = kCap;
      flags[i] = 1;
      any = true;
    } else {
      out.values[i] = ke.values[i] / el.values[i];
    }
  }
  if (any) out.flagged = std::move(flags);
  return out;
}

TimeTrace vorticity_trace(const std::vector<VorticityVolumes>& omega,
                          const Mask& mask, int label,
                          VorticityReduction reduction) {
  const std::size_t n_label = mask.count_label(label);
  if (n_label == 0) throw LabelError("vorticity_trace: label absent");
  const int nt = static_cast<int>(omega.size());
  if (nt == 0) throw ParamError("vorticity_trace: no fields");
  const GridMeta& m = mask.meta;
  const auto valid = stencil_validity(mask, label);
  const double vol_m3 = m.voxel_volume_mm3() * 1e-9;
  const double v_label_m3 = n_label * vol_m3;

  const bool mean = reduction == VorticityReduction::MeanMagnitude;
  TimeTrace out{"omega_LA", mean ? "s^-1" : "s^-1 m^-3",
                std::vector<double>(nt, 0.0), omega[0].wx.meta.dt_ms,
                TimeTrace::Normalization::PerLaVolume, {}};
  for (int t = 0; t < nt; ++t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < m.frame_size(); ++i)
      if (valid[i]) acc += omega[t].magnitude(i);
    out.values[t] = mean ? acc * vol_m3 / v_label_m3 : acc / v_label_m3;
  }
  return out;
}

TimeTrace qcrit_ratio_trace(const std::vector<ScalarVolume>& q,
                            const Mask& mask, int label,
                            double threshold_s2) {
  if (!mask.has_label(label))
    throw LabelError("qcrit_ratio_trace: label absent");
  const int nt = static_cast<int>(q.size());
  if (nt == 0) throw ParamError("qcrit_ratio_trace: no fields");
  const GridMeta& m = mask.meta;
  const auto valid = stencil_validity(mask, label);
  std::size_t n_valid = 0;
  for (const auto v : valid) n_valid += v;
  if (n_valid == 0)
    throw LabelError("qcrit_ratio_trace: no valid voxels in label");

  TimeTrace out{"qcrit_ratio", "%", std::vector<double>(nt, 0.0),
                q[0].meta.dt_ms, TimeTrace::Normalization::PerLaVolume, {}};
  for (int t = 0; t < nt; ++t) {
    std::size_t above = 0;
    for (std::size_t i = 0; i < m.frame_size(); ++i)
      if (valid[i] && q[t].values[i] > threshold_s2) ++above;
    out.values[t] = 100.0 * static_cast<double>(above) / n_valid;
  }
  return out;
}

TimeTrace flow_rate_trace(const VelocityField& vel,
                          const SectionGrid& section) {
  if (section.samples.size() < 4)
    throw GeometryError("flow_rate_trace: degenerate section (< 4 samples)");
  const int nt = vel.meta.nt();
  TimeTrace out{"flow_rate", "ml/s", std::vector<double>(nt, 0.0),
                vel.meta.dt_ms, TimeTrace::Normalization::None, {}};
  for (int t = 0; t < nt; ++t) {
    double acc = 0.0;
    for (const auto& s : section.samples)
      // (m/s) * mm^2 = ml/s
      acc += dot(vel.sample(s.point_mm, t), section.normal) * s.area_mm2;
    out.values[t] = acc;
  }
  return out;
}

}  // namespace laflow
