#include "laflow/synth.hpp"

#include <algorithm>
#include <cmath>

#include "laflow/errors.hpp"

namespace laflow {

using nlohmann::json;

SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "uniform") return SynthKind::Uniform;
  if (s == "poiseuille") return SynthKind::Poiseuille;
  if (s == "solid_rotation") return SynthKind::SolidRotation;
  if (s == "pure_strain") return SynthKind::PureStrain;
  if (s == "simple_shear") return SynthKind::SimpleShear;
  if (s == "pulsatile_plug") return SynthKind::PulsatilePlug;
  if (s == "biphasic_inflow") return SynthKind::BiphasicInflow;
  throw SpecError("unknown synthetic field kind: " + s);
}

double BiphasicWave::flow_ml_s(double cycle_frac) const {
  auto g = [](double x, double c, double s) {
    const double d = (x - c) / s;
    return std::exp(-0.5 * d * d);
  };
  return amp_e * g(cycle_frac, t_e, sigma_e) +
         amp_a * g(cycle_frac, t_a, sigma_a);
}

void SynthSpec::validate() const {
  for (int i = 0; i < 4; ++i)
    if (dims[i] < 1) throw SpecError("SynthSpec: dims must be >= 1");
  for (int i = 0; i < 3; ++i)
    if (!(spacing[i] > 0)) throw SpecError("SynthSpec: spacing must be > 0");
  if (!(dt_ms > 0)) throw SpecError("SynthSpec: dt_ms must be > 0");
  const bool tube = kind == SynthKind::Poiseuille ||
                    kind == SynthKind::PulsatilePlug ||
                    kind == SynthKind::BiphasicInflow;
  if (tube) {
    const double h = std::min({spacing[0], spacing[1], spacing[2]});
    if (2.0 * radius_mm / h < 8.0)
      throw SpecError("SynthSpec: tube radius under-resolved (need >= 8 "
                      "voxels across the diameter)");
  }
}

namespace {

constexpr double kPi = 3.14159265358979323846;

// Extent of the grid box projected on the tube axis, mm.
double axial_length_mm(const SynthSpec& s) {
  const Vec3 a = normalized(s.axis);
  double l = 0.0;
  for (int i = 0; i < 3; ++i)
    l += std::abs(a[i]) * s.dims[i] * s.spacing[i];
  return l;
}

}  // namespace

SynthResult generate(const SynthSpec& spec) {
  spec.validate();
  const auto& d = spec.dims;
  GridMeta meta;
  meta.dims = d;
  meta.spacing = spec.spacing;
  meta.dt_ms = spec.dt_ms;

  const Vec3 center{(d[0] - 1) * 0.5 * spec.spacing[0],
                    (d[1] - 1) * 0.5 * spec.spacing[1],
                    (d[2] - 1) * 0.5 * spec.spacing[2]};
  const Vec3 axis = normalized(spec.axis);
  const bool tube = spec.kind == SynthKind::Poiseuille ||
                    spec.kind == SynthKind::PulsatilePlug ||
                    spec.kind == SynthKind::BiphasicInflow;
  const double radius_m = spec.radius_mm * 1e-3;
  const double area_mm2 = kPi * spec.radius_mm * spec.radius_mm;

  const int nt = d[3];
  const std::size_t fs = meta.frame_size();

  Mask mask;
  mask.meta = meta;
  mask.meta.dims[3] = 1;
  mask.labels.assign(fs, 1);

  VelocityField vel;
  vel.meta = meta;
  vel.vx.assign(meta.total_size(), 0.0f);
  vel.vy.assign(meta.total_size(), 0.0f);
  vel.vz.assign(meta.total_size(), 0.0f);

  // Per-timestep plug speed (m/s) for the time-varying kinds.
  std::vector<double> plug(nt, 0.0);
  for (int t = 0; t < nt; ++t) {
    const double frac = static_cast<double>(t) / nt;
    switch (spec.kind) {
      case SynthKind::PulsatilePlug:
        plug[t] = spec.plug_base + spec.plug_amp * std::sin(2.0 * kPi * frac);
        break;
      case SynthKind::BiphasicInflow:
        plug[t] = spec.wave.flow_ml_s(frac) / area_mm2;  // ml/s / mm^2 = m/s
        break;
      default:
        break;
    }
  }

  double max_speed = 0.0;
  for (int z = 0; z < d[2]; ++z)
    for (int y = 0; y < d[1]; ++y)
      for (int x = 0; x < d[0]; ++x) {
        const std::size_t i3 = meta.index3(x, y, z);
        const Vec3 p_mm = meta.voxel_center(x, y, z);
        const Vec3 rel_m = 1e-3 * (p_mm - center);
        // radial offset from the tube axis line, m
        const Vec3 radial = rel_m - dot(rel_m, axis) * axis;
        const double r = norm(radial);
        if (tube && r >= radius_m) {
          mask.labels[i3] = 0;
          continue;
        }
        for (int t = 0; t < nt; ++t) {
          Vec3 v{0, 0, 0};
          switch (spec.kind) {
            case SynthKind::Uniform:
              v = spec.uniform_v;
              break;
            case SynthKind::Poiseuille:
              v = spec.v_max * (1.0 - (r * r) / (radius_m * radius_m)) * axis;
              break;
            case SynthKind::SolidRotation:
              v = cross(Vec3{0, 0, spec.omega0}, rel_m);
              break;
            case SynthKind::PureStrain:
              v = {spec.strain_rate * rel_m[0], -spec.strain_rate * rel_m[1],
                   0.0};
              break;
            case SynthKind::SimpleShear:
              v = {spec.shear_rate * rel_m[1], 0.0, 0.0};
              break;
            case SynthKind::PulsatilePlug:
            case SynthKind::BiphasicInflow:
              v = plug[t] * axis;
              break;
          }
          const std::size_t i4 = t * fs + i3;
          vel.vx[i4] = static_cast<float>(v[0]);
          vel.vy[i4] = static_cast<float>(v[1]);
          vel.vz[i4] = static_cast<float>(v[2]);
          max_speed = std::max(max_speed, norm(v));
        }
      }

  if (tube && mask.count_label(1) == 0)
    throw SpecError("SynthSpec: tube mask is empty");

  meta.venc_cm_s = std::max(10.0, 100.0 * max_speed + 10.0);
  vel.meta.venc_cm_s = meta.venc_cm_s;
  mask.meta.venc_cm_s = meta.venc_cm_s;

  SynthResult res;
  res.dataset.velocity = std::move(vel);
  res.dataset.magnitude.meta = meta;
  res.dataset.magnitude.unit = "a.u.";
  res.dataset.magnitude.values.assign(meta.total_size(), 1.0f);
  res.dataset.mask = std::move(mask);

  const FluidProps fluid;  // defaults; truth records the values used
  const double length_m = axial_length_mm(spec) * 1e-3;

  json& truth = res.truth;
  truth["rho_kg_m3"] = fluid.rho;
  truth["mu_pa_s"] = fluid.mu;
  truth["axis"] = axis;
  switch (spec.kind) {
    case SynthKind::Uniform:
      truth["kind"] = "uniform";
      truth["speed_m_s"] = norm(spec.uniform_v);
      truth["omega_mag_s1"] = 0.0;
      truth["q_criterion_s2"] = 0.0;
      truth["phi_v_s2"] = 0.0;
      truth["ke_per_volume_j_m3"] =
          0.5 * fluid.rho * dot(spec.uniform_v, spec.uniform_v);
      break;
    case SynthKind::Poiseuille: {
      truth["kind"] = "poiseuille";
      const double v_mean = spec.v_max / 2.0;
      const double q_m3_s = kPi * radius_m * radius_m * v_mean;
      truth["v_max_m_s"] = spec.v_max;
      truth["v_mean_m_s"] = v_mean;
      truth["flow_ml_s"] = area_mm2 * v_mean;
      truth["mean_v2_m2_s2"] = spec.v_max * spec.v_max / 3.0;
      truth["ke_per_volume_j_m3"] =
          0.5 * fluid.rho * spec.v_max * spec.v_max / 3.0;
      truth["el_total_w"] = 8.0 * kPi * fluid.mu * length_m * v_mean * v_mean;
      truth["delta_p_pa"] = 8.0 * fluid.mu * length_m * q_m3_s /
                            (kPi * std::pow(radius_m, 4));
      truth["length_m"] = length_m;
      break;
    }
    case SynthKind::SolidRotation:
      truth["kind"] = "solid_rotation";
      truth["omega_mag_s1"] = 2.0 * spec.omega0;
      truth["q_criterion_s2"] = spec.omega0 * spec.omega0;
      truth["phi_v_s2"] = 0.0;
      break;
    case SynthKind::PureStrain:
      truth["kind"] = "pure_strain";
      truth["omega_mag_s1"] = 0.0;
      truth["q_criterion_s2"] = -spec.strain_rate * spec.strain_rate;
      truth["phi_v_s2"] = 4.0 * spec.strain_rate * spec.strain_rate;
      break;
    case SynthKind::SimpleShear:
      truth["kind"] = "simple_shear";
      truth["omega_mag_s1"] = spec.shear_rate;
      truth["q_criterion_s2"] = 0.0;
      truth["phi_v_s2"] = spec.shear_rate * spec.shear_rate;
      break;
    case SynthKind::PulsatilePlug: {
      truth["kind"] = "pulsatile_plug";
      json flow = json::array();
      json accel = json::array();
      for (int t = 0; t < nt; ++t) {
        flow.push_back(area_mm2 * plug[t]);
        const double frac = static_cast<double>(t) / nt;
        // dv/dt of the imposed sinusoid, s^-2
        accel.push_back(spec.plug_amp * 2.0 * kPi *
                        std::cos(2.0 * kPi * frac) /
                        (nt * spec.dt_ms * 1e-3));
      }
      truth["flow_ml_s"] = flow;
      truth["dv_dt_m_s2"] = accel;
      truth["length_m"] = length_m;
      break;
    }
    case SynthKind::BiphasicInflow: {
      truth["kind"] = "biphasic_inflow";
      const double cycle_s = nt * spec.dt_ms * 1e-3;
      json flow = json::array();
      for (int t = 0; t < nt; ++t) flow.push_back(area_mm2 * plug[t]);
      truth["flow_ml_s"] = flow;
      truth["e_peak_ml_s"] = spec.wave.amp_e;
      truth["a_peak_ml_s"] = spec.wave.amp_a;
      truth["e_peak_index"] = static_cast<int>(std::lround(spec.wave.t_e * nt));
      truth["a_peak_index"] = static_cast<int>(std::lround(spec.wave.t_a * nt));
      const double sq2pi = std::sqrt(2.0 * kPi);
      truth["e_vol_ml"] = spec.wave.amp_e * spec.wave.sigma_e * cycle_s * sq2pi;
      truth["a_vol_ml"] = spec.wave.amp_a * spec.wave.sigma_a * cycle_s * sq2pi;
      truth["length_m"] = length_m;
      break;
    }
  }
  return res;
}

}  // namespace laflow
