#pragma once

#include <json.hpp>
#include <string>

#include "laflow/fields.hpp"

namespace laflow {

enum class SynthKind {
  Uniform,
  Poiseuille,
  SolidRotation,
  PureStrain,
  SimpleShear,
  PulsatilePlug,
  BiphasicInflow,
};

SynthKind synth_kind_from_string(const std::string& s);

/// Two-Gaussian diastolic inflow waveform, amplitudes in ml/s, centers and
/// widths as fractions of the cycle.
struct BiphasicWave {
  double amp_e = 300.0;
  double amp_a = 150.0;
  double t_e = 0.45;
  double t_a = 0.85;
  double sigma_e = 0.05;
  double sigma_a = 0.04;

  double flow_ml_s(double cycle_frac) const;
};

struct SynthSpec {
  SynthKind kind = SynthKind::Uniform;
  std::array<int, 4> dims{64, 64, 64, 1};
  Vec3 spacing{1.0, 1.0, 1.0};  // mm
  double dt_ms = 40.0;

  // tube kinds
  double radius_mm = 8.0;
  Vec3 axis{1.0, 0.0, 0.0};

  Vec3 uniform_v{1.0, 0.0, 0.0};  // m/s
  double v_max = 0.5;             // m/s, poiseuille
  double omega0 = 5.0;            // s^-1, solid rotation about z
  double strain_rate = 3.0;       // s^-1
  double shear_rate = 10.0;       // s^-1
  double plug_base = 0.25;        // m/s
  double plug_amp = 0.1;          // m/s
  BiphasicWave wave;

  void validate() const;
};

struct SynthResult {
  Dataset dataset;
  nlohmann::json truth;  // analytic ground truths for the generated field
};

/// Exact analytic velocities sampled at voxel centers, matching mask
/// (tube or box), uniform magnitude = 1, and a sidecar of ground truths.
SynthResult generate(const SynthSpec& spec);

}  // namespace laflow
