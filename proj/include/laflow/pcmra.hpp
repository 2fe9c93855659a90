#pragma once

#include "laflow/fields.hpp"

namespace laflow {

struct PcmraParams {
  double gamma = 0.4;
  bool time_resolved = false;
};

/// Phase-contrast angiogram synthesis. Time-averaged mode returns an
/// nt = 1 volume of (1/N) * sum_t M(t) * |v(t)|^(2*gamma) per voxel;
/// time-resolved mode returns the per-timestep summand (nt = N).
/// Velocities enter in m/s; output is left in raw physical units.
ScalarVolume compute_pcmra(const Dataset& ds, const PcmraParams& params);

}  // namespace laflow
