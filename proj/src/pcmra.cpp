#include "laflow/pcmra.hpp"

#include <cmath>

#include "laflow/errors.hpp"

namespace laflow {

ScalarVolume compute_pcmra(const Dataset& ds, const PcmraParams& params) {
  if (!(params.gamma > 0.0) || params.gamma > 1.0)
    throw ParamError("pcmra: gamma must satisfy 0 < gamma <= 1");
  if (!ds.velocity.meta.same_space(ds.magnitude.meta) ||
      ds.velocity.meta.nt() != ds.magnitude.meta.nt())
    throw FormatError("pcmra: velocity and magnitude grids differ");

  const GridMeta& meta = ds.velocity.meta;
  const std::size_t fs = meta.frame_size();
  const int nt = meta.nt();

  ScalarVolume out;
  out.meta = meta;
  out.unit = "a.u.";
  if (!params.time_resolved) out.meta.dims[3] = 1;
  out.values.assign(out.meta.total_size(), 0.0f);
  std::vector<double> acc;
  if (!params.time_resolved) acc.assign(fs, 0.0);

  // Fixed t-major order keeps the time average bitwise deterministic.
  for (int t = 0; t < nt; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * fs;
    for (std::size_t i = 0; i < fs; ++i) {
      const double v2 = static_cast<double>(ds.velocity.vx[off + i]) *
                            ds.velocity.vx[off + i] +
                        static_cast<double>(ds.velocity.vy[off + i]) *
                            ds.velocity.vy[off + i] +
                        static_cast<double>(ds.velocity.vz[off + i]) *
                            ds.velocity.vz[off + i];
      const double term =
          ds.magnitude.values[off + i] * std::pow(v2, params.gamma);
      if (params.time_resolved)
        out.values[off + i] = static_cast<float>(term);
      else
        acc[i] += term;
    }
  }
  if (!params.time_resolved)
    for (std::size_t i = 0; i < fs; ++i)
      out.values[i] = static_cast<float>(acc[i] / nt);
  return out;
}

}  // namespace laflow
