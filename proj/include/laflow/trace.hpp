#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace laflow {

/// Scalar-per-timestep series with cycle metadata.
struct TimeTrace {
  std::string name;
  std::string unit;
  std::vector<double> values;
  double dt_ms = 1.0;
  enum class Normalization { None, PerLaVolume };
  Normalization normalization = Normalization::None;
  /// Per-sample flags (e.g. guarded divisions). Empty when nothing flagged.
  std::vector<std::uint8_t> flagged;

  int nt() const { return static_cast<int>(values.size()); }
  double t_ms(int i) const { return i * dt_ms; }
};

/// CSV with columns t_index,t_ms,value.
void write_trace_csv(const TimeTrace& trace,
                     const std::filesystem::path& file);

}  // namespace laflow
