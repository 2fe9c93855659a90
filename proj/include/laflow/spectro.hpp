#pragma once

#include <optional>
#include <string>
#include <vector>

#include "laflow/fields.hpp"
#include "laflow/geometry_types.hpp"
#include "laflow/trace.hpp"

namespace laflow {

/// Doppler-like velocity-density matrix: one normalized histogram column
/// per timestep over fixed bins spanning [-venc, +venc].
struct SpectroMatrix {
  std::vector<double> bin_edges;               // nbins + 1, m/s
  std::vector<std::vector<double>> density;    // [nt][nbins]
  Vec3 direction{1, 0, 0};
  double dt_ms = 1.0;

  int nbins() const { return static_cast<int>(bin_edges.size()) - 1; }
  int nt() const { return static_cast<int>(density.size()); }
};

/// Half-open index interval [begin, end).
struct IndexRange {
  int begin = 0;
  int end = 0;
  bool empty() const { return end <= begin; }
  int length() const { return end > begin ? end - begin : 0; }
  bool contains(int i) const { return i >= begin && i < end; }
};

struct PhaseWindows {
  IndexRange systole;
  IndexRange e_wave;
  IndexRange diastasis;  // may be empty (E-A fusion)
  IndexRange a_wave;
  bool fused = false;
};

struct Peak {
  std::string wave;  // E, A, S, D, Ar
  int t_index = 0;
  double value = 0.0;
  std::string unit;
};

struct PeakSet {
  std::vector<Peak> peaks;
  PhaseWindows windows;

  const Peak* find(const std::string& wave) const;
  double value(const std::string& wave) const;  // throws PeakError if absent
};

enum class TraceKind { MV, PV };

/// Velocity samples projected on the probe direction, one per in-mask
/// voxel center inside the sphere.
std::vector<double> sample_sphere(const VelocityField& vel, const Mask& mask,
                                  int label, const Probe& probe, int t);

SpectroMatrix spectrogram(const VelocityField& vel, const Mask& mask,
                          int label, const Probe& probe, int nbins = 64);

/// Cardiac phase windows read from the mitral flow-rate trace.
PhaseWindows phase_windows(const TimeTrace& mv_flow);

/// MV: E and A maxima. PV: S, D maxima and signed Ar minimum. A 3-point
/// moving average is applied before the argmax; values are reported from
/// the unsmoothed trace.
PeakSet detect_peaks(const TimeTrace& trace, const PhaseWindows& windows,
                     TraceKind kind);

struct WaveVolumes {
  double e_ml = 0.0;
  double a_ml = 0.0;
};

/// Trapezoidal integrals of positive MV flow over the E and A windows.
WaveVolumes wave_volumes(const TimeTrace& mv_flow,
                         const PhaseWindows& windows);

struct ClinicalRatios {
  std::optional<double> e_over_a;
  std::optional<double> evol_over_avol;
  std::optional<double> s_over_d;
};

ClinicalRatios clinical_ratios(const PeakSet& peaks,
                               const std::optional<WaveVolumes>& vols);

}  // namespace laflow
