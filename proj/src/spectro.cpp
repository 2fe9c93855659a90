#include "laflow/spectro.hpp"

#include <algorithm>
#include <cmath>

#include "laflow/errors.hpp"
#include "laflow/geometry.hpp"

namespace laflow {

namespace {

constexpr double kNoiseFloorMlS = 5.0;
constexpr double kWindowThresholdFrac = 0.05;

std::vector<double> smooth3(const std::vector<double>& v) {
  const int n = static_cast<int>(v.size());
  std::vector<double> s(n);
  for (int i = 0; i < n; ++i) {
    double acc = v[i];
    int cnt = 1;
    if (i > 0) {
      acc += v[i - 1];
      ++cnt;
    }
    if (i + 1 < n) {
      acc += v[i + 1];
      ++cnt;
    }
    s[i] = acc / cnt;
  }
  return s;
}

int argmax_range(const std::vector<double>& v, const IndexRange& r) {
  int best = r.begin;
  for (int i = r.begin; i < r.end; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

int argmin_range(const std::vector<double>& v, const IndexRange& r) {
  int best = r.begin;
  for (int i = r.begin; i < r.end; ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

}  // namespace

const Peak* PeakSet::find(const std::string& wave) const {
  for (const auto& p : peaks)
    if (p.wave == wave) return &p;
  return nullptr;
}

double PeakSet::value(const std::string& wave) const {
  const Peak* p = find(wave);
  if (!p) throw PeakError("peak " + wave + " not detected");
  return p->value;
}

std::vector<double> sample_sphere(const VelocityField& vel, const Mask& mask,
                                  int label, const Probe& probe, int t) {
  if (!probe.direction)
    throw ProbeError("sample_sphere: probe direction not derived");
  const auto centers = sphere_voxel_centers(mask, label, probe);
  if (centers.size() < 10)
    throw ProbeError("sample_sphere: fewer than 10 in-mask voxel centers in "
                     "probe " + probe.name);
  const Vec3 n = normalized(*probe.direction);
  std::vector<double> out;
  out.reserve(centers.size());
  for (const Vec3& p : centers) out.push_back(dot(vel.sample(p, t), n));
  return out;
}

SpectroMatrix spectrogram(const VelocityField& vel, const Mask& mask,
                          int label, const Probe& probe, int nbins) {
  if (nbins < 2) throw ParamError("spectrogram: nbins must be >= 2");
  const double venc_m_s = vel.meta.venc_cm_s / 100.0;
  SpectroMatrix sm;
  sm.direction = probe.direction ? normalized(*probe.direction)
                                 : Vec3{1, 0, 0};
  sm.dt_ms = vel.meta.dt_ms;
  sm.bin_edges.resize(nbins + 1);
  for (int b = 0; b <= nbins; ++b)
    sm.bin_edges[b] = -venc_m_s + 2.0 * venc_m_s * b / nbins;

  const double width = 2.0 * venc_m_s / nbins;
  for (int t = 0; t < vel.meta.nt(); ++t) {
    const auto samples = sample_sphere(vel, mask, label, probe, t);
    std::vector<double> col(nbins, 0.0);
    for (const double v : samples) {
      int b = static_cast<int>(std::floor((v + venc_m_s) / width));
      b = std::clamp(b, 0, nbins - 1);
      col[b] += 1.0;
    }
    if (!samples.empty())
      for (double& c : col) c /= static_cast<double>(samples.size());
    sm.density.push_back(std::move(col));
  }
  return sm;
}

PhaseWindows phase_windows(const TimeTrace& mv_flow) {
  const int nt = mv_flow.nt();
  if (nt < 4) throw WindowError("phase_windows: trace too short");
  const double raw_max =
      *std::max_element(mv_flow.values.begin(), mv_flow.values.end());
  if (raw_max < kNoiseFloorMlS)
    throw WindowError("phase_windows: no MV flow above noise floor");

  const std::vector<double> s = smooth3(mv_flow.values);
  const double smax = *std::max_element(s.begin(), s.end());
  const double th = kWindowThresholdFrac * smax;

  int onset = 0;
  while (onset < nt && s[onset] < th) ++onset;
  if (onset >= nt) throw WindowError("phase_windows: no flow onset found");

  // Local maxima of the smoothed trace in diastole, above 20% of max.
  std::vector<int> peaks;
  for (int i = std::max(onset, 1); i < nt - 1; ++i)
    if (s[i] > s[i - 1] && s[i] >= s[i + 1] && s[i] > 0.2 * smax)
      peaks.push_back(i);

  PhaseWindows w;
  w.systole = {0, onset};
  if (peaks.size() >= 2) {
    const int p_e = peaks.front();
    const int p_a = peaks.back();
    // Contiguous sub-threshold run between the peaks, if any, is diastasis.
    int d0 = -1, d1 = -1;
    for (int i = p_e; i <= p_a; ++i) {
      if (s[i] < th) {
        if (d0 < 0) d0 = i;
        d1 = i + 1;
      } else if (d0 >= 0) {
        break;
      }
    }
    if (d0 >= 0) {
      w.e_wave = {onset, d0};
      w.diastasis = {d0, d1};
      w.a_wave = {d1, nt};
    } else {
      const int m = argmin_range(s, {p_e, p_a + 1});
      w.e_wave = {onset, m};
      w.diastasis = {m, m};
      w.a_wave = {m, nt};
    }
  } else {
    // Single discernible wave: E-A fusion. Split where the smoothed
    // curvature is largest past the peak.
    w.fused = true;
    const int p = peaks.empty() ? argmax_range(s, {onset, nt}) : peaks[0];
    int split = p + 1;
    double best = -1e300;
    for (int i = p + 1; i < nt - 1; ++i) {
      const double d2 = s[i + 1] - 2.0 * s[i] + s[i - 1];
      if (d2 > best) {
        best = d2;
        split = i;
      }
    }
    w.e_wave = {onset, split};
    w.diastasis = {split, split};
    w.a_wave = {split, nt};
  }
  return w;
}

PeakSet detect_peaks(const TimeTrace& trace, const PhaseWindows& windows,
                     TraceKind kind) {
  const std::vector<double> s = smooth3(trace.values);
  const int nt = static_cast<int>(s.size());
  PeakSet out;
  out.windows = windows;

  auto need = [&](const IndexRange& r, const char* wave) {
    if (r.length() < 3)
      throw PeakError(std::string("detect_peaks: window for ") + wave +
                      " shorter than 3 samples");
  };
  auto push_max = [&](const IndexRange& r, const char* wave) {
    need(r, wave);
    const int i = argmax_range(s, r);
    out.peaks.push_back({wave, i, trace.values[i], trace.unit});
  };

  if (kind == TraceKind::MV) {
    push_max(windows.e_wave, "E");
    push_max(windows.a_wave, "A");
  } else {
    push_max(windows.systole, "S");
    const IndexRange diastole{windows.e_wave.begin, nt};
    push_max(diastole, "D");
    need(windows.a_wave, "Ar");
    const int i = argmin_range(s, windows.a_wave);
    out.peaks.push_back({"Ar", i, trace.values[i], trace.unit});
  }
  return out;
}

WaveVolumes wave_volumes(const TimeTrace& mv_flow,
                         const PhaseWindows& windows) {
  if (windows.e_wave.length() < 2 || windows.a_wave.length() < 2)
    throw PeakError("wave_volumes: degenerate windows");
  const double dt_s = mv_flow.dt_ms * 1e-3;
  auto integrate = [&](const IndexRange& r) {
    double vol = 0.0;
    for (int i = r.begin; i + 1 < r.end; ++i) {
      const double a = std::max(mv_flow.values[i], 0.0);
      const double b = std::max(mv_flow.values[i + 1], 0.0);
      vol += 0.5 * (a + b) * dt_s;  // ml/s * s = ml
    }
    return vol;
  };
  return {integrate(windows.e_wave), integrate(windows.a_wave)};
}

ClinicalRatios clinical_ratios(const PeakSet& peaks,
                               const std::optional<WaveVolumes>& vols) {
  ClinicalRatios out;
  auto ratio = [](double num, double den, const char* name) {
    if (den == 0.0)
      throw RatioError(std::string("clinical_ratios: zero denominator in ") +
                       name);
    return num / den;
  };
  const Peak* e = peaks.find("E");
  const Peak* a = peaks.find("A");
  if (e && a) out.e_over_a = ratio(e->value, a->value, "E/A");
  const Peak* sp = peaks.find("S");
  const Peak* dp = peaks.find("D");
  if (sp && dp) out.s_over_d = ratio(sp->value, dp->value, "S/D");
  if (vols)
    out.evol_over_avol = ratio(vols->e_ml, vols->a_ml, "E_vol/A_vol");
  return out;
}

}  // namespace laflow
