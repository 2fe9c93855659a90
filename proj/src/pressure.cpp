#include "laflow/pressure.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <set>

#include "laflow/errors.hpp"
#include "laflow/metrics.hpp"

namespace laflow {

namespace {

struct Stencil7 {
  const GridMeta& m;
  const std::vector<std::uint8_t>& domain;
  Vec3 h_m;  // spacing in meters

  bool in(int x, int y, int z) const {
    return m.in_bounds(x, y, z) && domain[m.index3(x, y, z)];
  }

  // y = L x, 7-point Neumann Laplacian over the domain.
  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    for (int zz = 0; zz < m.nz(); ++zz)
      for (int yy = 0; yy < m.ny(); ++yy)
        for (int xx = 0; xx < m.nx(); ++xx) {
          const std::size_t c = m.index3(xx, yy, zz);
          if (!domain[c]) {
            y[c] = 0.0;
            continue;
          }
          double acc = 0.0;
          const int idx[3] = {xx, yy, zz};
          for (int a = 0; a < 3; ++a) {
            const double inv_h2 = 1.0 / (h_m[a] * h_m[a]);
            int nb[3] = {idx[0], idx[1], idx[2]};
            nb[a] += 1;
            if (in(nb[0], nb[1], nb[2]))
              acc += (x[m.index3(nb[0], nb[1], nb[2])] - x[c]) * inv_h2;
            nb[a] -= 2;
            if (in(nb[0], nb[1], nb[2]))
              acc += (x[m.index3(nb[0], nb[1], nb[2])] - x[c]) * inv_h2;
          }
          y[c] = acc;
        }
  }
};

// Nearest voxel of a section sample; -1 when outside the domain.
long long sample_voxel(const GridMeta& m,
                       const std::vector<std::uint8_t>& domain,
                       const Vec3& p_mm) {
  const Vec3 ci = m.continuous_index(p_mm);
  const int x = static_cast<int>(std::lround(ci[0]));
  const int y = static_cast<int>(std::lround(ci[1]));
  const int z = static_cast<int>(std::lround(ci[2]));
  if (!m.in_bounds(x, y, z)) return -1;
  const std::size_t i = m.index3(x, y, z);
  return domain[i] ? static_cast<long long>(i) : -1;
}

}  // namespace

VirtualField virtual_field(const Mask& mask, const std::vector<int>& labels,
                           const SectionGrid& inlet,
                           const SectionGrid& outlet,
                           const SolverParams& params) {
  const GridMeta& m = mask.meta;
  VirtualField vf;
  vf.meta = m;
  vf.domain.assign(m.frame_size(), 0);
  std::size_t n_dom = 0;
  for (std::size_t i = 0; i < mask.labels.size(); ++i)
    for (const int l : labels)
      if (mask.labels[i] == l) {
        vf.domain[i] = 1;
        ++n_dom;
        break;
      }
  if (n_dom == 0) throw LabelError("virtual_field: empty label path");

  // Accumulate section sample areas onto their nearest domain voxels.
  auto collect = [&](const SectionGrid& sec) {
    std::vector<std::pair<std::size_t, double>> w;
    std::set<std::size_t> seen;
    std::vector<double> area(m.frame_size(), 0.0);
    for (const auto& s : sec.samples) {
      const long long v = sample_voxel(m, vf.domain, s.point_mm);
      if (v >= 0) area[static_cast<std::size_t>(v)] += s.area_mm2;
    }
    for (std::size_t i = 0; i < area.size(); ++i)
      if (area[i] > 0.0) w.push_back({i, area[i]});
    if (w.empty())
      throw TopologyError("virtual_field: section has no in-domain voxels");
    return w;
  };
  const auto in_w = collect(inlet);
  const auto out_w = collect(outlet);

  {
    std::set<std::size_t> in_set;
    for (const auto& [i, a] : in_w) in_set.insert(i);
    for (const auto& [i, a] : out_w)
      if (in_set.count(i))
        throw TopologyError(
            "virtual_field: inlet and outlet planes overlap (zero-length "
            "path)");
  }

  // 6-connectivity between inlet and outlet through the domain.
  {
    std::vector<std::uint8_t> seen(m.frame_size(), 0);
    std::deque<std::size_t> queue;
    for (const auto& [i, a] : in_w) {
      seen[i] = 1;
      queue.push_back(i);
    }
    while (!queue.empty()) {
      const std::size_t c = queue.front();
      queue.pop_front();
      const int x = static_cast<int>(c % m.nx());
      const int y = static_cast<int>((c / m.nx()) % m.ny());
      const int z = static_cast<int>(c / (static_cast<std::size_t>(m.nx()) *
                                          m.ny()));
      const int d[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                           {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
      for (const auto& dd : d) {
        const int xx = x + dd[0], yy = y + dd[1], zz = z + dd[2];
        if (!m.in_bounds(xx, yy, zz)) continue;
        const std::size_t n = m.index3(xx, yy, zz);
        if (vf.domain[n] && !seen[n]) {
          seen[n] = 1;
          queue.push_back(n);
        }
      }
    }
    for (const auto& [i, a] : out_w)
      if (!seen[i])
        throw TopologyError(
            "virtual_field: outlet not 6-connected to inlet through the "
            "label path");
  }

  const Vec3 h_m{m.spacing[0] * 1e-3, m.spacing[1] * 1e-3,
                 m.spacing[2] * 1e-3};
  const double vol_m3 = h_m[0] * h_m[1] * h_m[2];

  // RHS: div w = b, total inlet source +1 m^3/s, outlet -1.
  std::vector<double> b(m.frame_size(), 0.0);
  std::vector<std::uint8_t> is_source(m.frame_size(), 0);
  for (const auto& [i, a] : in_w) is_source[i] = 1;
  for (const auto& [i, a] : out_w) is_source[i] = 1;
  auto deposit = [&](const std::vector<std::pair<std::size_t, double>>& w,
                     double total_flux) {
    double total_area = 0.0;
    for (const auto& [i, a] : w) total_area += a;
    for (const auto& [i, a] : w)
      b[i] += total_flux * (a / total_area) / vol_m3;
  };
  deposit(in_w, 1.0);
  deposit(out_w, -1.0);

  // Compatibility: exact zero mean over the domain.
  {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i)
      if (vf.domain[i]) s += b[i];
    const double shift = s / static_cast<double>(n_dom);
    for (std::size_t i = 0; i < b.size(); ++i)
      if (vf.domain[i]) b[i] -= shift;
  }

  // CG on -L phi = -b (positive semidefinite, null space = constants).
  const Stencil7 st{m, vf.domain, h_m};
  const std::size_t n = m.frame_size();
  std::vector<double> phi(n, 0.0), r(n, 0.0), p(n, 0.0), ap(n, 0.0);
  auto project = [&](std::vector<double>& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (vf.domain[i]) s += v[i];
    const double mean = s / static_cast<double>(n_dom);
    for (std::size_t i = 0; i < n; ++i)
      if (vf.domain[i]) v[i] -= mean;
  };
  auto dot_dom = [&](const std::vector<double>& a,
                     const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (vf.domain[i]) s += a[i] * c[i];
    return s;
  };

  for (std::size_t i = 0; i < n; ++i) r[i] = vf.domain[i] ? -b[i] : 0.0;
  project(r);
  p = r;
  double rr = dot_dom(r, r);
  const double b_norm = std::sqrt(rr);
  if (b_norm == 0.0)
    throw TopologyError("virtual_field: zero source vector");
  int it = 0;
  double res = 1.0;
  for (; it < params.max_iterations; ++it) {
    res = std::sqrt(rr) / b_norm;
    if (res <= params.rel_tol) break;
    st.apply(p, ap);
    for (std::size_t i = 0; i < n; ++i) ap[i] = -ap[i];  // -L p
    const double pap = dot_dom(p, ap);
    if (!(pap > 0.0))
      throw SolverError("virtual_field: CG breakdown (p^T A p <= 0)");
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < n; ++i)
      if (vf.domain[i]) {
        phi[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
    project(r);
    const double rr_new = dot_dom(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i)
      if (vf.domain[i]) p[i] = r[i] + beta * p[i];
  }
  if (res > params.rel_tol)
    throw SolverError("virtual_field: CG did not reach tolerance " +
                      std::to_string(params.rel_tol) + " in " +
                      std::to_string(params.max_iterations) +
                      " iterations (residual " + std::to_string(res) + ")");
  vf.iterations = it;
  vf.final_residual = res;

  // Face gradients (zero across walls) and collocated field.
  vf.fx.assign(n, 0.0);
  vf.fy.assign(n, 0.0);
  vf.fz.assign(n, 0.0);
  std::vector<double>* face[3] = {&vf.fx, &vf.fy, &vf.fz};
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y)
      for (int x = 0; x < m.nx(); ++x) {
        const std::size_t c = m.index3(x, y, z);
        if (!vf.domain[c]) continue;
        const int idx[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          int nb[3] = {idx[0], idx[1], idx[2]};
          nb[a] += 1;
          if (st.in(nb[0], nb[1], nb[2]))
            (*face[a])[c] =
                (phi[m.index3(nb[0], nb[1], nb[2])] - phi[c]) / h_m[a];
        }
      }

  vf.wx.assign(n, 0.0);
  vf.wy.assign(n, 0.0);
  vf.wz.assign(n, 0.0);
  std::vector<double>* coll[3] = {&vf.wx, &vf.wy, &vf.wz};
  double sum_abs_w = 0.0;
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y)
      for (int x = 0; x < m.nx(); ++x) {
        const std::size_t c = m.index3(x, y, z);
        if (!vf.domain[c]) continue;
        const int idx[3] = {x, y, z};
        double w2 = 0.0;
        for (int a = 0; a < 3; ++a) {
          int lo[3] = {idx[0], idx[1], idx[2]};
          lo[a] -= 1;
          const double gm = st.in(lo[0], lo[1], lo[2])
                                ? (*face[a])[m.index3(lo[0], lo[1], lo[2])]
                                : 0.0;
          const double gp = (*face[a])[c];
          (*coll[a])[c] = 0.5 * (gm + gp);
          w2 += (*coll[a])[c] * (*coll[a])[c];
        }
        sum_abs_w += std::sqrt(w2);
      }
  vf.mean_abs_w = sum_abs_w / static_cast<double>(n_dom);

  // Interior divergence residual from face fluxes (source voxels excluded).
  double max_div = 0.0;
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y)
      for (int x = 0; x < m.nx(); ++x) {
        const std::size_t c = m.index3(x, y, z);
        if (!vf.domain[c] || is_source[c]) continue;
        const int idx[3] = {x, y, z};
        double div = 0.0;
        for (int a = 0; a < 3; ++a) {
          int lo[3] = {idx[0], idx[1], idx[2]};
          lo[a] -= 1;
          const double gm = st.in(lo[0], lo[1], lo[2])
                                ? (*face[a])[m.index3(lo[0], lo[1], lo[2])]
                                : 0.0;
          div += ((*face[a])[c] - gm) / h_m[a];
        }
        max_div = std::max(max_div, std::abs(div));
      }
  vf.divergence_residual = max_div;
  vf.q_w = 1.0;
  return vf;
}

TimeTrace vwerp_trace(const VelocityField& vel, const VirtualField& vf,
                      const FluidProps& fluid) {
  const GridMeta& m = vel.meta;
  if (!m.same_space(vf.meta))
    throw GeometryError("vwerp_trace: grid mismatch");
  const int nt = m.nt();
  const std::size_t fs = m.frame_size();
  const Vec3 h_m{m.spacing[0] * 1e-3, m.spacing[1] * 1e-3,
                 m.spacing[2] * 1e-3};
  const double vol_m3 = h_m[0] * h_m[1] * h_m[2];
  const double dt_s = m.dt_ms * 1e-3;

  // Domain as a mask for the shared gradient stencil.
  Mask dom_mask;
  dom_mask.meta = m;
  dom_mask.meta.dims[3] = 1;
  dom_mask.labels = vf.domain;

  // Gradient of the virtual field (time-independent).
  VelocityField wfield;
  wfield.meta = m;
  wfield.meta.dims[3] = 1;
  wfield.vx.assign(fs, 0.0f);
  wfield.vy.assign(fs, 0.0f);
  wfield.vz.assign(fs, 0.0f);
  for (std::size_t i = 0; i < fs; ++i) {
    wfield.vx[i] = static_cast<float>(vf.wx[i]);
    wfield.vy[i] = static_cast<float>(vf.wy[i]);
    wfield.vz[i] = static_cast<float>(vf.wz[i]);
  }
  const TensorField gw = velocity_gradient(wfield, dom_mask, 1, 0);

  const std::vector<float>* comp[3] = {&vel.vx, &vel.vy, &vel.vz};
  const double* wcomp[3] = {vf.wx.data(), vf.wy.data(), vf.wz.data()};

  std::vector<double> momentum(nt, 0.0);  // rho * int v.w dV
  std::vector<double> rest(nt, 0.0);      // advective + viscous, Pa*m^3/s

  for (int t = 0; t < nt; ++t) {
    const TensorField gv = velocity_gradient(vel, dom_mask, 1, t);
    double mom = 0.0, adv = 0.0, grad2 = 0.0;
    for (std::size_t i = 0; i < fs; ++i) {
      if (!vf.domain[i]) continue;
      const std::size_t i4 = static_cast<std::size_t>(t) * fs + i;
      const double v[3] = {(*comp[0])[i4], (*comp[1])[i4], (*comp[2])[i4]};
      const double w[3] = {wcomp[0][i], wcomp[1][i], wcomp[2][i]};
      mom += v[0] * w[0] + v[1] * w[1] + v[2] * w[2];
      if (!gv.valid[i]) continue;
      const double* g = gv.at(i);
      for (int ci = 0; ci < 3; ++ci) {
        double conv = 0.0;
        for (int j = 0; j < 3; ++j) conv += v[j] * g[ci * 3 + j];
        adv += conv * w[ci];
      }
      if (gw.valid[i]) {
        const double* h = gw.at(i);
        for (int k = 0; k < 9; ++k) grad2 += g[k] * h[k];
      }
    }
    mom *= fluid.rho * vol_m3;
    adv *= fluid.rho * vol_m3;
    grad2 *= fluid.mu * vol_m3;

    // Wall/inlet/outlet shear: surface integral of (grad v . n) . w over
    // domain boundary faces, outward gradient extrapolated to the face.
    double surf = 0.0;
    for (int z = 0; z < m.nz(); ++z)
      for (int y = 0; y < m.ny(); ++y)
        for (int x = 0; x < m.nx(); ++x) {
          const std::size_t c = m.index3(x, y, z);
          if (!vf.domain[c]) continue;
          const int idx[3] = {x, y, z};
          for (int a = 0; a < 3; ++a)
            for (int s = -1; s <= 1; s += 2) {
              int nb[3] = {idx[0], idx[1], idx[2]};
              nb[a] += s;
              const bool nb_in = m.in_bounds(nb[0], nb[1], nb[2]) &&
                                 vf.domain[m.index3(nb[0], nb[1], nb[2])];
              if (nb_in) continue;  // interior face
              // points 1 and 2 steps inward from c
              int p1[3] = {idx[0], idx[1], idx[2]};
              p1[a] -= s;
              int p2[3] = {idx[0], idx[1], idx[2]};
              p2[a] -= 2 * s;
              const bool h1 = m.in_bounds(p1[0], p1[1], p1[2]) &&
                              vf.domain[m.index3(p1[0], p1[1], p1[2])];
              const bool h2 = h1 && m.in_bounds(p2[0], p2[1], p2[2]) &&
                              vf.domain[m.index3(p2[0], p2[1], p2[2])];
              const double dA = vol_m3 / h_m[a];
              for (int ci = 0; ci < 3; ++ci) {
                const double f0 =
                    (*comp[ci])[static_cast<std::size_t>(t) * fs + c];
                double g;
                if (h2) {
                  const double f1 =
                      (*comp[ci])[static_cast<std::size_t>(t) * fs +
                                  m.index3(p1[0], p1[1], p1[2])];
                  const double f2 =
                      (*comp[ci])[static_cast<std::size_t>(t) * fs +
                                  m.index3(p2[0], p2[1], p2[2])];
                  g = (2.0 * f0 - 3.0 * f1 + f2) / h_m[a];
                } else if (h1) {
                  const double f1 =
                      (*comp[ci])[static_cast<std::size_t>(t) * fs +
                                  m.index3(p1[0], p1[1], p1[2])];
                  g = (f0 - f1) / h_m[a];
                } else {
                  g = 0.0;
                }
                surf += g * wcomp[ci][c] * dA;
              }
            }
        }
    surf *= fluid.mu;

    momentum[t] = mom;
    rest[t] = adv - surf + grad2;
  }

  TimeTrace out{"delta_p", "mmHg", std::vector<double>(nt, 0.0),
                m.dt_ms, TimeTrace::Normalization::None, {}};
  for (int t = 0; t < nt; ++t) {
    const int tp = (t + 1) % nt;
    const int tm = (t - 1 + nt) % nt;
    const double transient =
        nt > 1 ? (momentum[tp] - momentum[tm]) / (2.0 * dt_s) : 0.0;
    out.values[t] = (transient + rest[t]) / vf.q_w * kMmHgPerPa;
  }
  return out;
}

PressurePeaks pressure_peaks(const TimeTrace& pressure,
                             const PhaseWindows& windows) {
  const int nt = pressure.nt();
  if (windows.e_wave.empty() || windows.a_wave.empty())
    throw WindowError("pressure_peaks: empty diastolic windows");
  auto minmax = [&](const IndexRange& r) {
    double lo = pressure.values[r.begin], hi = pressure.values[r.begin];
    for (int i = r.begin; i < r.end && i < nt; ++i) {
      lo = std::min(lo, pressure.values[i]);
      hi = std::max(hi, pressure.values[i]);
    }
    return std::pair{hi, lo};
  };
  PressurePeaks out;
  std::tie(out.e_max, out.e_min) = minmax(windows.e_wave);
  std::tie(out.a_max, out.a_min) = minmax(windows.a_wave);

  double max_abs = 0.0;
  for (const double v : pressure.values) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs > 1e-12) {
    out.crossings_defined = true;
    for (int i = 0; i + 1 < nt; ++i) {
      const double a = pressure.values[i], b = pressure.values[i + 1];
      if ((a > 0 && b < 0) || (a < 0 && b > 0)) {
        const double frac = a / (a - b);
        out.zero_crossings_ms.push_back((i + frac) * pressure.dt_ms);
      }
    }
  }
  return out;
}

}  // namespace laflow
