#include <doctest.h>

#include <cmath>

#include "laflow/errors.hpp"
#include "laflow/geometry.hpp"
#include "laflow/pressure.hpp"
#include "laflow/synth.hpp"

using namespace laflow;

namespace {

constexpr double kPi = 3.14159265358979323846;

SectionGrid tube_section(const Mask& mask, double x_mm) {
  const GridMeta& m = mask.meta;
  Probe p;
  p.center_mm = {x_mm, (m.ny() - 1) * 0.5 * m.spacing[1],
                 (m.nz() - 1) * 0.5 * m.spacing[2]};
  p.direction = Vec3{1.0, 0.0, 0.0};
  return extract_section(mask, 1, p);
}

// Net x-flux (m^3/s) through the face plane between x and x+1.
double plane_flux(const VirtualField& vf, int x) {
  const GridMeta& m = vf.meta;
  const double face_m2 = m.spacing[1] * m.spacing[2] * 1e-6;
  double q = 0.0;
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y) {
      const std::size_t c = m.index3(x, y, z);
      if (vf.domain[c]) q += vf.fx[c] * face_m2;
    }
  return q;
}

}  // namespace

TEST_CASE("virtual field in a straight tube is a uniform plug") {
  SynthSpec spec;
  spec.kind = SynthKind::Poiseuille;
  spec.dims = {48, 32, 32, 1};
  spec.radius_mm = 10.0;
  const SynthResult res = generate(spec);
  const Mask& mask = *res.dataset.mask;
  const GridMeta& m = mask.meta;

  const SectionGrid inlet = tube_section(mask, 8.0);
  const SectionGrid outlet = tube_section(mask, 40.0);
  const VirtualField vf = virtual_field(mask, {1}, inlet, outlet);

  CHECK(vf.q_w == 1.0);
  CHECK(vf.iterations > 0);
  CHECK(vf.final_residual <= 1e-8);

  // Flux through the mid-plane carries the full unit source.
  CHECK(plane_flux(vf, 24) == doctest::Approx(1.0).epsilon(0.01));

  // Away from the sources the plug speed is flux / cross-section area.
  std::size_t n_plane = 0;
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y)
      if (vf.domain[m.index3(24, y, z)]) ++n_plane;
  const double w_expected = 1.0 / (static_cast<double>(n_plane) * 1e-6);
  const double cy = (m.ny() - 1) * 0.5, cz = (m.nz() - 1) * 0.5;
  for (int z = 0; z < m.nz(); ++z)
    for (int y = 0; y < m.ny(); ++y) {
      const std::size_t c = m.index3(24, y, z);
      if (!vf.domain[c]) continue;
      const double r = std::hypot(y - cy, z - cz);
      if (r > 0.6 * spec.radius_mm) continue;  // skip staircase wall band
      CHECK(vf.wx[c] == doctest::Approx(w_expected).epsilon(0.03));
      CHECK(std::abs(vf.wy[c]) < 0.05 * w_expected);
      CHECK(std::abs(vf.wz[c]) < 0.05 * w_expected);
    }
  // the mean runs over the whole tube; w vanishes outside the 32 of 48
  // millimetres between the source planes
  CHECK(vf.mean_abs_w ==
        doctest::Approx(w_expected * 32.0 / 48.0).epsilon(0.10));

  // Discrete incompressibility away from the sources.
  const double h_m = m.spacing[0] * 1e-3;
  CHECK(vf.divergence_residual <= 1e-6 * vf.mean_abs_w / h_m);
}

TEST_CASE("coincident inlet and outlet planes are rejected") {
  SynthSpec spec;
  spec.kind = SynthKind::Poiseuille;
  spec.dims = {32, 24, 24, 1};
  spec.radius_mm = 8.0;
  const SynthResult res = generate(spec);
  const SectionGrid sec = tube_section(*res.dataset.mask, 16.0);
  CHECK_THROWS_AS(virtual_field(*res.dataset.mask, {1}, sec, sec),
                  TopologyError);
}

TEST_CASE("virtual flux is conserved around an L-shaped duct") {
  GridMeta m;
  m.dims = {40, 40, 12, 1};
  Mask mask;
  mask.meta = m;
  mask.labels.assign(m.frame_size(), 0);
  // horizontal arm y in [4,12), vertical arm x in [28,36), both z in [2,10)
  for (int z = 2; z < 10; ++z) {
    for (int y = 4; y < 12; ++y)
      for (int x = 4; x < 36; ++x) mask.labels[m.index3(x, y, z)] = 1;
    for (int y = 4; y < 36; ++y)
      for (int x = 28; x < 36; ++x) mask.labels[m.index3(x, y, z)] = 1;
  }

  auto manual_section = [&](int fixed_axis, int coord) {
    SectionGrid s;
    s.normal = fixed_axis == 0 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    for (int z = 0; z < m.nz(); ++z)
      for (int b = 0; b < (fixed_axis == 0 ? m.ny() : m.nx()); ++b) {
        const int x = fixed_axis == 0 ? coord : b;
        const int y = fixed_axis == 0 ? b : coord;
        if (mask.labels[m.index3(x, y, z)])
          s.samples.push_back({m.voxel_center(x, y, z), 1.0});
      }
    s.origin_mm = s.samples.front().point_mm;
    return s;
  };
  const SectionGrid inlet = manual_section(0, 5);    // plane x = 5
  const SectionGrid outlet = manual_section(1, 34);  // plane y = 34
  const VirtualField vf = virtual_field(mask, {1}, inlet, outlet);

  // An intermediate cross-section in the horizontal arm sees the full flux.
  CHECK(plane_flux(vf, 18) == doctest::Approx(1.0).epsilon(0.01));
  const double h_m = 1e-3;
  CHECK(vf.divergence_residual <= 1e-6 * vf.mean_abs_w / h_m);
}

TEST_CASE("disconnected outlet is rejected") {
  GridMeta m;
  m.dims = {24, 8, 8, 1};
  Mask mask;
  mask.meta = m;
  mask.labels.assign(m.frame_size(), 0);
  // two separate slabs with a gap at x in [10,14)
  for (int z = 1; z < 7; ++z)
    for (int y = 1; y < 7; ++y) {
      for (int x = 1; x < 10; ++x) mask.labels[m.index3(x, y, z)] = 1;
      for (int x = 14; x < 23; ++x) mask.labels[m.index3(x, y, z)] = 1;
    }
  auto slab_section = [&](int coord) {
    SectionGrid s;
    s.normal = Vec3{1, 0, 0};
    for (int z = 1; z < 7; ++z)
      for (int y = 1; y < 7; ++y)
        s.samples.push_back({m.voxel_center(coord, y, z), 1.0});
    s.origin_mm = s.samples.front().point_mm;
    return s;
  };
  CHECK_THROWS_AS(
      virtual_field(mask, {1}, slab_section(3), slab_section(20)),
      TopologyError);
}

TEST_CASE("relative pressure of a still field is zero") {
  SynthSpec spec;
  spec.kind = SynthKind::Poiseuille;
  spec.dims = {32, 24, 24, 3};
  spec.radius_mm = 8.0;
  SynthResult res = generate(spec);
  VelocityField& vel = res.dataset.velocity;
  std::fill(vel.vx.begin(), vel.vx.end(), 0.0f);
  const VirtualField vf = virtual_field(
      *res.dataset.mask, {1}, tube_section(*res.dataset.mask, 6.0),
      tube_section(*res.dataset.mask, 26.0));
  const TimeTrace dp = vwerp_trace(vel, vf, res.dataset.fluid);
  for (double v : dp.values) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("steady tube pressure drop matches the analytic law") {
  SynthSpec spec;
  spec.kind = SynthKind::Poiseuille;
  spec.dims = {48, 32, 32, 1};
  spec.radius_mm = 10.0;
  spec.v_max = 0.5;
  const SynthResult res = generate(spec);
  const Mask& mask = *res.dataset.mask;
  const VirtualField vf = virtual_field(mask, {1}, tube_section(mask, 8.0),
                                        tube_section(mask, 40.0));
  const FluidProps fluid;
  const TimeTrace dp = vwerp_trace(res.dataset.velocity, vf, fluid);
  REQUIRE(dp.nt() == 1);
  const double R = 0.010, L = 0.032;
  const double q = kPi * R * R * spec.v_max / 2.0;
  const double expected_pa = 8.0 * fluid.mu * L * q / (kPi * R * R * R * R);
  CHECK(dp.values[0] ==
        doctest::Approx(expected_pa * kMmHgPerPa).epsilon(0.10));
  CHECK(dp.values[0] > 0.0);  // inlet side above outlet side
}

TEST_CASE("steady flow has no transient contribution") {
  SynthSpec spec;
  spec.kind = SynthKind::Poiseuille;
  spec.dims = {32, 24, 24, 4};
  spec.radius_mm = 8.0;
  const SynthResult res = generate(spec);
  const Mask& mask = *res.dataset.mask;
  const VirtualField vf = virtual_field(mask, {1}, tube_section(mask, 6.0),
                                        tube_section(mask, 26.0));
  const TimeTrace dp = vwerp_trace(res.dataset.velocity, vf,
                                   res.dataset.fluid);
  REQUIRE(dp.nt() == 4);
  for (int t = 1; t < 4; ++t)
    CHECK(dp.values[t] == doctest::Approx(dp.values[0]).epsilon(1e-9));
}

TEST_CASE("accelerating plug flow recovers rho L dv/dt") {
  SynthSpec spec;
  spec.kind = SynthKind::PulsatilePlug;
  spec.dims = {64, 40, 40, 20};
  spec.radius_mm = 8.0;
  spec.plug_base = 0.3;
  spec.plug_amp = 0.2;
  const SynthResult res = generate(spec);
  const Mask& mask = *res.dataset.mask;
  const VirtualField vf = virtual_field(mask, {1}, tube_section(mask, 10.0),
                                        tube_section(mask, 54.0));
  const FluidProps fluid;
  const TimeTrace dp = vwerp_trace(res.dataset.velocity, vf, fluid);

  const double L = 0.044;  // plane separation in metres
  const double dt_s = res.dataset.velocity.meta.dt_ms * 1e-3;
  const int nt = 20;
  double max_dp = 0.0, max_exp = 0.0;
  for (int t = 0; t < nt; ++t) {
    // same periodic central difference as the momentum term
    auto plug = [&](int tt) {
      return spec.plug_base +
             spec.plug_amp *
                 std::sin(2.0 * kPi * ((tt % nt + nt) % nt) / nt);
    };
    const double a = (plug(t + 1) - plug(t - 1)) / (2.0 * dt_s);
    const double expected = fluid.rho * L * a * kMmHgPerPa;
    max_dp = std::max(max_dp, std::abs(dp.values[t]));
    max_exp = std::max(max_exp, std::abs(expected));
    if (std::abs(expected) > 0.3 * fluid.rho * L * kMmHgPerPa)
      CHECK(dp.values[t] == doctest::Approx(expected).epsilon(0.10));
  }
  CHECK(max_dp == doctest::Approx(max_exp).epsilon(0.10));
}

TEST_CASE("rescaling the virtual field leaves the pressure unchanged") {
  SynthSpec spec;
  spec.kind = SynthKind::Poiseuille;
  spec.dims = {32, 24, 24, 2};
  spec.radius_mm = 8.0;
  const SynthResult res = generate(spec);
  const Mask& mask = *res.dataset.mask;
  VirtualField vf = virtual_field(mask, {1}, tube_section(mask, 6.0),
                                  tube_section(mask, 26.0));
  const TimeTrace base = vwerp_trace(res.dataset.velocity, vf,
                                     res.dataset.fluid);
  const double c = 2.0;  // exact in binary floating point
  for (auto* v : {&vf.wx, &vf.wy, &vf.wz, &vf.fx, &vf.fy, &vf.fz})
    for (double& x : *v) x *= c;
  vf.q_w *= c;
  const TimeTrace scaled = vwerp_trace(res.dataset.velocity, vf,
                                       res.dataset.fluid);
  for (int t = 0; t < base.nt(); ++t)
    CHECK(scaled.values[t] ==
          doctest::Approx(base.values[t]).epsilon(1e-9));
}

TEST_CASE("pressure peaks and zero crossings") {
  PhaseWindows w;
  w.systole = {0, 5};
  w.e_wave = {5, 14};
  w.diastasis = {14, 17};
  w.a_wave = {17, 30};

  SUBCASE("sinusoid of amplitude three") {
    TimeTrace p{"delta_p", "mmHg", std::vector<double>(30, 0.0), 40.0};
    for (int t = 0; t < 30; ++t)
      p.values[t] = 3.0 * std::sin(2.0 * kPi * (t + 0.5) / 30.0);
    const PressurePeaks pk = pressure_peaks(p, w);
    CHECK(pk.e_max == doctest::Approx(3.0).epsilon(0.02));
    CHECK(pk.a_min == doctest::Approx(-3.0).epsilon(0.02));
    CHECK(pk.crossings_defined);
    REQUIRE(pk.zero_crossings_ms.size() == 1);
    CHECK(pk.zero_crossings_ms[0] == doctest::Approx(14.5 * 40.0).epsilon(0.01));
  }

  SUBCASE("flat zero trace has no defined crossings") {
    TimeTrace p{"delta_p", "mmHg", std::vector<double>(30, 0.0), 40.0};
    const PressurePeaks pk = pressure_peaks(p, w);
    CHECK_FALSE(pk.crossings_defined);
    CHECK(pk.zero_crossings_ms.empty());
    CHECK(pk.e_max == 0.0);
    CHECK(pk.a_min == 0.0);
  }

  SUBCASE("empty diastolic windows are rejected") {
    PhaseWindows bad = w;
    bad.a_wave = {17, 17};
    TimeTrace p{"delta_p", "mmHg", std::vector<double>(30, 1.0), 40.0};
    CHECK_THROWS_AS(pressure_peaks(p, bad), WindowError);
  }
}
