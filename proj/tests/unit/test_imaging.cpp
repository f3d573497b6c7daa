#include <gtest/gtest.h>

#include "mmpoint/imaging.hpp"
#include "support.hpp"

using namespace mmpoint;

namespace {

struct Peak {
  std::size_t r = 0;
  std::size_t d = 0;
  double value = -1.0;
};

Peak argmax(const std::vector<double>& v, std::size_t cols) {
  Peak p;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] > p.value) p = {i / cols, i % cols, v[i]};
  return p;
}

std::size_t nearest(const std::vector<double>& axis, double x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (std::abs(axis[i] - x) < std::abs(axis[best] - x)) best = i;
  return best;
}

std::size_t count_local_maxima_in_row(const PolarMap& m, std::size_t r, double rel) {
  const std::size_t na = m.angle_axis.size();
  double top = 0.0;
  for (std::size_t a = 0; a < na; ++a) top = std::max(top, m.at(r, a));
  std::size_t n = 0;
  for (std::size_t a = 1; a + 1 < na; ++a)
    if (m.at(r, a) >= rel * top && m.at(r, a) > m.at(r, a - 1) && m.at(r, a) >= m.at(r, a + 1)) ++n;
  return n;
}

}  // namespace

TEST(Imaging, ZeroCubeGivesZeroMaps) {
  const auto cube = synthesize_echo({}, mmtest::radar_for(1, 16), mmtest::ula_layout(8));
  const auto rdm = compute_rdm(cube);
  for (const auto& x : rdm.spectrum) ASSERT_EQ(x, cplx{});
  const auto ram = compute_ram(cube);
  for (double v : ram.polar.values) ASSERT_EQ(v, 0.0);
  for (double v : ram.cartesian.values) ASSERT_EQ(v, 0.0);
}

TEST(Imaging, AxesAndShape) {
  const RadarParams p;
  const auto cube = synthesize_echo({}, p, mmtest::ula_layout(2));
  const auto rdm = compute_rdm(cube);
  EXPECT_EQ(rdm.n_range, 512u);
  EXPECT_EQ(rdm.n_doppler, 64u);
  EXPECT_EQ(rdm.velocity_axis[rdm.zero_doppler_bin()], 0.0);
  EXPECT_NEAR(rdm.range_axis[1] - rdm.range_axis[0], kSpeedOfLight / (2 * p.kr * p.tp), 1e-12);
  EXPECT_NEAR(rdm.velocity_axis[33] - rdm.velocity_axis[32], p.lambda() / (2 * p.ta), 1e-12);
}

TEST(Imaging, StaticPeakAtRangeBin256CentreDoppler) {
  const auto cube = synthesize_echo({mmtest::point_at(50, 0, 0, 0)}, RadarParams{}, mmtest::ula_layout(4));
  const auto rdm = compute_rdm(cube);
  const auto pk = argmax(rdm.power_sum(), rdm.n_doppler);
  EXPECT_EQ(pk.r, 256u);
  EXPECT_EQ(pk.d, rdm.zero_doppler_bin());
}

TEST(Imaging, DopplerBinOffset) {
  const RadarParams p;
  const double v = 10.0;
  const auto cube = synthesize_echo({mmtest::point_at(30, 0, 0, v)}, p, mmtest::ula_layout(1));
  const auto rdm = compute_rdm(cube);
  const auto pk = argmax(rdm.power_sum(), rdm.n_doppler);
  const double fq = doppler_frequency(v, p.lambda());
  const long offset = std::lround(fq * p.ta);
  EXPECT_EQ(static_cast<long>(pk.d) - static_cast<long>(rdm.zero_doppler_bin()), offset);
  EXPECT_NEAR(rdm.velocity_axis[pk.d], v, p.velocity_resolution());
}

TEST(Imaging, ParsevalRectWindow) {
  mmtest::Gen g(41);
  const RadarParams p = mmtest::radar_for(2, 16);
  const ArrayLayout layout{{{0, 0}, {4, 0}}, {{0, 0}, {1, 0}, {2, 0}}};
  std::vector<Scatterer> scene;
  for (int i = 0; i < 4; ++i) scene.push_back(mmtest::point_at(g.uniform(5, 90), g.uniform(-40, 40), 0, g.uniform(-5, 5)));
  const auto cube = synthesize_echo(scene, p, layout, {1e-6, 3, 0});
  const auto rdm = compute_rdm(cube, Window::rect);
  for (std::size_t ch = 0; ch < cube.n_channels; ++ch) {
    double e_cube = 0.0;
    for (std::size_t a = 0; a < cube.n_chirps; ++a)
      for (std::size_t s = 0; s < cube.n_samples; ++s) e_cube += std::norm(cube.at(ch, a, s));
    EXPECT_NEAR(rdm.energy(ch), e_cube * cube.n_samples * cube.n_chirps, 1e-8 * rdm.energy(ch));
  }
}

TEST(Imaging, RandomRangeVelocityDraws) {
  mmtest::Gen g(42);
  const RadarParams p;
  const double v_max = p.lambda() / (4 * p.repetition_interval());
  for (int trial = 0; trial < 20; ++trial) {
    const double r = g.uniform(3, 95);
    const double v = g.uniform(-0.9 * v_max, 0.9 * v_max);
    const auto cube = synthesize_echo({mmtest::point_at(r, 0, 0, v)}, p, mmtest::ula_layout(1));
    const auto rdm = compute_rdm(cube);
    const auto pk = argmax(rdm.power_sum(), rdm.n_doppler);
    const double expected_bin = r / p.range_resolution();
    EXPECT_LE(std::abs(static_cast<double>(pk.r) - expected_bin), 1.0) << "r=" << r << " v=" << v;
    EXPECT_LE(std::abs(rdm.velocity_axis[pk.d] - v), p.velocity_resolution()) << "r=" << r << " v=" << v;
  }
}

TEST(Imaging, StationaryAlwaysZeroDoppler) {
  mmtest::Gen g(43);
  for (int trial = 0; trial < 10; ++trial) {
    const auto cube = synthesize_echo({mmtest::point_at(g.uniform(3, 95), g.uniform(-40, 40), 0, 0)},
                                      mmtest::radar_for(1, 32), mmtest::ula_layout(2));
    const auto rdm = compute_rdm(cube);
    EXPECT_EQ(argmax(rdm.power_sum(), rdm.n_doppler).d, rdm.zero_doppler_bin());
  }
}

TEST(Imaging, RdmSerialMatchesParallel) {
  const auto cube = synthesize_echo({mmtest::point_at(30, 4, 0, 3)}, mmtest::radar_for(2, 16),
                                    {{{0, 0}, {4, 0}}, {{0, 0}, {1, 0}}}, {1e-6, 5, 0});
  EXPECT_EQ(compute_rdm(cube, Window::hann, Exec::serial).spectrum,
            compute_rdm(cube, Window::hann, Exec::parallel).spectrum);
}

// Direct evaluation of the range-angle spectrum on every (range bin, angle)
// node with no FFTs: a Hann-weighted DFT over fast time and a steering-vector
// sum over channels.
TEST(Imaging, RamPeakMatchesDirectDft) {
  const RadarParams p = mmtest::radar_for(1, 2);
  const auto layout = mmtest::ula_layout(16);
  for (double az_deg : {0.0, 17.0}) {
    const auto cube = synthesize_echo({mmtest::point_at(20, az_deg, 0, 0)}, p, layout);
    const auto ram = compute_ram(cube);
    const auto lib = argmax(ram.polar.values, ram.polar.angle_axis.size());

    const std::size_t ns = cube.n_samples;
    const auto w = make_window(Window::hann, ns);
    Peak oracle;
    for (std::size_t r = 95; r < 110; ++r) {
      std::vector<cplx> prof(cube.n_channels);
      for (std::size_t ch = 0; ch < cube.n_channels; ++ch) {
        std::vector<cplx> x(ns);
        for (std::size_t i = 0; i < ns; ++i) x[i] = w[i] * cube.at(ch, 0, i);
        prof[ch] = mmtest::direct_dft(x.data(), ns, static_cast<double>(r) / ns);
      }
      for (std::size_t a = 0; a < ram.polar.angle_axis.size(); ++a) {
        const double u = std::sin(ram.polar.angle_axis[a]);
        cplx acc{};
        for (std::size_t ch = 0; ch < cube.n_channels; ++ch)
          acc += prof[ch] * std::polar(1.0, -2 * kPi * cube.array.elements[ch].az * u);
        if (std::abs(acc) > oracle.value) oracle = {r, a, std::abs(acc)};
      }
    }
    EXPECT_EQ(lib.r, oracle.r);
    EXPECT_EQ(lib.d, oracle.d);
    EXPECT_NEAR(lib.value, oracle.value, 1e-9 * oracle.value);
    EXPECT_LE(std::abs(static_cast<double>(lib.r) - 20 / p.range_resolution()), 1.0);
    EXPECT_LE(std::abs(static_cast<double>(lib.d) - static_cast<double>(nearest(ram.polar.angle_axis, deg2rad(az_deg)))), 1.0);
  }
}

TEST(Imaging, RamResolvesTwoTargetsTenDegreesApart) {
  const auto layout = mmtest::shipped_layout();
  const RadarParams p = mmtest::radar_for(12, 2);
  const auto cube = synthesize_echo({mmtest::point_at(20, -5, 0, 0), mmtest::point_at(20, 5, 0, 0)}, p, layout);
  const auto ram = compute_ram(cube);
  const auto pk = argmax(ram.polar.values, ram.polar.angle_axis.size());
  EXPECT_EQ(count_local_maxima_in_row(ram.polar, pk.r, 0.5), 2u);
  std::vector<double> peaks;
  for (std::size_t a = 1; a + 1 < ram.polar.angle_axis.size(); ++a)
    if (ram.polar.at(pk.r, a) >= 0.5 * pk.value && ram.polar.at(pk.r, a) > ram.polar.at(pk.r, a - 1) &&
        ram.polar.at(pk.r, a) >= ram.polar.at(pk.r, a + 1))
      peaks.push_back(rad2deg(ram.polar.angle_axis[a]));
  ASSERT_EQ(peaks.size(), 2u);
  EXPECT_NEAR(peaks[0], -5, 0.5);
  EXPECT_NEAR(peaks[1], 5, 0.5);
}

TEST(Imaging, RamStaticSceneChirpInvariant) {
  const RadarParams p = mmtest::radar_for(12, 4);
  const auto cube = synthesize_echo({mmtest::point_at(20, 8, 0, 0), mmtest::point_at(35, -12, 2, 0, 4)}, p,
                                    mmtest::shipped_layout());
  RamOptions o;
  const auto ref = compute_ram(cube, o);
  double top = 0.0;
  for (double v : ref.polar.values) top = std::max(top, v);
  for (std::size_t a = 1; a < 4; ++a) {
    o.slow_time_index = a;
    const auto other = compute_ram(cube, o);
    for (std::size_t i = 0; i < ref.polar.values.size(); ++i)
      ASSERT_NEAR(other.polar.values[i], ref.polar.values[i], 1e-8 * top);
  }
}

TEST(Imaging, RamZeroDopplerSliceSeesStaticTarget) {
  const RadarParams p = mmtest::radar_for(1, 32);
  const auto cube = synthesize_echo({mmtest::point_at(30, 0, 0, 0), mmtest::point_at(60, 0, 0, 2.0, 4.0)}, p,
                                    mmtest::ula_layout(16));
  RamOptions o;
  o.mode = RamMode::zero_doppler_slice;
  const auto ram = compute_ram(cube, o);
  const auto pk = argmax(ram.polar.values, ram.polar.angle_axis.size());
  EXPECT_NEAR(ram.polar.range_axis[pk.r], 30, p.range_resolution());
}

TEST(Imaging, RamRejectsOffLatticeArray) {
  const auto cube = synthesize_echo({}, RadarParams{}, {{{0, 0}}, {{0, 0}, {1, 0}, {2.5, 0}}});
  EXPECT_THROW(compute_ram(cube), UnsupportedLayoutError);
}

TEST(Imaging, PolarToCartesianDelta) {
  PolarMap m;
  m.range_axis = linspace(0, 20, 81);
  m.angle_axis = linspace(deg2rad(-60), deg2rad(60), 121);
  m.values.assign(81 * 121, 0.0);
  m.at(40, 60) = 1.0;  // r = 10, theta = 0
  const auto c = polar_to_cartesian(m, 0.25);
  const auto pk = argmax(c.values, c.nx);
  EXPECT_NEAR(c.x(pk.d), 0.0, 0.25);
  EXPECT_NEAR(c.y(pk.r), 10.0, 0.25);
}

TEST(Imaging, PolarToCartesianRing) {
  PolarMap m;
  m.range_axis = linspace(0, 30, 121);
  m.angle_axis = linspace(deg2rad(-60), deg2rad(60), 121);
  m.values.assign(121 * 121, 0.0);
  for (std::size_t a = 0; a < 121; ++a) m.at(60, a) = 1.0;  // r0 = 15
  const double pitch = 0.2;
  const auto c = polar_to_cartesian(m, pitch);
  for (std::size_t iy = 0; iy < c.ny; ++iy) {
    // Strongest cell along each row that crosses the ring.
    double best = 0.0;
    std::size_t bx = 0;
    for (std::size_t ix = 0; ix < c.nx; ++ix)
      if (c.at(ix, iy) > best) {
        best = c.at(ix, iy);
        bx = ix;
      }
    if (best > 0.5) EXPECT_NEAR(std::hypot(c.x(bx), c.y(iy)), 15.0, pitch + 0.25) << "row " << iy;
  }
}

TEST(Imaging, PolarToCartesianLocality) {
  mmtest::Gen g(44);
  PolarMap m;
  m.range_axis = linspace(5, 25, 41);
  m.angle_axis = linspace(deg2rad(-30), deg2rad(40), 71);
  m.values = g.vector(41 * 71, 0.1, 1.0);
  const double pitch = 0.3;
  const auto c = polar_to_cartesian(m, pitch);
  const double dr = 0.5, da = deg2rad(1.0);
  for (std::size_t iy = 0; iy < c.ny; ++iy)
    for (std::size_t ix = 0; ix < c.nx; ++ix) {
      if (c.at(ix, iy) == 0.0) continue;
      const double r = std::hypot(c.x(ix), c.y(iy));
      const double th = std::atan2(c.x(ix), c.y(iy));
      EXPECT_GE(r, 5 - dr);
      EXPECT_LE(r, 25 + dr);
      EXPECT_GE(th, deg2rad(-30) - da);
      EXPECT_LE(th, deg2rad(40) + da);
    }
}

TEST(Imaging, CartesianToPolarDeltaAndZero) {
  CartesianMap c;
  c.pitch = 0.25;
  c.nx = 81;
  c.ny = 81;
  c.x0 = -10;
  c.y0 = 0;
  c.values.assign(c.nx * c.ny, 0.0);
  const auto ra = linspace(1, 19, 73);
  const auto aa = linspace(deg2rad(-45), deg2rad(45), 91);
  const auto zero = cartesian_to_polar(c, ra, aa);
  for (double v : zero.values) ASSERT_EQ(v, 0.0);
  c.at(40, 40) = 1.0;  // x = 0, y = 10
  const auto p = cartesian_to_polar(c, ra, aa);
  const auto pk = argmax(p.values, aa.size());
  EXPECT_NEAR(ra[pk.r], 10.0, ra[1] - ra[0]);
  EXPECT_NEAR(aa[pk.d], 0.0, aa[1] - aa[0]);
}

TEST(Imaging, PolarCartesianRoundTripKeepsPeak) {
  mmtest::Gen g(45);
  for (int trial = 0; trial < 10; ++trial) {
    PolarMap m;
    m.range_axis = linspace(2, 40, 77);
    m.angle_axis = linspace(deg2rad(-60), deg2rad(60), 121);
    m.values.assign(77 * 121, 0.0);
    const double r0 = g.uniform(8, 35), a0 = g.uniform(-0.8, 0.8);
    for (std::size_t r = 0; r < 77; ++r)
      for (std::size_t a = 0; a < 121; ++a) {
        const double dr = (m.range_axis[r] - r0) / 2.0, da = (m.angle_axis[a] - a0) / 0.1;
        m.at(r, a) = std::exp(-dr * dr - da * da);
      }
    const auto c = polar_to_cartesian(m, 0.1);
    const auto back = cartesian_to_polar(c, m.range_axis, m.angle_axis);
    const auto p0 = argmax(m.values, 121), p1 = argmax(back.values, 121);
    EXPECT_LE(std::abs(static_cast<long>(p0.r) - static_cast<long>(p1.r)), 1);
    EXPECT_LE(std::abs(static_cast<long>(p0.d) - static_cast<long>(p1.d)), 1);
  }
}

TEST(Imaging, Windows) {
  const auto h = make_window(Window::hann, 8);
  EXPECT_EQ(h[0], 0.0);
  EXPECT_NEAR(h[4], 1.0, 1e-15);
  EXPECT_NEAR(h[2], 0.5, 1e-15);
  for (double v : make_window(Window::rect, 5)) EXPECT_EQ(v, 1.0);
}
