#include <gtest/gtest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "deepbf/das.hpp"
#include "deepbf/rng.hpp"
#include "deepbf/sim.hpp"
#include "deepbf/subsample.hpp"

using namespace deepbf;

namespace {

const Extent kExtent{-19.2e-3, 19.2e-3, 1e-3, 30e-3};

RFCube random_focused(std::size_t n_depth, std::uint64_t seed) {
  const ProbeConfig p;
  std::vector<double> lines;
  for (int k = 0; k < p.n_te_focused; ++k) lines.push_back(p.scanline_x(k));
  RFCube c(n_depth, 64, 96, EventKind::FocusedTe, 2e-3, p.depth_step_m(), lines);
  Rng rng(seed);
  for (double& v : c.samples()) v = rng.normal();
  return c;
}

std::pair<std::size_t, std::size_t> argmax(const Grid& g) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < g.data.size(); ++k)
    if (std::abs(g.data[k]) > std::abs(g.data[best])) best = k;
  return {best / g.cols, best % g.cols};
}

}  // namespace

TEST(Delay, Focused) {
  EXPECT_DOUBLE_EQ(rx_delay_focused(0.01, 1e-3, 1e-3, 1540), 0.02 / 1540);
  EXPECT_NEAR(rx_delay_focused(0.003, 0.004, 0.0, 1540), 5.1948e-6, 1e-10);
  EXPECT_NEAR(rx_delay_focused(0.003, -0.004, 0.0, 1540), 0.008 / 1540, 1e-18);
  double prev = 0;
  for (int i = 0; i < 20; ++i) {
    const double t = rx_delay_focused(0.005, i * 1e-4, 0.0, 1540);
    EXPECT_GT(t, prev);
    prev = t;
  }
}

TEST(Delay, Planewave) {
  EXPECT_DOUBLE_EQ(rx_delay_planewave(0.01, 2e-3, 2e-3, 0.0, 1540), 0.02 / 1540);
  for (double dx : {-3e-3, 0.0, 1e-3, 7e-3})
    EXPECT_EQ(rx_delay_planewave(0.006, 1e-3, 1e-3 + dx, 0.0, 1540),
              rx_delay_focused(0.006, 1e-3 + dx, 1e-3, 1540));
  const double th = std::numbers::pi / 6, x = 2e-3;
  EXPECT_NEAR(rx_delay_planewave(0.003, x, x, th, 1540),
              (0.003 * std::cos(th) + x * std::sin(th) + 0.003) / 1540, 1e-18);
}

TEST(SampleAt, Interpolation) {
  const std::vector<double> v{0.0, 10.0, 20.0, 40.0};
  EXPECT_EQ(sample_at(v.data(), 1, 4, 1.5), 15.0);
  EXPECT_EQ(sample_at(v.data(), 1, 4, 3.0), 40.0);
  EXPECT_EQ(sample_at(v.data(), 1, 4, 3.2), 0.0);
  EXPECT_EQ(sample_at(v.data(), 1, 4, -0.1), 0.0);
  EXPECT_EQ(sample_at(v.data(), 1, 4, NAN), 0.0);
  EXPECT_EQ(sample_at(v.data(), 2, 2, 0.5), 10.0);
}

TEST(DasFocused, PointScattererPeakAndAperture) {
  const ProbeConfig probe;
  const int k = 48;
  const double d = 10e-3;
  const Phantom ph = make_point_phantom(kExtent, probe.scanline_x(k), d);
  const RFCube raw = simulate_focused_frame(ph, probe, Pulse::for_probe(probe), 700);
  const auto full = das_focused(raw, probe);
  const auto img = envelope(analytic_columns(full.rf_sum));
  const auto [row, col] = argmax(img);
  EXPECT_LE(std::abs(static_cast<long>(row) - std::lround(2 * d * probe.sampling_freq_hz /
                                                           probe.sound_speed_m_s)),
            1);
  EXPECT_LE(std::abs(static_cast<long>(col) - k), 1);

  const auto m16 = make_focused_mask(raw.n_depth(), 64, 16, 3);
  const auto sub = das_focused(raw, probe, &m16);
  EXPECT_GT(std::abs(full.rf_sum(row, k)), std::abs(sub.rf_sum(row, k)));
}

TEST(DasFocused, MonotoneAperture) {
  const ProbeConfig probe;
  const int k = 48;
  const double d = 8e-3;
  const Phantom ph = make_point_phantom(kExtent, probe.scanline_x(k), d);
  const RFCube raw = simulate_focused_frame(ph, probe, Pulse::for_probe(probe), 500);
  const auto row = static_cast<std::size_t>(
      std::lround(2 * d * probe.sampling_freq_hz / probe.sound_speed_m_s));
  // Channels added outward from the centre pair.
  SamplingMask m = full_channel_mask(raw.n_depth(), 64);
  std::fill(m.bits.begin(), m.bits.end(), 0);
  double prev = 0;
  for (int half = 1; half <= 32; ++half) {
    for (std::size_t p = 0; p < m.n_planes; ++p) {
      m.bits[p * 64 + 32 - half] = 1;
      m.bits[p * 64 + 31 + half] = 1;
    }
    m.n_keep = 2 * half;
    const double v = std::abs(das_focused(raw, probe, &m).rf_sum(row, k));
    EXPECT_GE(v, prev) << half;
    prev = v;
  }
}

TEST(DasFocused, ZeroCubeAndCentrePair) {
  const ProbeConfig probe;
  RFCube zero = random_focused(64, 1);
  for (double& v : zero.samples()) v = 0;
  for (double v : das_focused(zero, probe).rf_sum.data) EXPECT_EQ(v, 0.0);

  const RFCube raw = random_focused(64, 2);
  const auto m2 = make_focused_mask(64, 64, 2, 0);
  const auto got = das_focused(raw, probe, &m2);
  const RFCube aligned = align_focused(raw, probe);
  for (std::size_t d = 0; d < 64; ++d)
    for (std::size_t k = 0; k < 96; ++k)
      EXPECT_EQ(got.rf_sum(d, k), 0.0 + aligned.at(d, 31, k) + aligned.at(d, 32, k));
}

TEST(DasFocused, Linearity) {
  const ProbeConfig probe;
  const RFCube a = random_focused(96, 3), b = random_focused(96, 4);
  RFCube ab = a;
  for (std::size_t i = 0; i < ab.samples().size(); ++i) ab.samples()[i] += 2.5 * b.samples()[i];
  const auto la = das_focused(a, probe), lb = das_focused(b, probe), lab = das_focused(ab, probe);
  double peak = 0, worst = 0;
  for (std::size_t i = 0; i < lab.rf_sum.data.size(); ++i) {
    peak = std::max(peak, std::abs(lab.rf_sum.data[i]));
    worst = std::max(worst, std::abs(lab.rf_sum.data[i] - la.rf_sum.data[i] - 2.5 * lb.rf_sum.data[i]));
  }
  EXPECT_LT(worst / peak, 1e-12);
}

TEST(DasFocused, SumAlignedIsBitwiseDas) {
  const ProbeConfig probe;
  const RFCube raw = random_focused(80, 5);
  const auto mask = make_focused_mask(80, 64, 16, 9);
  const RFCube aligned = align_focused(raw, probe);
  EXPECT_EQ(sum_aligned(aligned).rf_sum, das_focused(raw, probe).rf_sum);
  EXPECT_EQ(sum_aligned(aligned, &mask).rf_sum, das_focused(raw, probe, &mask).rf_sum);
}

TEST(DasFocused, ParallelMatchesSerialBitwise) {
  const ProbeConfig probe;
  const RFCube raw = random_focused(120, 6);
  const auto mask = make_focused_mask(120, 64, 8, 1);
  const int saved = omp_get_max_threads();
  for (int threads : {1, 3, 4}) {
    omp_set_num_threads(threads);
    EXPECT_EQ(das_focused(raw, probe).rf_sum, serial::das_focused(raw, probe).rf_sum);
    EXPECT_EQ(das_focused(raw, probe, &mask).rf_sum, serial::das_focused(raw, probe, &mask).rf_sum);
  }
  omp_set_num_threads(saved);
}

TEST(DasFocused, Errors) {
  const ProbeConfig probe;
  RFCube pw(32, 64, 1, EventKind::PlaneWave, 0, probe.depth_step_m(), {0.0});
  EXPECT_THROW(das_focused(pw, probe), Error);
  const RFCube raw = random_focused(32, 1);
  const auto wrong = make_focused_mask(31, 64, 8, 1);
  EXPECT_THROW(das_focused(raw, probe, &wrong), Error);
}

TEST(DasPlanewave, PointScatterer) {
  const ProbeConfig probe;
  const Pulse pulse = Pulse::for_probe(probe);
  const auto angles = angle_set(5, 10 * std::numbers::pi / 180);
  const double x = probe.element_x(120), z = 9e-3, start = 6e-3;
  const auto cubes = simulate_planewave_frame(make_point_phantom(kExtent, x, z), probe, pulse,
                                              angles, 320, start);
  const auto lines = das_planewave_compound(cubes, probe, angles, make_pw_subset(5, 5));
  EXPECT_EQ(lines.n_lateral(), 192u);
  const auto [row, col] = argmax(envelope(analytic_columns(lines.rf_sum)));
  EXPECT_LE(std::abs(static_cast<long>(row) -
                     std::lround((z - start) / probe.depth_step_m())),
            1);
  EXPECT_LE(std::abs(static_cast<long>(col) - 120), 1);
}

TEST(DasPlanewave, CompoundIsSumOfSingleAngles) {
  const ProbeConfig probe;
  const auto angles = angle_set(7, 0.2);
  std::vector<RFCube> cubes;
  Rng rng(4);
  for (double a : angles) {
    RFCube c(48, 192, 1, EventKind::PlaneWave, 3e-3, probe.depth_step_m(), {a});
    for (double& v : c.samples()) v = rng.normal();
    cubes.push_back(std::move(c));
  }
  const auto all = das_planewave_compound(cubes, probe, angles, make_pw_subset(7, 7));
  Grid sum(48, 192);
  for (std::size_t a = 0; a < angles.size(); ++a) {
    SamplingMask one = make_pw_subset(7, 1);
    std::fill(one.bits.begin(), one.bits.end(), 0);
    one.bits[a] = 1;
    const auto single = das_planewave_compound(cubes, probe, angles, one);
    for (std::size_t k = 0; k < sum.data.size(); ++k) sum.data[k] += single.rf_sum.data[k];
  }
  EXPECT_EQ(all.rf_sum, sum);

  const int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  const auto cm = make_focused_mask(48, 192, 32, 2);
  const auto sub = make_pw_subset(7, 3);
  EXPECT_EQ(das_planewave_compound(cubes, probe, angles, sub, &cm).rf_sum,
            serial::das_planewave_compound(cubes, probe, angles, sub, &cm).rf_sum);
  omp_set_num_threads(saved);

  for (auto& c : cubes)
    for (double& v : c.samples()) v = 0;
  for (double v : das_planewave_compound(cubes, probe, angles, sub).rf_sum.data) EXPECT_EQ(v, 0.0);
  SamplingMask empty = sub;
  std::fill(empty.bits.begin(), empty.bits.end(), 0);
  EXPECT_THROW(das_planewave_compound(cubes, probe, angles, empty), Error);
}

TEST(Hilbert, CosineEnvelopeAndQuadrature) {
  for (std::size_t n : {64u, 255u, 1024u}) {
    for (std::size_t k : {1u, 7u, 20u}) {
      std::vector<double> x(n);
      for (std::size_t t = 0; t < n; ++t) x[t] = std::cos(2 * std::numbers::pi * k * t / n);
      const IQLine iq = hilbert_analytic(x);
      EXPECT_EQ(iq.i_component, x);
      for (std::size_t t = 0; t < n; ++t) {
        EXPECT_NEAR(std::hypot(iq.i_component[t], iq.q_component[t]), 1.0, 1e-9);
        EXPECT_NEAR(iq.q_component[t], std::sin(2 * std::numbers::pi * k * t / n), 1e-9);
      }
    }
  }
  EXPECT_THROW(hilbert_analytic(std::vector<double>{1.0}), Error);
}

TEST(Hilbert, SignFlipInvariantEnvelope) {
  Rng rng(8);
  Grid g(100, 3);
  for (double& v : g.data) v = rng.normal();
  Grid neg = g;
  for (double& v : neg.data) v = -v;
  const Grid a = envelope(analytic_columns(g)), b = envelope(analytic_columns(neg));
  for (std::size_t k = 0; k < a.data.size(); ++k) EXPECT_NEAR(a.data[k], b.data[k], 1e-12);
}

TEST(LogCompress, PeakAndClamp) {
  Grid env(2, 3);
  env.data = {1.0, 0.5, 1e-3, 1e-4, 0.0, 0.1};
  const BModeImage img = log_compress(env, 60.0);
  EXPECT_EQ(img(0, 0), 0.0);
  EXPECT_EQ(img(0, 2), -60.0);
  EXPECT_EQ(img(1, 0), -60.0);
  EXPECT_EQ(img(1, 1), -60.0);
  EXPECT_NEAR(img(1, 2), -20.0, 1e-12);
  EXPECT_NEAR(img(0, 1), 20 * std::log10(0.5), 1e-12);
  EXPECT_FALSE(img.all_zero_input);
}

TEST(LogCompress, AllZeroInput) {
  const BModeImage img = log_compress(Grid(4, 4), 60.0);
  EXPECT_TRUE(img.all_zero_input);
  for (double v : img.pixels_db.data) EXPECT_EQ(v, -60.0);
}

TEST(LogCompress, ScaleInvariant) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    Grid rf(128, 4);
    for (double& v : rf.data) v = rng.normal();
    const double scale = trial == 0 ? 7.0 : std::exp(rng.uniform(-20, 20));
    Grid scaled = rf;
    for (double& v : scaled.data) v *= scale;
    BeamformedLines a, b;
    a.rf_sum = rf;
    b.rf_sum = scaled;
    const BModeImage ia = envelope_log_compress(a), ib = envelope_log_compress(b);
    const auto& da = ia.pixels_db.data;
    const auto& db = ib.pixels_db.data;
    EXPECT_EQ(std::max_element(da.begin(), da.end()) - da.begin(),
              std::max_element(db.begin(), db.end()) - db.begin());
    EXPECT_EQ(*std::max_element(db.begin(), db.end()), 0.0);
    for (std::size_t k = 0; k < ia.pixels_db.data.size(); ++k)
      EXPECT_NEAR(ia.pixels_db.data[k], ib.pixels_db.data[k], 1e-9);
  }
}
