#include <gtest/gtest.h>

#include <cmath>

#include "deepbf/core.hpp"

using namespace deepbf;

TEST(Probe, DefaultValues) {
  const ProbeConfig p = default_probe();
  EXPECT_EQ(p.carrier_freq_hz, 8.48e6);
  EXPECT_EQ(p.n_rx_focused, 64);
  EXPECT_EQ(p.n_planewaves, 31);
  EXPECT_EQ(p.pitch_m, 0.2e-3);
  EXPECT_EQ(p.n_te_focused, 96);
  EXPECT_EQ(p.n_elements, 192);
  EXPECT_EQ(p.n_rx_planewave, 192);
  EXPECT_NO_THROW(p.validate());
}

TEST(Probe, ValidateNamesField) {
  ProbeConfig p;
  p.pitch_m = 0;
  try {
    p.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("pitch_m"), std::string::npos);
  }
}

TEST(Probe, ScanLinesSitBetweenCentreChannels) {
  const ProbeConfig p;
  for (int k = 0; k < p.n_te_focused; ++k) {
    const int e0 = p.first_rx_element(k);
    const double mid = 0.5 * (p.element_x(e0 + 31) + p.element_x(e0 + 32));
    EXPECT_NEAR(p.scanline_x(k), mid, 1e-12) << k;
  }
  EXPECT_NEAR(p.scanline_x(0), -p.scanline_x(95), 1e-15);
}

TEST(Depth, IndexToMeters) {
  const ProbeConfig p;
  EXPECT_EQ(depth_index_to_meters(0, p), 0.0);
  EXPECT_NEAR(depth_index_to_meters(1, p), 1.925e-5, 1e-18);
  EXPECT_NEAR(depth_index_to_meters(10, p, 5e-3), 5e-3 + 10 * 1.925e-5, 1e-15);
  EXPECT_THROW(depth_index_to_meters(-1, p), Error);
}

TEST(Depth, RoundTrip) {
  const ProbeConfig p;
  for (std::ptrdiff_t i = 0; i < 5000; i += 7) {
    EXPECT_EQ(meters_to_depth_index(depth_index_to_meters(i, p), p), i);
    EXPECT_EQ(meters_to_depth_index(depth_index_to_meters(i, p, 3e-3), p, 3e-3), i);
  }
}

TEST(Depth, StepMatchesSoundSpeed) {
  ProbeConfig p;
  for (double fs : {20e6, 40e6, 62.5e6}) {
    p.sampling_freq_hz = fs;
    EXPECT_NEAR(p.depth_step_m() * 2 * fs / p.sound_speed_m_s, 1.0, 1e-9);
  }
}

TEST(Subsampling, FactorsAndLabels) {
  EXPECT_EQ(subsampling_factor(64, 64), 1.0);
  EXPECT_EQ(subsampling_factor(4, 64), 16.0);
  EXPECT_EQ(subsampling_label(64, 64), "1");
  EXPECT_EQ(subsampling_label(24, 64), "2.7");
  EXPECT_EQ(subsampling_label(4, 64), "16");
  EXPECT_EQ(subsampling_label(11, 31), "2.8");
  EXPECT_THROW(subsampling_factor(0, 64), Error);
  EXPECT_THROW(subsampling_factor(65, 64), Error);
}

TEST(Subsampling, StrictlyDecreasing) {
  for (int n = 1; n < 64; ++n) EXPECT_GT(subsampling_factor(n, 64), subsampling_factor(n + 1, 64));
}

TEST(RFCube, ShapeAndIndexing) {
  RFCube c(4, 3, 2, EventKind::FocusedTe, 1e-3, 1.925e-5, {0.0, 1.0});
  EXPECT_EQ(c.samples().size(), 24u);
  c.at(3, 2, 1) = 5.0;
  EXPECT_EQ(c.samples()[23], 5.0);
  EXPECT_EQ(c.index(1, 0, 0), 6u);
  EXPECT_NO_THROW(c.validate());
  c.at(0, 0, 0) = NAN;
  EXPECT_THROW(c.validate(), Error);
}

TEST(RFCube, RejectsBadShape) {
  EXPECT_THROW(RFCube(0, 3, 1, EventKind::FocusedTe, 0, 1e-5, {0.0}), Error);
  EXPECT_THROW(RFCube(2, 3, 2, EventKind::FocusedTe, 0, 1e-5, {0.0}), Error);
  EXPECT_THROW(RFCube(2, 3, 1, EventKind::FocusedTe, 0, 0.0, {0.0}), Error);
}

TEST(EventKind, StringRoundTrip) {
  for (auto k : {EventKind::FocusedTe, EventKind::PlaneWave})
    EXPECT_EQ(event_kind_from_string(to_string(k)), k);
  EXPECT_THROW(event_kind_from_string("sector"), Error);
}
