#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "deepbf/nn/network.hpp"
#include "deepbf/pipeline.hpp"
#include "deepbf/rng.hpp"

using namespace deepbf;

namespace {

RFCube random_raw(std::size_t n_depth, std::uint64_t seed) {
  const ProbeConfig p;
  std::vector<double> lines;
  for (int k = 0; k < p.n_te_focused; ++k) lines.push_back(p.scanline_x(k));
  RFCube c(n_depth, 64, 96, EventKind::FocusedTe, 2e-3, p.depth_step_m(), lines);
  Rng rng(seed);
  for (double& v : c.samples()) v = rng.normal();
  return c;
}

std::vector<RFCube> random_pw(std::size_t n_depth, const std::vector<double>& angles,
                              std::uint64_t seed) {
  const ProbeConfig p;
  Rng rng(seed);
  std::vector<RFCube> out;
  for (double a : angles) {
    RFCube c(n_depth, 192, 1, EventKind::PlaneWave, 2e-3, p.depth_step_m(), {a});
    for (double& v : c.samples()) v = rng.normal();
    out.push_back(std::move(c));
  }
  return out;
}

// Random data standing in for an aligned cube: every channel carries signal.
FocusedFrame random_frame(std::size_t n_depth, std::uint64_t seed) {
  FocusedFrame f;
  f.aligned = random_raw(n_depth, seed);
  f.target = analytic_columns(sum_aligned(f.aligned).rf_sum);
  return f;
}

double max_abs(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST(Factors, KeepForFactor) {
  const auto& ks = focused_keep_counts();
  EXPECT_EQ(keep_for_factor(1, 64, ks), 64);
  EXPECT_EQ(keep_for_factor(2, 64, ks), 32);
  EXPECT_EQ(keep_for_factor(2.7, 64, ks), 24);
  EXPECT_EQ(keep_for_factor(16, 64, ks), 4);
  EXPECT_THROW(keep_for_factor(3, 64, ks), Error);
  EXPECT_NE(eval_mask_seed(0, 0, 4), eval_mask_seed(0, 1, 4));
  EXPECT_EQ(eval_mask_seed(5, 2, 8), eval_mask_seed(5, 2, 8));
}

TEST(FocusedInput, ScaleReplicationAndMask) {
  const RFCube a = random_raw(10, 1);
  const std::size_t plane = 64 * 96;
  std::vector<double> out(3 * plane);
  const double s = assemble_focused_input(a, nullptr, 0, out.data());
  double peak = 0;
  for (std::size_t d : {0u, 1u})
    for (std::size_t r = 0; r < 64; ++r)
      for (std::size_t k = 0; k < 96; ++k) peak = std::max(peak, std::abs(a.at(d, r, k)));
  EXPECT_EQ(s, peak);
  EXPECT_NEAR(max_abs(out), 1.0, 1e-15);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t k = 0; k < 96; ++k) {
      EXPECT_EQ(out[r * 96 + k], out[plane + r * 96 + k]);
      EXPECT_EQ(out[2 * plane + r * 96 + k], a.at(1, r, k) * (1.0 / s));
    }
  const SamplingMask m = make_focused_mask(10, 64, 8, 3);
  assemble_focused_input(a, &m, 9, out.data());
  for (std::size_t p = 0; p < 3; ++p) {
    const std::size_t d = std::min<std::size_t>(8 + p, 9);
    for (std::size_t r = 0; r < 64; ++r)
      if (!m.active(d, r))
        for (std::size_t k = 0; k < 96; ++k) EXPECT_EQ(out[p * plane + r * 96 + k], 0.0);
  }
  EXPECT_THROW(assemble_focused_input(a, nullptr, 10, out.data()), Error);
  const SamplingMask short_mask = make_focused_mask(9, 64, 8, 3);
  EXPECT_THROW(assemble_focused_input(a, &short_mask, 0, out.data()), Error);
  const RFCube zero(5, 64, 96, EventKind::FocusedTe, 0, 1e-5, std::vector<double>(96, 0.0));
  EXPECT_EQ(assemble_focused_input(zero, nullptr, 2, out.data()), 1.0);
  EXPECT_EQ(max_abs(out), 0.0);
}

TEST(FocusedSource, FullRateSamplesMatchFrame) {
  const ProbeConfig p;
  FocusedFrame f = prepare_focused_frame(random_raw(12, 2), p);
  const FocusedFrame copy = f;
  FocusedSampleSource src({std::move(f)}, {64});
  src.select_planes(0, 0, 1);
  ASSERT_EQ(src.size(), 12u);
  EXPECT_EQ(src.input_shape(), (nn::Shape4{1, 3, 64, 96}));
  EXPECT_EQ(src.target_shape(), (nn::Shape4{1, 2, 1, 96}));
  std::vector<double> in(3 * 64 * 96), ref(in.size()), tgt(2 * 96);
  Rng rng(4);
  for (std::size_t d : {0u, 5u, 11u}) {
    src.load(d, rng, in.data(), tgt.data());
    const double s = assemble_focused_input(copy.aligned, nullptr, d, ref.data());
    EXPECT_EQ(in, ref);
    for (std::size_t k = 0; k < 96; ++k) {
      EXPECT_EQ(tgt[k], copy.target.i(d, k) * (1.0 / s));
      EXPECT_EQ(tgt[96 + k], copy.target.q(d, k) * (1.0 / s));
    }
  }
}

TEST(FocusedSource, CropWindowAndPlanes) {
  FocusedFrame f = random_frame(30, 3);
  const FocusedFrame copy = f;
  FocusedSampleSource src({std::move(f), copy}, {64});
  src.select_planes(5, 4, 9);
  EXPECT_EQ(src.size(), 10u);
  EXPECT_THROW(src.select_planes(1, 15, 9), Error);
  src.set_crop_width(16);
  EXPECT_EQ(src.input_shape(), (nn::Shape4{1, 3, 64, 16}));
  EXPECT_THROW(src.set_crop_width(97), Error);

  src.select_planes(0, 0, 1);
  std::vector<double> in(3 * 64 * 16), full(3 * 64 * 96), tgt(32);
  Rng rng(8);
  const std::size_t d = 7;
  src.load(d, rng, in.data(), tgt.data());
  const double s = assemble_focused_input(copy.aligned, nullptr, d, full.data());
  std::size_t x0 = 97;
  for (std::size_t c = 0; c + 16 <= 96 && x0 == 97; ++c)
    if (std::equal(in.begin(), in.begin() + 16, full.begin() + c)) x0 = c;
  ASSERT_LT(x0, 97u);
  for (std::size_t row = 0; row < 3 * 64; ++row)
    for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(in[row * 16 + k], full[row * 96 + x0 + k]);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(tgt[k], copy.target.i(d, x0 + k) * (1.0 / s));
}

TEST(FocusedSource, SubsampledLoadsKeepCentrePair) {
  FocusedSampleSource src({random_frame(8, 5)}, {4});
  src.select_planes(0, 0, 1);
  std::vector<double> in(3 * 64 * 96), tgt(2 * 96);
  Rng rng(1);
  src.load(3, rng, in.data(), tgt.data());
  for (std::size_t pl = 0; pl < 3; ++pl) {
    int rows = 0;
    for (std::size_t r = 0; r < 64; ++r) {
      const double* row = &in[(pl * 64 + r) * 96];
      if (std::any_of(row, row + 96, [](double v) { return v != 0.0; })) ++rows;
    }
    EXPECT_EQ(rows, 4);
    EXPECT_NE(in[(pl * 64 + 31) * 96], 0.0);
    EXPECT_NE(in[(pl * 64 + 32) * 96], 0.0);
  }
}

TEST(DeepbfFocused, ShapeBatchingAndZeroInput) {
  nn::Network net = nn::build_deepbf(nn::Variant::Focused, 4, 3);
  const RFCube a = random_raw(5, 6);
  const IQImage y = deepbf_focused(net, a, nullptr, 32);
  EXPECT_EQ(y.i.rows, 5u);
  EXPECT_EQ(y.i.cols, 96u);
  const IQImage y2 = deepbf_focused(net, a, nullptr, 2);
  EXPECT_EQ(y.i, y2.i);
  EXPECT_EQ(y.q, y2.q);
  const RFCube zero(4, 64, 96, EventKind::FocusedTe, 0, 1e-5, std::vector<double>(96, 0.0));
  const IQImage z = deepbf_focused(net, zero, nullptr);
  EXPECT_EQ(max_abs(z.i.data), 0.0);
  EXPECT_EQ(max_abs(z.q.data), 0.0);
  nn::Network pw = nn::build_deepbf(nn::Variant::Planewave, 4, 3);
  EXPECT_THROW(deepbf_focused(pw, a, nullptr), Error);
}

TEST(Planewave, SplitStackRoundTrip) {
  const auto cubes = random_pw(6, angle_set(3, 0.1), 1);
  const RFCube stacked = stack_angles(cubes);
  EXPECT_EQ(stacked.n_events(), 3u);
  const auto back = split_angles(stacked);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t a = 0; a < 3; ++a) {
    EXPECT_TRUE(std::ranges::equal(back[a].samples(), cubes[a].samples()));
    EXPECT_EQ(back[a].event_params(), cubes[a].event_params());
  }
  EXPECT_THROW(split_angles(random_raw(2, 1)), Error);
  EXPECT_THROW(stack_angles({}), Error);
  EXPECT_THROW(stack_angles({cubes[0], random_pw(5, {0.0}, 2)[0]}), Error);
}

TEST(Planewave, AngleImagesCompoundLikeDas) {
  const ProbeConfig p;
  const auto angles = angle_set(5, 0.1);
  const auto cubes = random_pw(12, angles, 3);
  const RFCube ai = planewave_angle_images(cubes, p, angles, nullptr);
  EXPECT_EQ(ai.n_rx(), 5u);
  EXPECT_EQ(ai.n_events(), 192u);
  for (int keep : {5, 3, 1}) {
    const SamplingMask s = make_pw_subset(5, keep);
    const Grid ours = compound_angle_images(ai, s);
    const Grid ref = das_planewave_compound(cubes, p, angles, s, nullptr).rf_sum;
    const double scale = max_abs(ref.data);
    for (std::size_t i = 0; i < ref.data.size(); ++i)
      EXPECT_NEAR(ours.data[i], ref.data[i], 1e-12 * scale);
  }
  const SamplingMask m = make_focused_mask(12, 192, 16, 4);
  const RFCube am = planewave_angle_images(cubes, p, angles, &m);
  const Grid ref = das_planewave_compound(cubes, p, angles, make_pw_subset(5, 5), &m).rf_sum;
  const Grid ours = compound_angle_images(am, make_pw_subset(5, 5));
  for (std::size_t i = 0; i < ref.data.size(); ++i)
    EXPECT_NEAR(ours.data[i], ref.data[i], 1e-12 * max_abs(ref.data));
  EXPECT_THROW(compound_angle_images(ai, make_pw_subset(7, 3)), Error);
}

TEST(Planewave, InputZeroesInactiveAngles) {
  const ProbeConfig p;
  const auto angles = angle_set(5, 0.1);
  const RFCube ai = planewave_angle_images(random_pw(8, angles, 5), p, angles, nullptr);
  const SamplingMask s = make_pw_subset(5, 3);
  std::vector<double> out(3 * 5 * 192);
  const double scale = assemble_planewave_input(ai, s, 4, out.data());
  EXPECT_GT(scale, 0.0);
  EXPECT_NEAR(max_abs(out), 1.0, 1e-15);
  for (std::size_t pl = 0; pl < 3; ++pl)
    for (std::size_t a = 0; a < 5; ++a)
      for (std::size_t j = 0; j < 192; ++j) {
        const double v = out[(pl * 5 + a) * 192 + j];
        if (!s.active(0, a))
          EXPECT_EQ(v, 0.0);
        else
          EXPECT_EQ(v, ai.at(3 + pl, a, j) * (1.0 / scale));
      }
}

TEST(Planewave, FrameVariantsAndSource) {
  const ProbeConfig p;
  const auto angles = angle_set(31, 15.0 * std::acos(-1.0) / 180.0);
  const PlanewaveFrame f = prepare_planewave_frame(stack_angles(random_pw(16, angles, 6)), p, angles, 1);
  const std::vector<std::string> labels{"full", "rx64", "rx32", "rx16", "rx8",
                                        "pw31", "pw11", "pw7",  "pw3"};
  EXPECT_EQ(f.labels, labels);
  EXPECT_EQ(f.target, compound_angle_images(f.images[0], make_pw_subset(31, 31)));
  // The angle schemes reuse the 64-channel images.
  EXPECT_EQ(f.variants[6].first, f.variants[1].first);
  EXPECT_EQ(f.variants[6].second.popcount(0), 11u);

  PlanewaveSampleSource src({f});
  src.select_planes(0, 1, 2);
  EXPECT_EQ(src.size(), 14u);
  EXPECT_EQ(src.input_shape(), (nn::Shape4{1, 3, 31, 192}));
  EXPECT_EQ(src.target_shape(), (nn::Shape4{1, 1, 1, 192}));

  const auto rows = evaluate_planewave({f}, {}, nullptr, p, 2e-3);
  ASSERT_EQ(rows.size(), labels.size());
  EXPECT_EQ(rows[0].factor, "full");
  EXPECT_TRUE(std::isinf(rows[0].psnr));
  EXPECT_EQ(rows[0].ssim, 1.0);
}

TEST(Evaluate, FocusedFactorOneIsReference) {
  const ProbeConfig p;
  const std::vector<FocusedFrame> frames{prepare_focused_frame(random_raw(24, 7), p)};
  FocusedEvalOptions opts;
  opts.keep_counts = focused_keep_counts();
  const auto rows = evaluate_focused(frames, {}, nullptr, p, opts);
  ASSERT_EQ(rows.size(), 6u);
  const std::vector<std::string> labels{"1", "2", "2.7", "4", "8", "16"};
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_EQ(rows[k].factor, labels[k]);
    EXPECT_EQ(rows[k].method, "das");
    EXPECT_FALSE(rows[k].has_roi_metrics);
  }
  EXPECT_TRUE(std::isinf(rows[0].psnr));
  EXPECT_EQ(rows[0].ssim, 1.0);
  for (std::size_t k = 1; k < 6; ++k) EXPECT_TRUE(std::isfinite(rows[k].psnr));

  nn::Network net = nn::build_deepbf(nn::Variant::Focused, 4, 1);
  opts.keep_counts = {64, 4};
  const auto with_net = evaluate_focused(frames, {}, &net, p, opts);
  ASSERT_EQ(with_net.size(), 4u);
  EXPECT_EQ(with_net[1].method, "deepbf");
  EXPECT_EQ(with_net[3].factor, "16");
  EXPECT_THROW(evaluate_focused({}, {}, nullptr, p, opts), Error);
  EXPECT_THROW(evaluate_focused(frames, {std::nullopt, std::nullopt}, nullptr, p, opts), Error);
}

TEST(Evaluate, RoiMetricsWhenGiven) {
  const ProbeConfig p;
  const std::vector<FocusedFrame> frames{prepare_focused_frame(random_raw(200, 8), p)};
  FocusedEvalOptions opts;
  opts.keep_counts = {64, 16};
  const CystRoiSpec roi{0.0, 2e-3 + 100 * p.depth_step_m(), 1e-3};
  const auto rows = evaluate_focused(frames, {roi}, nullptr, p, opts);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.has_roi_metrics);
    EXPECT_GE(r.gcnr, 0.0);
    EXPECT_LE(r.gcnr, 1.0);
  }
}
