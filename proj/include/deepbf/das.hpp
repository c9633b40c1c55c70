// Delay-and-sum beamforming for focused scan lines and plane-wave compounding,
// plus the shared back end: analytic signal, envelope and log compression.
//
// Delays assume a constant sound speed with t = 0 at transmit firing. Channel
// samples are read at fractional delays by linear interpolation; a delay that
// falls outside the recorded window contributes zero. Apodization is
// rectangular.
#pragma once

#include <span>
#include <vector>

#include "deepbf/core.hpp"
#include "deepbf/subsample.hpp"

namespace deepbf {

/// Beamformed RF before envelope detection.
struct BeamformedLines {
  Grid rf_sum;                    // [n_depth x n_lateral]
  std::vector<double> lateral_m;  // one entry per column
  double depth_start_m = 0.0;
  double depth_step_m = 0.0;

  std::size_t n_depth() const { return rf_sum.rows; }
  std::size_t n_lateral() const { return rf_sum.cols; }
};

/// Two-way time of flight for dynamic receive focusing on a scan line.
double rx_delay_focused(double depth_m, double rx_x_m, double line_x_m, double c);

/// Two-way time of flight for a plane wave steered by angle_rad, pixel (x, depth).
double rx_delay_planewave(double depth_m, double x_m, double rx_x_m, double angle_rad, double c);

/// Linear interpolation of a strided channel at fractional sample position;
/// zero outside [0, n - 1].
inline double sample_at(const double* column, std::size_t stride, std::size_t n, double pos) {
  if (!(pos >= 0.0)) return 0.0;
  const auto i0 = static_cast<std::size_t>(pos);
  if (i0 + 1 >= n) return i0 + 1 == n && pos == static_cast<double>(i0) ? column[i0 * stride] : 0.0;
  const double frac = pos - static_cast<double>(i0);
  const double a = column[i0 * stride];
  const double b = column[(i0 + 1) * stride];
  return a + frac * (b - a);
}

/// Receive-delayed channel data, not yet summed: out(d, r, k) is channel r of
/// scan line k read at the focusing delay of depth sample d. This is the
/// Depth-Rx-TE cube the learned beamformer consumes.
RFCube align_focused(const RFCube& raw, const ProbeConfig& probe);

/// Focused DAS. When given, mask row d selects the channels summed for output
/// depth d; other channels contribute zero.
BeamformedLines das_focused(const RFCube& raw, const ProbeConfig& probe,
                            const SamplingMask* mask = nullptr);

/// Channel sum of an aligned cube; equals das_focused on the raw cube bitwise.
BeamformedLines sum_aligned(const RFCube& aligned, const SamplingMask* mask = nullptr);

/// Plane-wave compounding on the element grid. `cubes[a]` is the acquisition at
/// `angles[a]`; only angles active in pw_subset are summed (coherently, before
/// envelope detection), in ascending angle order.
BeamformedLines das_planewave_compound(const std::vector<RFCube>& cubes, const ProbeConfig& probe,
                                       const std::vector<double>& angles,
                                       const SamplingMask& pw_subset,
                                       const SamplingMask* channel_mask = nullptr);

/// FFT analytic signal. I equals the input; Q is its Hilbert transform.
IQLine hilbert_analytic(std::span<const double> signal);

struct IQImage {
  Grid i;
  Grid q;
};

/// Analytic signal of every column (along depth).
IQImage analytic_columns(const Grid& rf);

Grid envelope(const IQImage& iq);

/// 20 log10(env / max env), clamped to [-dynamic_range_db, 0].
BModeImage log_compress(const Grid& env, double dynamic_range_db = 60.0);

BModeImage envelope_log_compress(const BeamformedLines& lines, double dynamic_range_db = 60.0);
BModeImage envelope_log_compress(const IQImage& iq, double dynamic_range_db = 60.0);

/// Single-threaded reference kernels kept for testing the parallel ones.
namespace serial {
BeamformedLines das_focused(const RFCube& raw, const ProbeConfig& probe,
                            const SamplingMask* mask = nullptr);
BeamformedLines das_planewave_compound(const std::vector<RFCube>& cubes, const ProbeConfig& probe,
                                       const std::vector<double>& angles,
                                       const SamplingMask& pw_subset,
                                       const SamplingMask* channel_mask = nullptr);
}  // namespace serial

}  // namespace deepbf
