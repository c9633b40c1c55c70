#include "deepbf/das.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>

#include "deepbf/sim.hpp"

namespace deepbf {

double rx_delay_focused(double depth_m, double rx_x_m, double line_x_m, double c) {
  const double dx = rx_x_m - line_x_m;
  return (depth_m + std::sqrt(depth_m * depth_m + dx * dx)) / c;
}

double rx_delay_planewave(double depth_m, double x_m, double rx_x_m, double angle_rad, double c) {
  const double dx = rx_x_m - x_m;
  return (depth_m * std::cos(angle_rad) + x_m * std::sin(angle_rad) +
          std::sqrt(depth_m * depth_m + dx * dx)) /
         c;
}

namespace {

void check_focused(const RFCube& raw, const ProbeConfig& probe) {
  if (raw.event_kind() != EventKind::FocusedTe) throw Error("das_focused needs a focused_te cube");
  if (raw.n_rx() != static_cast<std::size_t>(probe.n_rx_focused))
    throw Error("cube receive channels do not match probe.n_rx_focused");
}

void check_channel_mask(const SamplingMask* mask, std::size_t n_depth, std::size_t n_rx) {
  if (!mask) return;
  if (mask->kind != MaskKind::FocusedChannels) throw Error("expected a channel mask");
  if (mask->n_planes != n_depth || mask->width != n_rx)
    throw Error("channel mask geometry does not match the cube");
}

BeamformedLines make_lines(std::size_t n_depth, std::vector<double> lateral, double start,
                           double step) {
  BeamformedLines out;
  out.rf_sum = Grid(n_depth, lateral.size());
  out.lateral_m = std::move(lateral);
  out.depth_start_m = start;
  out.depth_step_m = step;
  return out;
}

// Delay to fractional sample position on the cube's time axis.
struct TimeAxis {
  double t0;
  double fs;
  double pos(double tau) const { return (tau - t0) * fs; }
};

TimeAxis time_axis(const RFCube& cube, const ProbeConfig& probe) {
  return {2.0 * cube.depth_start_m() / probe.sound_speed_m_s, probe.sampling_freq_hz};
}

std::vector<double> pw_lateral(const ProbeConfig& probe) {
  std::vector<double> x(static_cast<std::size_t>(probe.n_elements));
  for (int e = 0; e < probe.n_elements; ++e) x[e] = probe.element_x(e);
  return x;
}

void check_planewave(const std::vector<RFCube>& cubes, const ProbeConfig& probe,
                     const std::vector<double>& angles, const SamplingMask& pw_subset) {
  if (cubes.empty() || cubes.size() != angles.size())
    throw Error("need one plane-wave cube per angle");
  if (pw_subset.kind != MaskKind::PwAngles || pw_subset.width != angles.size())
    throw Error("pw_subset does not match the angle set");
  if (pw_subset.popcount(0) == 0) throw Error("empty plane-wave subset");
  for (const auto& c : cubes) {
    if (c.event_kind() != EventKind::PlaneWave || c.n_events() != 1)
      throw Error("plane-wave cubes must hold a single planewave_angle event");
    if (c.n_depth() != cubes[0].n_depth() || c.n_rx() != cubes[0].n_rx() ||
        c.depth_start_m() != cubes[0].depth_start_m())
      throw Error("plane-wave cubes do not share geometry");
  }
  if (cubes[0].n_rx() != static_cast<std::size_t>(probe.n_rx_planewave))
    throw Error("cube receive channels do not match probe.n_rx_planewave");
}

}  // namespace

RFCube align_focused(const RFCube& raw, const ProbeConfig& probe) {
  check_focused(raw, probe);
  RFCube out(raw.n_depth(), raw.n_rx(), raw.n_events(), EventKind::FocusedTe, raw.depth_start_m(),
             raw.depth_step_m(), raw.event_params());
  const TimeAxis axis = time_axis(raw, probe);
  const double c = probe.sound_speed_m_s;
  const std::size_t n_rx = raw.n_rx(), n_ev = raw.n_events(), stride = n_rx * n_ev;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n_ev); ++k) {
    const double line_x = raw.event_params()[k];
    const int e0 = probe.first_rx_element(static_cast<int>(k));
    for (std::size_t d = 0; d < raw.n_depth(); ++d) {
      const double z = raw.depth_start_m() + static_cast<double>(d) * raw.depth_step_m();
      for (std::size_t r = 0; r < n_rx; ++r) {
        const double rx_x = probe.element_x(e0 + static_cast<int>(r));
        const double pos = axis.pos(rx_delay_focused(z, rx_x, line_x, c));
        out.at(d, r, k) = sample_at(raw.ptr(0, r, k), stride, raw.n_depth(), pos);
      }
    }
  }
  return out;
}

BeamformedLines das_focused(const RFCube& raw, const ProbeConfig& probe, const SamplingMask* mask) {
  check_focused(raw, probe);
  check_channel_mask(mask, raw.n_depth(), raw.n_rx());
  auto out = make_lines(raw.n_depth(), raw.event_params(), raw.depth_start_m(), raw.depth_step_m());
  const TimeAxis axis = time_axis(raw, probe);
  const double c = probe.sound_speed_m_s;
  const std::size_t n_rx = raw.n_rx(), n_ev = raw.n_events(), stride = n_rx * n_ev;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(n_ev); ++k) {
    const double line_x = raw.event_params()[k];
    const int e0 = probe.first_rx_element(static_cast<int>(k));
    std::vector<double> rx_x(n_rx);
    for (std::size_t r = 0; r < n_rx; ++r) rx_x[r] = probe.element_x(e0 + static_cast<int>(r));
    for (std::size_t d = 0; d < raw.n_depth(); ++d) {
      const double z = raw.depth_start_m() + static_cast<double>(d) * raw.depth_step_m();
      double acc = 0.0;
      for (std::size_t r = 0; r < n_rx; ++r) {
        if (mask && !mask->active(d, r)) continue;
        const double pos = axis.pos(rx_delay_focused(z, rx_x[r], line_x, c));
        acc += sample_at(raw.ptr(0, r, k), stride, raw.n_depth(), pos);
      }
      out.rf_sum(d, k) = acc;
    }
  }
  return out;
}

BeamformedLines sum_aligned(const RFCube& aligned, const SamplingMask* mask) {
  check_channel_mask(mask, aligned.n_depth(), aligned.n_rx());
  auto out = make_lines(aligned.n_depth(), aligned.event_params(), aligned.depth_start_m(),
                        aligned.depth_step_m());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t d = 0; d < static_cast<std::ptrdiff_t>(aligned.n_depth()); ++d)
    for (std::size_t k = 0; k < aligned.n_events(); ++k) {
      double acc = 0.0;
      for (std::size_t r = 0; r < aligned.n_rx(); ++r) {
        if (mask && !mask->active(d, r)) continue;
        acc += aligned.at(d, r, k);
      }
      out.rf_sum(d, k) = acc;
    }
  return out;
}

BeamformedLines das_planewave_compound(const std::vector<RFCube>& cubes, const ProbeConfig& probe,
                                       const std::vector<double>& angles,
                                       const SamplingMask& pw_subset,
                                       const SamplingMask* channel_mask) {
  check_planewave(cubes, probe, angles, pw_subset);
  const RFCube& ref = cubes[0];
  check_channel_mask(channel_mask, ref.n_depth(), ref.n_rx());
  auto out = make_lines(ref.n_depth(), pw_lateral(probe), ref.depth_start_m(), ref.depth_step_m());
  const TimeAxis axis = time_axis(ref, probe);
  const double c = probe.sound_speed_m_s;
  const std::size_t n_rx = ref.n_rx(), n_depth = ref.n_depth();
  const std::vector<int> active_angles = pw_subset.active_indices(0);
  std::vector<double> rx_x(n_rx);
  for (std::size_t r = 0; r < n_rx; ++r)
    rx_x[r] = probe.element_x(planewave_rx_element(probe, static_cast<int>(r)));

  std::vector<double> cos_a(angles.size()), sin_a(angles.size());
  for (std::size_t a = 0; a < angles.size(); ++a) {
    cos_a[a] = std::cos(angles[a]);
    sin_a[a] = std::sin(angles[a]);
  }

#pragma omp parallel
  {
    // Same operation order as rx_delay_planewave, with the per-angle trig and
    // the receive path hoisted out of the angle loop.
    std::vector<double> rx_path(n_rx), pos(n_rx);
#pragma omp for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(out.n_lateral()); ++j) {
      const double x = out.lateral_m[j];
      for (std::size_t d = 0; d < n_depth; ++d) {
        const double z = ref.depth_start_m() + static_cast<double>(d) * ref.depth_step_m();
        for (std::size_t r = 0; r < n_rx; ++r) {
          const double dx = rx_x[r] - x;
          rx_path[r] = std::sqrt(z * z + dx * dx);
        }
        double acc = 0.0;
        for (int a : active_angles) {
          const RFCube& cube = cubes[a];
          const double tx_path = z * cos_a[a] + x * sin_a[a];
          for (std::size_t r = 0; r < n_rx; ++r) pos[r] = axis.pos((tx_path + rx_path[r]) / c);
          double angle_sum = 0.0;
          for (std::size_t r = 0; r < n_rx; ++r) {
            if (channel_mask && !channel_mask->active(d, r)) continue;
            angle_sum += sample_at(cube.ptr(0, r, 0), n_rx, n_depth, pos[r]);
          }
          acc += angle_sum;
        }
        out.rf_sum(d, j) = acc;
      }
    }
  }
  return out;
}

namespace {

// FFTW's planner is not re-entrant; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class HilbertPlan {
 public:
  explicit HilbertPlan(std::size_t n) : n_(n) {
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    std::lock_guard lock(planner_mutex());
    fwd_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_1d(static_cast<int>(n), buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~HilbertPlan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(buf_);
  }
  HilbertPlan(const HilbertPlan&) = delete;
  HilbertPlan& operator=(const HilbertPlan&) = delete;

  // Writes the quadrature component of x into q.
  void run(std::span<const double> x, std::span<double> q) {
    const std::size_t n = n_;
    for (std::size_t k = 0; k < n; ++k) {
      buf_[k][0] = x[k];
      buf_[k][1] = 0.0;
    }
    fftw_execute(fwd_);
    // Keep DC (and Nyquist for even n), double positive, zero negative frequencies.
    const std::size_t pos_end = (n % 2 == 0) ? n / 2 : (n + 1) / 2;
    for (std::size_t k = 1; k < pos_end; ++k) {
      buf_[k][0] *= 2.0;
      buf_[k][1] *= 2.0;
    }
    for (std::size_t k = (n % 2 == 0) ? n / 2 + 1 : pos_end; k < n; ++k) buf_[k][0] = buf_[k][1] = 0.0;
    fftw_execute(inv_);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) q[k] = buf_[k][1] * scale;
  }

 private:
  std::size_t n_;
  fftw_complex* buf_ = nullptr;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

}  // namespace

IQLine hilbert_analytic(std::span<const double> signal) {
  if (signal.size() < 2) throw Error("hilbert_analytic needs at least 2 samples");
  IQLine out;
  out.i_component.assign(signal.begin(), signal.end());
  out.q_component.resize(signal.size());
  HilbertPlan plan(signal.size());
  plan.run(signal, out.q_component);
  return out;
}

IQImage analytic_columns(const Grid& rf) {
  if (rf.rows < 2) throw Error("analytic_columns needs at least 2 rows");
  IQImage out{rf, Grid(rf.rows, rf.cols)};
#pragma omp parallel
  {
    HilbertPlan plan(rf.rows);
    std::vector<double> col(rf.rows), q(rf.rows);
#pragma omp for schedule(static)
    for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(rf.cols); ++c) {
      for (std::size_t r = 0; r < rf.rows; ++r) col[r] = rf(r, c);
      plan.run(col, q);
      for (std::size_t r = 0; r < rf.rows; ++r) out.q(r, c) = q[r];
    }
  }
  return out;
}

Grid envelope(const IQImage& iq) {
  if (iq.i.rows != iq.q.rows || iq.i.cols != iq.q.cols) throw Error("I and Q shapes differ");
  Grid env(iq.i.rows, iq.i.cols);
  for (std::size_t k = 0; k < env.data.size(); ++k)
    env.data[k] = std::sqrt(iq.i.data[k] * iq.i.data[k] + iq.q.data[k] * iq.q.data[k]);
  return env;
}

BModeImage log_compress(const Grid& env, double dynamic_range_db) {
  if (!(dynamic_range_db > 0)) throw Error("dynamic range must be > 0");
  BModeImage img;
  img.dynamic_range_db = dynamic_range_db;
  img.pixels_db = Grid(env.rows, env.cols, -dynamic_range_db);
  const double peak = env.data.empty() ? 0.0 : *std::max_element(env.data.begin(), env.data.end());
  if (!(peak > 0)) {
    img.all_zero_input = true;
    return img;
  }
  for (std::size_t k = 0; k < env.data.size(); ++k) {
    const double ratio = env.data[k] / peak;
    const double db = ratio > 0 ? 20.0 * std::log10(ratio) : -dynamic_range_db;
    img.pixels_db.data[k] = std::clamp(db, -dynamic_range_db, 0.0);
  }
  return img;
}

BModeImage envelope_log_compress(const BeamformedLines& lines, double dynamic_range_db) {
  return log_compress(envelope(analytic_columns(lines.rf_sum)), dynamic_range_db);
}

BModeImage envelope_log_compress(const IQImage& iq, double dynamic_range_db) {
  return log_compress(envelope(iq), dynamic_range_db);
}

}  // namespace deepbf
