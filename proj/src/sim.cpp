#include "deepbf/sim.hpp"

#include <cmath>
#include <numbers>

#include "deepbf/rng.hpp"

namespace deepbf {

void Phantom::validate() const {
  if (!(extent.area() > 0)) throw Error("phantom extent has zero area");
  for (const auto& s : scatterers) {
    if (!std::isfinite(s.reflectivity)) throw Error("scatterer reflectivity is not finite");
    if (!extent.contains(s.x_m, s.z_m)) throw Error("scatterer lies outside the phantom extent");
  }
  for (const auto& c : cysts)
    if (!(c.radius_m > 0)) throw Error("cyst radius must be > 0");
}

void Pulse::validate() const {
  if (!(center_freq_hz > 0)) throw Error("pulse center frequency must be > 0");
  if (!(fractional_bandwidth > 0 && fractional_bandwidth < 2))
    throw Error("pulse fractional bandwidth must lie in (0, 2)");
  if (!(cutoff_sigmas > 0)) throw Error("pulse cutoff must be > 0");
}

double Pulse::sigma_s() const {
  // Amplitude spectrum exp(-(2 pi sigma df)^2 / 2) falls to one half at df = B / 2.
  const double bandwidth = fractional_bandwidth * center_freq_hz;
  return std::sqrt(2.0 * std::numbers::ln2) / (std::numbers::pi * bandwidth);
}

double Pulse::operator()(double t) const {
  const double s = sigma_s();
  if (std::abs(t) > cutoff_sigmas * s) return 0.0;
  return std::exp(-0.5 * t * t / (s * s)) * std::cos(2.0 * std::numbers::pi * center_freq_hz * t);
}

Phantom make_cyst_phantom(const Extent& extent, double density, const std::vector<Cyst>& cysts,
                          std::uint64_t rng_seed) {
  if (!(extent.area() > 0)) throw Error("phantom extent has zero area");
  if (!(density > 0)) throw Error("scatterer density must be > 0");
  for (const auto& c : cysts)
    if (!(c.radius_m > 0)) throw Error("cyst radius must be > 0");

  Phantom ph;
  ph.extent = extent;
  ph.cysts = cysts;
  const auto count = static_cast<std::size_t>(std::llround(density * extent.area()));
  ph.scatterers.reserve(count);
  Rng rng(rng_seed);
  for (std::size_t i = 0; i < count; ++i) {
    Scatterer s;
    s.x_m = rng.uniform(extent.x_min_m, extent.x_max_m);
    s.z_m = rng.uniform(extent.z_min_m, extent.z_max_m);
    // Rayleigh magnitude, sigma = 1.
    s.reflectivity = std::sqrt(-2.0 * std::log(1.0 - rng.uniform()));
    bool keep = true;
    for (const auto& c : cysts) {
      if (!c.contains(s.x_m, s.z_m)) continue;
      if (c.interior_reflectivity_scale == 0.0) {
        keep = false;
        break;
      }
      s.reflectivity *= c.interior_reflectivity_scale;
    }
    if (keep) ph.scatterers.push_back(s);
  }
  return ph;
}

Phantom make_point_phantom(const Extent& extent, double x_m, double z_m, double reflectivity) {
  Phantom ph;
  ph.extent = extent;
  ph.scatterers.push_back({x_m, z_m, reflectivity});
  ph.validate();
  return ph;
}

namespace {

void check_inputs(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse,
                  std::size_t n_depth) {
  probe.validate();
  pulse.validate();
  if (n_depth == 0) throw Error("n_depth must be > 0");
  for (const auto& s : phantom.scatterers)
    if (!(s.z_m > 0)) throw Error("scatterer at or behind the transducer face (z <= 0)");
}

// Adds amplitude * pulse(t - tau) to one channel sampled at t_i = t0 + i / fs.
// `column` points at sample 0 of the channel; consecutive samples are `stride` apart.
void deposit(double* column, std::size_t stride, std::size_t n_depth, double tau, double t0,
             double fs, double amplitude, const Pulse& pulse) {
  const double center = (tau - t0) * fs;
  const double half = pulse.half_duration_s() * fs;
  const auto lo = static_cast<std::ptrdiff_t>(std::ceil(center - half));
  const auto hi = static_cast<std::ptrdiff_t>(std::floor(center + half));
  const auto n = static_cast<std::ptrdiff_t>(n_depth);
  for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(lo, 0); i <= std::min(hi, n - 1); ++i)
    column[static_cast<std::size_t>(i) * stride] += amplitude * pulse((i - center) / fs);
}

// Writes event `event` of `out` for a focused scan line.
void focused_event(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse, int te,
                   RFCube& out, std::size_t event) {
  const double c = probe.sound_speed_m_s;
  const double fs = probe.sampling_freq_hz;
  const double t0 = 2.0 * out.depth_start_m() / c;
  const double line_x = probe.scanline_x(te);
  const int e0 = probe.first_rx_element(te);
  const std::size_t stride = out.n_rx() * out.n_events();
  for (std::size_t r = 0; r < out.n_rx(); ++r) {
    const int e = e0 + static_cast<int>(r);
    if (e < 0 || e >= probe.n_elements) continue;
    const double rx_x = probe.element_x(e);
    double* column = &out.at(0, r, event);
    for (const auto& s : phantom.scatterers) {
      const double d_tx = std::hypot(s.x_m - line_x, s.z_m);
      const double d_rx = std::hypot(s.x_m - rx_x, s.z_m);
      deposit(column, stride, out.n_depth(), (d_tx + d_rx) / c, t0, fs,
              s.reflectivity / (d_tx * d_rx), pulse);
    }
  }
}

void planewave_event(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse,
                     double angle, RFCube& out) {
  const double c = probe.sound_speed_m_s;
  const double fs = probe.sampling_freq_hz;
  const double t0 = 2.0 * out.depth_start_m() / c;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const std::size_t stride = out.n_rx();
  for (std::size_t r = 0; r < out.n_rx(); ++r) {
    const double rx_x = probe.element_x(planewave_rx_element(probe, static_cast<int>(r)));
    double* column = &out.at(0, r, 0);
    for (const auto& s : phantom.scatterers) {
      const double tx_path = s.z_m * ca + s.x_m * sa;
      const double d_rx = std::hypot(s.x_m - rx_x, s.z_m);
      // Spreading uses depth as the transmit distance; tx_path can be negative off-axis.
      deposit(column, stride, out.n_depth(), (tx_path + d_rx) / c, t0, fs,
              s.reflectivity / (s.z_m * d_rx), pulse);
    }
  }
}

}  // namespace

RFCube simulate_focused_rf(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse,
                           int te_index, std::size_t n_depth, double depth_start_m) {
  check_inputs(phantom, probe, pulse, n_depth);
  if (te_index < 0 || te_index >= probe.n_te_focused) throw Error("te_index out of range");
  RFCube out(n_depth, static_cast<std::size_t>(probe.n_rx_focused), 1, EventKind::FocusedTe,
             depth_start_m, probe.depth_step_m(), {probe.scanline_x(te_index)});
  focused_event(phantom, probe, pulse, te_index, out, 0);
  return out;
}

RFCube simulate_focused_frame(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse,
                              std::size_t n_depth, double depth_start_m) {
  check_inputs(phantom, probe, pulse, n_depth);
  std::vector<double> lines(static_cast<std::size_t>(probe.n_te_focused));
  for (int k = 0; k < probe.n_te_focused; ++k) lines[k] = probe.scanline_x(k);
  RFCube out(n_depth, static_cast<std::size_t>(probe.n_rx_focused), lines.size(),
             EventKind::FocusedTe, depth_start_m, probe.depth_step_m(), lines);
#pragma omp parallel for schedule(dynamic)
  for (int k = 0; k < probe.n_te_focused; ++k)
    focused_event(phantom, probe, pulse, k, out, static_cast<std::size_t>(k));
  return out;
}

RFCube simulate_planewave_rf(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse,
                             double angle_rad, std::size_t n_depth, double depth_start_m) {
  check_inputs(phantom, probe, pulse, n_depth);
  if (!(std::abs(angle_rad) < std::numbers::pi / 4)) throw Error("|angle| must be < pi/4");
  RFCube out(n_depth, static_cast<std::size_t>(probe.n_rx_planewave), 1, EventKind::PlaneWave,
             depth_start_m, probe.depth_step_m(), {angle_rad});
  planewave_event(phantom, probe, pulse, angle_rad, out);
  return out;
}

std::vector<RFCube> simulate_planewave_frame(const Phantom& phantom, const ProbeConfig& probe,
                                             const Pulse& pulse, const std::vector<double>& angles,
                                             std::size_t n_depth, double depth_start_m) {
  check_inputs(phantom, probe, pulse, n_depth);
  std::vector<RFCube> cubes(angles.size());
  for (std::size_t a = 0; a < angles.size(); ++a) {
    if (!(std::abs(angles[a]) < std::numbers::pi / 4)) throw Error("|angle| must be < pi/4");
    cubes[a] = RFCube(n_depth, static_cast<std::size_t>(probe.n_rx_planewave), 1,
                      EventKind::PlaneWave, depth_start_m, probe.depth_step_m(), {angles[a]});
  }
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t a = 0; a < static_cast<std::ptrdiff_t>(angles.size()); ++a)
    planewave_event(phantom, probe, pulse, angles[a], cubes[a]);
  return cubes;
}

std::vector<double> angle_set(int n_pw, double max_angle_rad) {
  if (n_pw < 1) throw Error("angle_set requires n_pw >= 1");
  if (n_pw == 1) return {0.0};
  std::vector<double> angles(static_cast<std::size_t>(n_pw));
  const double step = 2.0 * max_angle_rad / (n_pw - 1);
  for (int i = 0; i < n_pw; ++i) angles[i] = -max_angle_rad + i * step;
  if (n_pw % 2 == 1) angles[n_pw / 2] = 0.0;
  return angles;
}

int planewave_rx_element(const ProbeConfig& probe, int r) {
  return (probe.n_elements - probe.n_rx_planewave) / 2 + r;
}

void add_white_noise(RFCube& cube, double snr_db, std::uint64_t rng_seed) {
  double energy = 0.0;
  for (double v : cube.samples()) energy += v * v;
  const double rms = std::sqrt(energy / static_cast<double>(cube.samples().size()));
  const double sigma = rms / std::pow(10.0, snr_db / 20.0);
  Rng rng(rng_seed);
  for (double& v : cube.samples()) v += sigma * rng.normal();
}

}  // namespace deepbf
