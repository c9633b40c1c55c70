// Point-scatterer RF channel simulator for focused scan lines and steered plane waves.
//
// Propagation assumes a homogeneous medium with constant sound speed and
// single scattering. Each scatterer contributes reflectivity * p(t - tau) to
// every receive channel, scaled by 1 / (d_tx * d_rx) geometric spreading.
#pragma once

#include <cstdint>
#include <vector>

#include "deepbf/core.hpp"

namespace deepbf {

struct Extent {
  double x_min_m = 0.0;
  double x_max_m = 0.0;
  double z_min_m = 0.0;
  double z_max_m = 0.0;

  double area() const { return (x_max_m - x_min_m) * (z_max_m - z_min_m); }
  bool contains(double x, double z) const {
    return x >= x_min_m && x <= x_max_m && z >= z_min_m && z <= z_max_m;
  }
  bool operator==(const Extent&) const = default;
};

struct Scatterer {
  double x_m = 0.0;
  double z_m = 0.0;
  double reflectivity = 0.0;
  bool operator==(const Scatterer&) const = default;
};

struct Cyst {
  double center_x_m = 0.0;
  double center_z_m = 0.0;
  double radius_m = 0.0;
  /// 0 makes the cyst anechoic; scatterers inside are removed.
  double interior_reflectivity_scale = 0.0;

  bool contains(double x, double z) const {
    const double dx = x - center_x_m, dz = z - center_z_m;
    return dx * dx + dz * dz <= radius_m * radius_m;
  }
  bool operator==(const Cyst&) const = default;
};

struct Phantom {
  Extent extent;
  std::vector<Scatterer> scatterers;
  std::vector<Cyst> cysts;

  void validate() const;
  bool operator==(const Phantom&) const = default;
};

/// Gaussian-enveloped cosine. The envelope width follows from the -6 dB
/// fractional bandwidth of the spectrum.
struct Pulse {
  double center_freq_hz = 8.48e6;
  double fractional_bandwidth = 0.6;
  double cutoff_sigmas = 3.0;

  static Pulse for_probe(const ProbeConfig& probe) { return Pulse{probe.carrier_freq_hz}; }

  void validate() const;
  /// Standard deviation of the Gaussian envelope, seconds.
  double sigma_s() const;
  double half_duration_s() const { return cutoff_sigmas * sigma_s(); }
  /// Pulse value at time t relative to its peak; zero beyond the cutoff.
  double operator()(double t) const;
};

/// round(density * area) uniformly placed scatterers with Rayleigh (sigma = 1)
/// reflectivity; cysts scale or remove the scatterers they contain.
Phantom make_cyst_phantom(const Extent& extent, double scatterer_density_per_m2,
                          const std::vector<Cyst>& cysts, std::uint64_t rng_seed);

/// Single-scatterer phantom, handy for point-spread tests.
Phantom make_point_phantom(const Extent& extent, double x_m, double z_m, double reflectivity = 1.0);

/// Focused transmit event te_index: returns [n_depth x n_rx_focused x 1].
/// Transmit is modelled as a line source at the scan-line position on the
/// array face; absent elements (aperture overhanging the array) record zero.
RFCube simulate_focused_rf(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse,
                           int te_index, std::size_t n_depth, double depth_start_m = 0.0);

/// All n_te_focused events: [n_depth x n_rx_focused x n_te_focused]. Events run in parallel.
RFCube simulate_focused_frame(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse,
                              std::size_t n_depth, double depth_start_m = 0.0);

/// Steered plane wave: returns [n_depth x n_rx_planewave x 1]. Time zero is
/// when the wavefront crosses the array centre.
RFCube simulate_planewave_rf(const Phantom& phantom, const ProbeConfig& probe, const Pulse& pulse,
                             double angle_rad, std::size_t n_depth, double depth_start_m = 0.0);

/// One cube per angle, simulated in parallel.
std::vector<RFCube> simulate_planewave_frame(const Phantom& phantom, const ProbeConfig& probe,
                                             const Pulse& pulse, const std::vector<double>& angles,
                                             std::size_t n_depth, double depth_start_m = 0.0);

/// n_pw angles evenly spaced on [-max_angle, +max_angle].
std::vector<double> angle_set(int n_pw, double max_angle_rad);

/// Element index of plane-wave receive channel r.
int planewave_rx_element(const ProbeConfig& probe, int r);

/// Adds white Gaussian noise at the given SNR relative to the cube's RMS.
void add_white_noise(RFCube& cube, double snr_db, std::uint64_t rng_seed);

}  // namespace deepbf
