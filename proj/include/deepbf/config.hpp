// Run configuration: a flat `key = value` text file. Every key has a default,
// so an empty file describes the full-size setup. Lines starting with '#' are
// comments. Lists are comma separated.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "deepbf/core.hpp"
#include "deepbf/nn/network.hpp"
#include "deepbf/nn/train.hpp"
#include "deepbf/sim.hpp"

namespace deepbf {

struct PhantomSettings {
  double lateral_min_m = -19.2e-3;
  double lateral_max_m = 19.2e-3;
  /// Scatterers also fill this much depth above and below the imaged window.
  double depth_margin_m = 1e-3;
  double density_per_m2 = 20e6;
  int cyst_count = 1;
  double cyst_radius_m = 1.5e-3;
  double cyst_scale = 0.0;
};

struct SimSettings {
  nn::Variant mode = nn::Variant::Focused;
  std::size_t n_depth = 1024;
  double depth_start_m = 5e-3;
  double pw_max_angle_deg = 15.0;
  /// Additive white noise SNR; <= 0 disables noise.
  double noise_snr_db = 0.0;
  std::size_t n_train = 8;
  std::size_t n_val = 1;
  std::size_t n_test = 2;
};

struct ModelSettings {
  std::size_t width_base = 32;
  /// Depth planes sampled per training frame; 0 uses every plane.
  std::size_t planes_per_frame = 0;
  /// Focused training windows of this many adjacent scan lines; 0 = whole planes.
  std::size_t crop_width = 0;
  /// 0 trains one model over all rates; otherwise only this factor.
  double factor = 0.0;
};

struct EvalSettings {
  std::vector<double> factors{1.0, 2.0, 2.7, 4.0, 8.0, 16.0};
  double dynamic_range_db = 60.0;
  std::size_t batch_size = 32;
  /// Score CNR / GCNR on each frame's first cyst.
  bool use_roi = true;
};

struct Config {
  std::uint64_t seed = 0;
  ProbeConfig probe;
  Pulse pulse;
  PhantomSettings phantom;
  SimSettings sim;
  ModelSettings model;
  nn::TrainConfig train;
  EvalSettings eval;

  /// Field-qualified errors, e.g. "sim.n_depth: must be > 0".
  void validate() const;
};

/// Applies `key = value` lines over the defaults. Errors name the line and key.
Config parse_config(const std::string& text, const std::string& source = "config");
Config load_config(const std::filesystem::path& path);

/// Sets one key from its text value (same parser as the file format).
void set_config_value(Config& cfg, const std::string& key, const std::string& value);

/// Every key with its current value, in schema order.
std::vector<std::pair<std::string, std::string>> config_entries(const Config& cfg);
std::string render_config(const Config& cfg);

}  // namespace deepbf
