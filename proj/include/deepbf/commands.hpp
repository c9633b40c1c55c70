// The command-line workflows as library calls: simulate a dataset, build
// masks, beamform, train, evaluate, benchmark and render.
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "deepbf/config.hpp"
#include "deepbf/io.hpp"
#include "deepbf/pipeline.hpp"

namespace deepbf::commands {

namespace fs = std::filesystem;

inline constexpr const char* kManifestName = "manifest.json";

/// Random cyst placement for one frame: centres fully inside the imaged
/// window with room for the background annulus.
std::vector<Cyst> place_cysts(const Config& cfg, std::uint64_t frame_seed);

/// Simulates n_train + n_val + n_test frames into out_dir (one RF blob per
/// frame plus manifest.json). Deterministic in cfg.seed.
io::DatasetManifest simulate(const Config& cfg, const fs::path& out_dir);

/// Factor -> acquisition scheme for a dataset. Focused: receive channels
/// kept. Planewave: angle factors 31/{11,7,3} select angle subsets (with a
/// 64-channel receive mask); 192/{64,32,16,8} select channel counts.
struct Scheme {
  bool planewave = false;
  int n_channels = 0;  // receive channels kept
  int n_angles = 0;    // plane-wave angles kept (planewave only)
  std::string label;   // "4" for focused, "rx16" / "pw7" for planewave
};
Scheme scheme_for_factor(const io::DatasetManifest& m, double factor);

/// Writes the mask for `factor` to `out`; registers it in the manifest when
/// `out` lies inside the dataset directory.
SamplingMask make_mask(const fs::path& dataset, double factor, std::uint64_t seed, const fs::path& out);

struct BeamformOptions {
  fs::path dataset;
  std::string method = "das";  // das | deepbf
  double factor = 1.0;
  std::uint64_t seed = 0;
  std::optional<fs::path> checkpoint;
  /// Focused mode only: use this mask instead of drawing one from `seed`.
  std::optional<fs::path> mask;
  fs::path out_dir;
  double dynamic_range_db = 60.0;
  bool use_roi = true;
  /// "test" (default), "train", "val" or "all".
  std::string split = "test";
  std::size_t batch_size = 32;
};

/// Writes frame_<i>_<method>_x<label>.pgm / .db per frame and appends one
/// metric row per frame to out_dir/metrics.csv. Returns those rows.
std::vector<MetricRow> beamform(const BeamformOptions& opts, std::ostream* log = nullptr);

struct TrainOptions {
  fs::path dataset;
  Config cfg;
  std::optional<nn::Variant> variant;  // defaults to the dataset's mode
  std::optional<int> epochs;
  fs::path out_checkpoint;
  /// Defaults to <checkpoint>.loss.csv.
  std::optional<fs::path> loss_csv;
};

/// Trains on the train split (validating on val when present). The
/// checkpoint is rewritten after every epoch, so a divergence leaves the last
/// good one on disk.
nn::TrainResult train(const TrainOptions& opts, std::ostream* log = nullptr);

struct EvalOptions {
  fs::path dataset;
  std::optional<fs::path> checkpoint;  // DAS rows only without one
  std::vector<double> factors{1.0, 2.0, 2.7, 4.0, 8.0, 16.0};
  std::uint64_t seed = 0;
  bool use_roi = true;
  double dynamic_range_db = 60.0;
  std::size_t batch_size = 32;
  std::optional<fs::path> out_csv;
};

/// Per (factor, method) means over the test split.
std::vector<MetricRow> evaluate(const EvalOptions& opts, std::ostream* log = nullptr);

struct LatencyStats {
  std::size_t planes = 0;
  double mean_ms = 0, median_ms = 0, p95_ms = 0;
};

struct BenchReport {
  LatencyStats single;   // one depth plane per forward call
  LatencyStats batched;  // per-plane time when `batch` planes share a call
  std::size_t batch = 0;
};

/// Eval-mode inference timing over >= n_planes depth planes of the first frame.
BenchReport bench(const fs::path& dataset, const fs::path& checkpoint, std::size_t n_planes = 128,
                  std::size_t batch = 32);
std::string format_bench(const BenchReport& r);

/// .db image -> PGM.
void render(const fs::path& db_image, const fs::path& out_pgm);

}  // namespace deepbf::commands
