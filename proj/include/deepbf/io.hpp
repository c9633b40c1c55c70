// On-disk artifacts: RF blobs, dataset manifests, mask files, checkpoints,
// images and CSV reports.
//
// RF blob        : little-endian float32, C order [depth][rx][event]; shape and
//                  axis metadata live in the manifest.
// Mask file      : "DBFMASK1", u8 kind, u64 n_planes, u64 width, i32 n_keep,
//                  u64 rng_seed, then the bits packed LSB-first per byte,
//                  row-major [plane][index], last byte zero-padded.
// Checkpoint     : see docs in README ("Checkpoint layout").
// Image (.db)    : "DBFIMG01", u64 rows, u64 cols, f64 dynamic range,
//                  u8 all-zero flag, then rows*cols f64 dB values.
// All integers and floats are little-endian.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "deepbf/core.hpp"
#include "deepbf/nn/network.hpp"
#include "deepbf/nn/train.hpp"
#include "deepbf/pipeline.hpp"
#include "deepbf/sim.hpp"
#include "deepbf/subsample.hpp"

namespace deepbf::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// RF blobs

/// Writes the cube samples as float32. Values are rounded to single precision.
void write_rf_blob(const fs::path& path, const RFCube& cube);

struct CubeHeader {
  std::size_t n_depth = 0;
  std::size_t n_rx = 0;
  std::size_t n_events = 0;
  EventKind kind = EventKind::FocusedTe;
  double depth_start_m = 0.0;
  double depth_step_m = 0.0;
  std::vector<double> event_params;

  std::uint64_t byte_length() const { return 4ull * n_depth * n_rx * n_events; }
  bool operator==(const CubeHeader&) const = default;
};

CubeHeader header_of(const RFCube& cube);
/// Reads a blob at `offset`; throws if the file is shorter than the header implies.
RFCube read_rf_blob(const fs::path& path, const CubeHeader& header, std::uint64_t offset = 0);

// ---------------------------------------------------------------------------
// Dataset manifest

enum class Split { Train, Val, Test };
const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct FrameEntry {
  std::string file;  // relative to the manifest directory
  std::uint64_t offset = 0;
  std::uint64_t byte_length = 0;
  CubeHeader header;
  Split split = Split::Train;
  std::uint64_t phantom_seed = 0;
  std::vector<Cyst> cysts;
  bool operator==(const FrameEntry&) const = default;
};

struct MaskRef {
  std::string file;
  std::string label;  // e.g. "rx16" or "pw7"
  bool operator==(const MaskRef&) const = default;
};

struct DatasetManifest {
  static constexpr int kFormatVersion = 1;

  int format_version = kFormatVersion;
  ProbeConfig probe;
  EventKind event_kind = EventKind::FocusedTe;
  std::uint64_t seed = 0;
  /// Phantom generation settings echoed verbatim (config key -> value).
  std::vector<std::pair<std::string, std::string>> phantom_spec;
  std::vector<double> pw_angles_rad;  // plane-wave datasets only
  std::vector<FrameEntry> frames;
  std::vector<MaskRef> masks;

  std::vector<std::size_t> frames_in(Split s) const;
  bool operator==(const DatasetManifest&) const = default;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);

void write_manifest(const fs::path& path, const DatasetManifest& m);
DatasetManifest read_manifest(const fs::path& path);

/// Checks that every referenced blob exists with the declared length and that
/// frame files are not shared between splits.
void validate_manifest(const DatasetManifest& m, const fs::path& dir);

RFCube load_frame(const DatasetManifest& m, const fs::path& dir, std::size_t frame);

// ---------------------------------------------------------------------------
// Masks

void write_mask(const fs::path& path, const SamplingMask& mask);
SamplingMask read_mask(const fs::path& path);

// ---------------------------------------------------------------------------
// Checkpoints

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  nn::NetworkSpec spec;
  nn::TrainConfig train;
  int epochs_completed = 0;
  nn::Network net;
};

void write_checkpoint(const fs::path& path, const nn::Network& net, const nn::TrainConfig& cfg,
                      int epochs_completed);
Checkpoint read_checkpoint(const fs::path& path);

// ---------------------------------------------------------------------------
// Images and reports

void write_db_image(const fs::path& path, const BModeImage& img);
BModeImage read_db_image(const fs::path& path);

/// 8-bit gray level for a dB value: linear over [-dr, 0] -> [0, 255], clamped.
std::uint8_t db_to_gray(double db, double dynamic_range_db);
/// Binary P5 PGM with rows = depth.
void write_pgm(const fs::path& path, const BModeImage& img);
/// Returns (rows, cols, gray values).
std::tuple<std::size_t, std::size_t, std::vector<std::uint8_t>> read_pgm(const fs::path& path);

/// "inf" / "-inf" / "nan" for non-finite values, otherwise %.6f.
std::string format_metric(double v);
/// Header: factor,method,cnr,gcnr,psnr,ssim. CNR/GCNR columns are empty for
/// rows without ROI metrics.
std::string metrics_csv(const std::vector<MetricRow>& rows);
/// Header: epoch,lr,train_loss,val_loss (val_loss empty without validation data).
std::string loss_csv(const std::vector<double>& train, const std::vector<double>& val,
                     const nn::TrainConfig& cfg);

void write_text(const fs::path& path, const std::string& text);
void append_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// Exclusive ownership of an output directory for the lifetime of the object.
/// Creation fails if another command already holds the lock.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir);
  ~DirLock();
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

  static constexpr const char* kFileName = ".deepbf.lock";

 private:
  fs::path path_;
};

}  // namespace deepbf::io
