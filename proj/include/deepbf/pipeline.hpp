// Glue between simulation, DAS, subsampling and the learned beamformer:
// network input assembly, training sources, frame reconstruction and the
// per-factor quality evaluation.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deepbf/core.hpp"
#include "deepbf/das.hpp"
#include "deepbf/metrics.hpp"
#include "deepbf/nn/train.hpp"
#include "deepbf/sim.hpp"
#include "deepbf/subsample.hpp"

namespace deepbf {

/// Receive-channel counts for the focused subsampling sweep (factors 1, 2, 2.7, 4, 8, 16).
const std::vector<int>& focused_keep_counts();
/// Plane-wave schemes: channel counts (of the full aperture) and angle counts.
const std::vector<int>& planewave_channel_counts();
const std::vector<int>& planewave_angle_counts();

/// Active channel count for a subsampling factor label such as 2.7; throws if
/// the factor is not one of the supported rates.
int keep_for_factor(double factor, int n_full, const std::vector<int>& supported);

/// Mask seeds used for evaluation frames: fixed per (seed, frame, factor).
std::uint64_t eval_mask_seed(std::uint64_t seed, std::size_t frame, int n_keep);

// ---------------------------------------------------------------------------
// Focused mode

/// Full-rate supervision for one focused frame.
struct FocusedFrame {
  RFCube aligned;  // [depth x rx x te], receive-delayed, unsummed
  IQImage target;  // analytic signal of the full-aperture DAS lines
};

FocusedFrame prepare_focused_frame(const RFCube& raw, const ProbeConfig& probe);

/// Writes the [3 x n_rx x n_te] network input centred on depth d (boundary
/// planes replicated), with mask rows of the corresponding planes applied, and
/// divides by the input's max |value|. Returns that scale (1 for all-zero input).
double assemble_focused_input(const RFCube& aligned, const SamplingMask* mask, std::size_t d,
                              double* out);

/// Training samples (frame, depth) over full-rate focused frames. Each load
/// draws a channel count uniformly from `keep_counts` and a fresh random mask
/// for each of the three planes, so one model sees every rate.
class FocusedSampleSource : public nn::SampleSource {
 public:
  FocusedSampleSource(std::vector<FocusedFrame> frames, std::vector<int> keep_counts);

  /// Adds `per_frame` depth planes per frame drawn without replacement from
  /// [margin, n_depth - margin); all planes when per_frame is 0.
  void select_planes(std::size_t per_frame, std::size_t margin, std::uint64_t seed);

  /// Train on random windows of `width` adjacent scan lines (0 = all lines).
  /// The network is fully convolutional along the lines, so inference still
  /// runs on whole frames.
  void set_crop_width(std::size_t width);

  std::size_t size() const override { return samples_.size(); }
  nn::Shape4 input_shape() const override;
  nn::Shape4 target_shape() const override;
  void load(std::size_t index, Rng& rng, double* input, double* target) const override;

  const std::vector<FocusedFrame>& frames() const { return frames_; }

 private:
  std::size_t sample_width() const;

  std::vector<FocusedFrame> frames_;
  std::vector<int> keep_counts_;
  std::size_t crop_width_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> samples_;
};

/// Learned reconstruction of a whole focused frame. Depth planes are batched
/// through the network in eval mode and rescaled to the input amplitude.
IQImage deepbf_focused(nn::Network& net, const RFCube& aligned, const SamplingMask* mask,
                       std::size_t batch_size = 32);

// ---------------------------------------------------------------------------
// Plane-wave mode

/// Single-angle DAS images stacked as [depth x angle x lateral]: the input the
/// planewave network contracts along the angle axis.
RFCube planewave_angle_images(const std::vector<RFCube>& cubes, const ProbeConfig& probe,
                              const std::vector<double>& angles, const SamplingMask* channel_mask);

/// Splits a stacked [depth x rx x angle] acquisition into one cube per angle.
std::vector<RFCube> split_angles(const RFCube& stacked);

/// Inverse of split_angles.
RFCube stack_angles(const std::vector<RFCube>& cubes);

/// Coherent compound of selected angles from a stacked angle-image cube.
Grid compound_angle_images(const RFCube& angle_images, const SamplingMask& pw_subset);

/// [3 x n_pw x n_lateral] input around depth d with inactive angles zeroed; returns the scale.
double assemble_planewave_input(const RFCube& angle_images, const SamplingMask& pw_subset,
                                std::size_t d, double* out);

/// Full-rate target plus the subsampled acquisitions of one planewave frame.
/// Variants reference a shared angle-image cube (channel mask already applied)
/// and the angle subset kept.
struct PlanewaveFrame {
  std::vector<RFCube> images;
  std::vector<std::pair<std::size_t, SamplingMask>> variants;
  Grid target;  // full-rate compound RF [depth x lateral]
  std::vector<std::string> labels;  // one per variant, e.g. "rx64" or "pw11"
};

/// Builds the full-rate target, one variant per channel count (all angles)
/// and one per angle count (with `angle_scheme_channels` receive channels).
PlanewaveFrame prepare_planewave_frame(const RFCube& stacked, const ProbeConfig& probe,
                                       const std::vector<double>& angles, std::uint64_t mask_seed,
                                       int angle_scheme_channels = 64);

class PlanewaveSampleSource : public nn::SampleSource {
 public:
  explicit PlanewaveSampleSource(std::vector<PlanewaveFrame> frames);
  void select_planes(std::size_t per_frame, std::size_t margin, std::uint64_t seed);

  std::size_t size() const override { return samples_.size(); }
  nn::Shape4 input_shape() const override;
  nn::Shape4 target_shape() const override;
  void load(std::size_t index, Rng& rng, double* input, double* target) const override;

 private:
  std::vector<PlanewaveFrame> frames_;
  std::vector<std::pair<std::size_t, std::size_t>> samples_;
};

/// Learned plane-wave reconstruction: compound RF [depth x lateral].
Grid deepbf_planewave(nn::Network& net, const RFCube& angle_images, const SamplingMask& pw_subset,
                      std::size_t batch_size = 32);

// ---------------------------------------------------------------------------
// Evaluation

struct MetricRow {
  std::string factor;  // label, e.g. "2.7"
  std::string method;  // "das" or "deepbf"
  double cnr = 0.0;
  double gcnr = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  bool has_roi_metrics = false;
};

struct CystRoiSpec {
  double center_x_m = 0.0;
  double center_z_m = 0.0;
  double radius_m = 0.0;
};

struct FocusedEvalOptions {
  std::vector<int> keep_counts;  // channel counts to evaluate
  std::uint64_t seed = 0;
  double dynamic_range_db = 60.0;
  std::size_t batch_size = 32;
};

/// Metrics of one image against its full-rate reference; CNR / GCNR only
/// when `roi` is set. Lateral positions give the column spacing of the ROI.
MetricRow score_image(const BModeImage& reference, const BModeImage& image,
                      const std::optional<CystRoiSpec>& roi, double depth_start_m,
                      double depth_step_m, const std::vector<double>& lateral_m,
                      std::string factor, std::string method);

/// Per (factor, method) means over frames. PSNR / SSIM compare against the
/// full-rate DAS image of the same frame; CNR / GCNR use the cyst ROIs of
/// each frame when given. `net` may be null to evaluate DAS only.
std::vector<MetricRow> evaluate_focused(const std::vector<FocusedFrame>& frames,
                                        const std::vector<std::optional<CystRoiSpec>>& rois,
                                        nn::Network* net, const ProbeConfig& probe,
                                        const FocusedEvalOptions& opts);

/// Plane-wave counterpart: one row pair per variant of each frame, labelled by
/// the variant's scheme; reference = full-rate compound image.
std::vector<MetricRow> evaluate_planewave(const std::vector<PlanewaveFrame>& frames,
                                          const std::vector<std::optional<CystRoiSpec>>& rois,
                                          nn::Network* net, const ProbeConfig& probe,
                                          double depth_start_m, double dynamic_range_db = 60.0,
                                          std::size_t batch_size = 32);

}  // namespace deepbf
