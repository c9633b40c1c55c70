#include "deepbf/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace deepbf {

const std::vector<int>& focused_keep_counts() {
  static const std::vector<int> v{64, 32, 24, 16, 8, 4};
  return v;
}

const std::vector<int>& planewave_channel_counts() {
  static const std::vector<int> v{64, 32, 16, 8};
  return v;
}

const std::vector<int>& planewave_angle_counts() {
  static const std::vector<int> v{31, 11, 7, 3};
  return v;
}

int keep_for_factor(double factor, int n_full, const std::vector<int>& supported) {
  for (int k : supported)
    if (std::abs(std::round(subsampling_factor(k, n_full) * 10.0) / 10.0 - factor) < 1e-9 ||
        std::abs(subsampling_factor(k, n_full) - factor) < 1e-9)
      return k;
  throw Error("unsupported subsampling factor " + std::to_string(factor));
}

std::uint64_t eval_mask_seed(std::uint64_t seed, std::size_t frame, int n_keep) {
  return nn::sample_seed(seed ^ 0x5EEDF00DULL, frame, static_cast<std::uint64_t>(n_keep));
}

namespace {

// Copies three planes (d-1, d, d+1; clamped) of a [depth x H x W] cube into
// out[3][H][W], zeroing entries whose row flag is 0, then normalizes.
// `rows[p]` is the H-length keep flag for plane p, or null to keep everything.
double fill_planes(const RFCube& cube, std::size_t d, const std::uint8_t* const rows[3], double* out) {
  const std::size_t h = cube.n_rx(), w = cube.n_events(), n_depth = cube.n_depth();
  double peak = 0.0;
  for (std::size_t p = 0; p < 3; ++p) {
    const std::size_t dd = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(d) + p - 1, 0,
                                                      static_cast<std::ptrdiff_t>(n_depth) - 1);
    for (std::size_t r = 0; r < h; ++r) {
      double* dst = out + (p * h + r) * w;
      if (rows[p] && !rows[p][r]) {
        std::fill(dst, dst + w, 0.0);
        continue;
      }
      const double* src = cube.ptr(dd, r, 0);
      for (std::size_t k = 0; k < w; ++k) {
        dst[k] = src[k];
        peak = std::max(peak, std::abs(src[k]));
      }
    }
  }
  if (!(peak > 0)) return 1.0;
  const double inv = 1.0 / peak;
  for (std::size_t i = 0; i < 3 * h * w; ++i) out[i] *= inv;
  return peak;
}

std::size_t clamp_plane(std::size_t d, int offset, std::size_t n_depth) {
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(d) + offset, 0,
                                                             static_cast<std::ptrdiff_t>(n_depth) - 1));
}

std::vector<std::pair<std::size_t, std::size_t>> pick_planes(std::size_t n_frames,
                                                             std::size_t n_depth, std::size_t per_frame,
                                                             std::size_t margin, std::uint64_t seed) {
  if (2 * margin >= n_depth) throw Error("plane margin leaves no usable depth planes");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  Rng rng(seed);
  std::vector<std::size_t> planes(n_depth - 2 * margin);
  for (std::size_t f = 0; f < n_frames; ++f) {
    std::iota(planes.begin(), planes.end(), margin);
    std::size_t take = planes.size();
    if (per_frame > 0 && per_frame < planes.size()) {
      take = per_frame;
      for (std::size_t i = 0; i < take; ++i)
        std::swap(planes[i], planes[i + rng.below(planes.size() - i)]);
      std::sort(planes.begin(), planes.begin() + static_cast<std::ptrdiff_t>(take));
    }
    for (std::size_t i = 0; i < take; ++i) out.emplace_back(f, planes[i]);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Focused

FocusedFrame prepare_focused_frame(const RFCube& raw, const ProbeConfig& probe) {
  FocusedFrame f;
  f.aligned = align_focused(raw, probe);
  f.target = analytic_columns(sum_aligned(f.aligned).rf_sum);
  return f;
}

double assemble_focused_input(const RFCube& aligned, const SamplingMask* mask, std::size_t d,
                              double* out) {
  if (d >= aligned.n_depth()) throw Error("depth plane out of range");
  if (mask && (mask->n_planes != aligned.n_depth() || mask->width != aligned.n_rx()))
    throw Error("channel mask geometry does not match the cube");
  const std::uint8_t* rows[3] = {nullptr, nullptr, nullptr};
  if (mask)
    for (int p = 0; p < 3; ++p)
      rows[p] = &mask->bits[clamp_plane(d, p - 1, aligned.n_depth()) * mask->width];
  return fill_planes(aligned, d, rows, out);
}

FocusedSampleSource::FocusedSampleSource(std::vector<FocusedFrame> frames, std::vector<int> keep_counts)
    : frames_(std::move(frames)), keep_counts_(std::move(keep_counts)) {
  if (frames_.empty()) throw Error("focused sample source needs at least one frame");
  if (keep_counts_.empty()) throw Error("focused sample source needs at least one channel count");
  for (const auto& f : frames_)
    if (f.aligned.n_rx() != frames_[0].aligned.n_rx() ||
        f.aligned.n_events() != frames_[0].aligned.n_events() ||
        f.aligned.n_depth() != frames_[0].aligned.n_depth())
      throw Error("focused frames differ in geometry");
}

void FocusedSampleSource::select_planes(std::size_t per_frame, std::size_t margin, std::uint64_t seed) {
  samples_ = pick_planes(frames_.size(), frames_[0].aligned.n_depth(), per_frame, margin, seed);
}

void FocusedSampleSource::set_crop_width(std::size_t width) {
  if (width > frames_[0].aligned.n_events()) throw Error("crop width exceeds the number of scan lines");
  crop_width_ = width;
}

std::size_t FocusedSampleSource::sample_width() const {
  return crop_width_ ? crop_width_ : frames_[0].aligned.n_events();
}

nn::Shape4 FocusedSampleSource::input_shape() const {
  return {1, 3, frames_[0].aligned.n_rx(), sample_width()};
}

nn::Shape4 FocusedSampleSource::target_shape() const { return {1, 2, 1, sample_width()}; }

void FocusedSampleSource::load(std::size_t index, Rng& rng, double* input, double* target) const {
  const auto [fi, d] = samples_.at(index);
  const FocusedFrame& f = frames_[fi];
  const int n_rx = static_cast<int>(f.aligned.n_rx());
  const int keep = keep_counts_[rng.below(keep_counts_.size())];
  const std::uint8_t* rows[3] = {nullptr, nullptr, nullptr};
  SamplingMask mask;
  if (keep < n_rx) {
    mask = make_focused_mask(3, n_rx, keep, rng.next());
    for (int p = 0; p < 3; ++p) rows[p] = &mask.bits[static_cast<std::size_t>(p) * mask.width];
  }
  const std::size_t w = f.aligned.n_events(), cw = sample_width();
  std::size_t x0 = 0;
  double inv;
  if (cw == w) {
    inv = 1.0 / fill_planes(f.aligned, d, rows, input);
  } else {
    // Normalize over the full width, as at inference, then cut the window.
    x0 = rng.below(w - cw + 1);
    std::vector<double> full(3 * static_cast<std::size_t>(n_rx) * w);
    inv = 1.0 / fill_planes(f.aligned, d, rows, full.data());
    for (std::size_t row = 0; row < 3 * static_cast<std::size_t>(n_rx); ++row)
      std::copy_n(full.data() + row * w + x0, cw, input + row * cw);
  }
  for (std::size_t k = 0; k < cw; ++k) {
    target[k] = f.target.i(d, x0 + k) * inv;
    target[cw + k] = f.target.q(d, x0 + k) * inv;
  }
}

IQImage deepbf_focused(nn::Network& net, const RFCube& aligned, const SamplingMask* mask,
                       std::size_t batch_size) {
  const std::size_t n_depth = aligned.n_depth(), h = aligned.n_rx(), w = aligned.n_events();
  IQImage out{Grid(n_depth, w), Grid(n_depth, w)};
  std::vector<double> scales(batch_size);
  for (std::size_t first = 0; first < n_depth; first += batch_size) {
    const std::size_t count = std::min(batch_size, n_depth - first);
    nn::Tensor4 x(count, 3, h, w);
    for (std::size_t b = 0; b < count; ++b)
      scales[b] = assemble_focused_input(aligned, mask, first + b, x.sample(b));
    const nn::Tensor4 y = net.forward(x, nn::Mode::Eval);
    if (y.c() != 2 || y.h() != 1 || y.w() != w)
      throw Error("focused network produced " + y.shape().str() + ", expected [N x 2 x 1 x W]");
    for (std::size_t b = 0; b < count; ++b)
      for (std::size_t k = 0; k < w; ++k) {
        out.i(first + b, k) = y(b, 0, 0, k) * scales[b];
        out.q(first + b, k) = y(b, 1, 0, k) * scales[b];
      }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Plane wave

RFCube planewave_angle_images(const std::vector<RFCube>& cubes, const ProbeConfig& probe,
                              const std::vector<double>& angles, const SamplingMask* channel_mask) {
  if (cubes.empty()) throw Error("no plane-wave cubes");
  const std::size_t n_pw = angles.size(), n_lat = static_cast<std::size_t>(probe.n_elements);
  std::vector<double> lateral(n_lat);
  for (std::size_t j = 0; j < n_lat; ++j) lateral[j] = probe.element_x(static_cast<int>(j));
  RFCube out(cubes[0].n_depth(), n_pw, n_lat, EventKind::PlaneWave, cubes[0].depth_start_m(),
             cubes[0].depth_step_m(), lateral);
  SamplingMask single;
  single.kind = MaskKind::PwAngles;
  single.n_planes = 1;
  single.width = n_pw;
  single.n_keep = 1;
  for (std::size_t a = 0; a < n_pw; ++a) {
    single.bits.assign(n_pw, 0);
    single.bits[a] = 1;
    const BeamformedLines img = das_planewave_compound(cubes, probe, angles, single, channel_mask);
    for (std::size_t d = 0; d < out.n_depth(); ++d)
      for (std::size_t j = 0; j < n_lat; ++j) out.at(d, a, j) = img.rf_sum(d, j);
  }
  return out;
}

std::vector<RFCube> split_angles(const RFCube& stacked) {
  if (stacked.event_kind() != EventKind::PlaneWave) throw Error("split_angles needs a planewave cube");
  std::vector<RFCube> out;
  for (std::size_t a = 0; a < stacked.n_events(); ++a) {
    RFCube c(stacked.n_depth(), stacked.n_rx(), 1, EventKind::PlaneWave, stacked.depth_start_m(),
             stacked.depth_step_m(), {stacked.event_params()[a]});
    for (std::size_t d = 0; d < stacked.n_depth(); ++d)
      for (std::size_t r = 0; r < stacked.n_rx(); ++r) c.at(d, r, 0) = stacked.at(d, r, a);
    out.push_back(std::move(c));
  }
  return out;
}

RFCube stack_angles(const std::vector<RFCube>& cubes) {
  if (cubes.empty()) throw Error("stack_angles needs at least one cube");
  const RFCube& ref = cubes[0];
  std::vector<double> angles;
  for (const auto& c : cubes) {
    if (c.event_kind() != EventKind::PlaneWave || c.n_events() != 1 || c.n_depth() != ref.n_depth() ||
        c.n_rx() != ref.n_rx())
      throw Error("stack_angles needs single-angle planewave cubes of equal shape");
    angles.push_back(c.event_params()[0]);
  }
  RFCube out(ref.n_depth(), ref.n_rx(), cubes.size(), EventKind::PlaneWave, ref.depth_start_m(),
             ref.depth_step_m(), angles);
  for (std::size_t a = 0; a < cubes.size(); ++a)
    for (std::size_t d = 0; d < ref.n_depth(); ++d)
      for (std::size_t r = 0; r < ref.n_rx(); ++r) out.at(d, r, a) = cubes[a].at(d, r, 0);
  return out;
}

Grid compound_angle_images(const RFCube& ai, const SamplingMask& pw_subset) {
  if (pw_subset.width != ai.n_rx()) throw Error("angle subset does not match the angle images");
  Grid out(ai.n_depth(), ai.n_events());
  for (std::size_t d = 0; d < ai.n_depth(); ++d)
    for (std::size_t j = 0; j < ai.n_events(); ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < ai.n_rx(); ++a)
        if (pw_subset.active(0, a)) acc += ai.at(d, a, j);
      out(d, j) = acc;
    }
  return out;
}

double assemble_planewave_input(const RFCube& ai, const SamplingMask& pw_subset, std::size_t d,
                                double* out) {
  if (d >= ai.n_depth()) throw Error("depth plane out of range");
  if (pw_subset.width != ai.n_rx()) throw Error("angle subset does not match the angle images");
  const std::uint8_t* row = pw_subset.bits.data();
  const std::uint8_t* rows[3] = {row, row, row};
  return fill_planes(ai, d, rows, out);
}

PlanewaveFrame prepare_planewave_frame(const RFCube& stacked, const ProbeConfig& probe,
                                       const std::vector<double>& angles, std::uint64_t mask_seed,
                                       int angle_scheme_channels) {
  const auto cubes = split_angles(stacked);
  const int n_pw = static_cast<int>(angles.size());
  const std::size_t n_depth = stacked.n_depth();
  const int n_rx = static_cast<int>(stacked.n_rx());

  PlanewaveFrame f;
  f.images.push_back(planewave_angle_images(cubes, probe, angles, nullptr));
  const SamplingMask all_angles = make_pw_subset(n_pw, n_pw);
  f.target = compound_angle_images(f.images[0], all_angles);
  f.variants.emplace_back(0, all_angles);
  f.labels.push_back("full");

  for (int k : planewave_channel_counts()) {
    if (k >= n_rx) continue;
    const auto m = make_focused_mask(n_depth, n_rx, k, mask_seed + static_cast<std::uint64_t>(k));
    f.images.push_back(planewave_angle_images(cubes, probe, angles, &m));
    f.variants.emplace_back(f.images.size() - 1, all_angles);
    f.labels.push_back("rx" + std::to_string(k));
  }

  std::size_t angle_img = 0;
  if (angle_scheme_channels < n_rx) {
    const auto m = make_focused_mask(n_depth, n_rx, angle_scheme_channels,
                                     mask_seed + static_cast<std::uint64_t>(angle_scheme_channels));
    // Reuse the matching channel-scheme images when they were already built.
    const std::string label = "rx" + std::to_string(angle_scheme_channels);
    auto it = std::find(f.labels.begin(), f.labels.end(), label);
    if (it != f.labels.end()) {
      angle_img = f.variants[static_cast<std::size_t>(it - f.labels.begin())].first;
    } else {
      f.images.push_back(planewave_angle_images(cubes, probe, angles, &m));
      angle_img = f.images.size() - 1;
    }
  }
  for (int k : planewave_angle_counts()) {
    if (k > n_pw || (k == n_pw && angle_img == 0)) continue;
    f.variants.emplace_back(angle_img, make_pw_subset(n_pw, k));
    f.labels.push_back("pw" + std::to_string(k));
  }
  return f;
}

PlanewaveSampleSource::PlanewaveSampleSource(std::vector<PlanewaveFrame> frames)
    : frames_(std::move(frames)) {
  if (frames_.empty()) throw Error("planewave sample source needs at least one frame");
}

void PlanewaveSampleSource::select_planes(std::size_t per_frame, std::size_t margin, std::uint64_t seed) {
  samples_ = pick_planes(frames_.size(), frames_[0].target.rows, per_frame, margin, seed);
}

nn::Shape4 PlanewaveSampleSource::input_shape() const {
  const RFCube& ai = frames_[0].images[0];
  return {1, 3, ai.n_rx(), ai.n_events()};
}

nn::Shape4 PlanewaveSampleSource::target_shape() const {
  return {1, 1, 1, frames_[0].target.cols};
}

void PlanewaveSampleSource::load(std::size_t index, Rng& rng, double* input, double* target) const {
  const auto [fi, d] = samples_.at(index);
  const PlanewaveFrame& f = frames_[fi];
  const auto& [img, subset] = f.variants[rng.below(f.variants.size())];
  const double inv = 1.0 / assemble_planewave_input(f.images[img], subset, d, input);
  for (std::size_t j = 0; j < f.target.cols; ++j) target[j] = f.target(d, j) * inv;
}

Grid deepbf_planewave(nn::Network& net, const RFCube& ai, const SamplingMask& pw_subset,
                      std::size_t batch_size) {
  const std::size_t n_depth = ai.n_depth(), h = ai.n_rx(), w = ai.n_events();
  Grid out(n_depth, w);
  std::vector<double> scales(batch_size);
  for (std::size_t first = 0; first < n_depth; first += batch_size) {
    const std::size_t count = std::min(batch_size, n_depth - first);
    nn::Tensor4 x(count, 3, h, w);
    for (std::size_t b = 0; b < count; ++b)
      scales[b] = assemble_planewave_input(ai, pw_subset, first + b, x.sample(b));
    const nn::Tensor4 y = net.forward(x, nn::Mode::Eval);
    if (y.c() != 1 || y.h() != 1 || y.w() != w)
      throw Error("planewave network produced " + y.shape().str() + ", expected [N x 1 x 1 x W]");
    for (std::size_t b = 0; b < count; ++b)
      for (std::size_t j = 0; j < w; ++j) out(first + b, j) = y(b, 0, 0, j) * scales[b];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct Accumulator {
  double cnr = 0, gcnr = 0, psnr = 0, ssim = 0;
  std::size_t n = 0, n_roi = 0;

  void add(const BModeImage& ref, const BModeImage& img, const std::optional<CystRois>& rois) {
    psnr += deepbf::psnr(ref, img);
    ssim += deepbf::ssim(ref, img);
    ++n;
    if (rois) {
      cnr += deepbf::cnr(img, rois->target, rois->background);
      gcnr += deepbf::gcnr(img, rois->target, rois->background);
      ++n_roi;
    }
  }

  MetricRow row(std::string factor, std::string method) const {
    MetricRow r;
    r.factor = std::move(factor);
    r.method = std::move(method);
    r.psnr = psnr / static_cast<double>(n);
    r.ssim = ssim / static_cast<double>(n);
    r.has_roi_metrics = n_roi == n && n_roi > 0;
    if (r.has_roi_metrics) {
      r.cnr = cnr / static_cast<double>(n_roi);
      r.gcnr = gcnr / static_cast<double>(n_roi);
    }
    return r;
  }
};

std::optional<CystRois> rois_for(const std::optional<CystRoiSpec>& spec, double depth_start,
                                 double depth_step, const std::vector<double>& lateral) {
  if (!spec || lateral.size() < 2) return std::nullopt;
  return cyst_rois(spec->center_x_m, spec->center_z_m, spec->radius_m, depth_start, depth_step,
                   lateral.front(), lateral[1] - lateral[0]);
}

}  // namespace

MetricRow score_image(const BModeImage& reference, const BModeImage& image,
                      const std::optional<CystRoiSpec>& roi, double depth_start_m,
                      double depth_step_m, const std::vector<double>& lateral_m,
                      std::string factor, std::string method) {
  Accumulator acc;
  acc.add(reference, image, rois_for(roi, depth_start_m, depth_step_m, lateral_m));
  return acc.row(std::move(factor), std::move(method));
}

std::vector<MetricRow> evaluate_focused(const std::vector<FocusedFrame>& frames,
                                        const std::vector<std::optional<CystRoiSpec>>& rois,
                                        nn::Network* net, const ProbeConfig& probe,
                                        const FocusedEvalOptions& opts) {
  if (frames.empty()) throw Error("evaluation needs at least one frame");
  if (!rois.empty() && rois.size() != frames.size()) throw Error("need one ROI entry per frame");
  const int n_rx = probe.n_rx_focused;
  const double dr = opts.dynamic_range_db;

  std::vector<Accumulator> das(opts.keep_counts.size()), learned(opts.keep_counts.size());
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const FocusedFrame& f = frames[fi];
    const BModeImage reference = envelope_log_compress(sum_aligned(f.aligned), dr);
    const auto roi = rois.empty() ? std::nullopt
                                  : rois_for(rois[fi], f.aligned.depth_start_m(),
                                             f.aligned.depth_step_m(), f.aligned.event_params());
    for (std::size_t k = 0; k < opts.keep_counts.size(); ++k) {
      const int keep = opts.keep_counts[k];
      const SamplingMask mask =
          keep >= n_rx ? full_channel_mask(f.aligned.n_depth(), n_rx)
                       : make_focused_mask(f.aligned.n_depth(), n_rx, keep, eval_mask_seed(opts.seed, fi, keep));
      das[k].add(reference, envelope_log_compress(sum_aligned(f.aligned, &mask), dr), roi);
      if (net)
        learned[k].add(reference,
                       envelope_log_compress(deepbf_focused(*net, f.aligned, &mask, opts.batch_size), dr),
                       roi);
    }
  }

  std::vector<MetricRow> rows;
  for (std::size_t k = 0; k < opts.keep_counts.size(); ++k) {
    const std::string label = subsampling_label(opts.keep_counts[k], n_rx);
    rows.push_back(das[k].row(label, "das"));
    if (net) rows.push_back(learned[k].row(label, "deepbf"));
  }
  return rows;
}

std::vector<MetricRow> evaluate_planewave(const std::vector<PlanewaveFrame>& frames,
                                          const std::vector<std::optional<CystRoiSpec>>& rois,
                                          nn::Network* net, const ProbeConfig& probe,
                                          double depth_start_m, double dynamic_range_db,
                                          std::size_t batch_size) {
  if (frames.empty()) throw Error("evaluation needs at least one frame");
  if (!rois.empty() && rois.size() != frames.size()) throw Error("need one ROI entry per frame");
  std::vector<double> lateral(static_cast<std::size_t>(probe.n_elements));
  for (int e = 0; e < probe.n_elements; ++e) lateral[e] = probe.element_x(e);

  std::vector<std::string> order;
  std::map<std::string, std::pair<Accumulator, Accumulator>> acc;
  for (std::size_t fi = 0; fi < frames.size(); ++fi) {
    const PlanewaveFrame& f = frames[fi];
    const auto to_image = [&](const Grid& rf) {
      BeamformedLines l;
      l.rf_sum = rf;
      return envelope_log_compress(l, dynamic_range_db);
    };
    const BModeImage reference = to_image(f.target);
    const auto roi = rois.empty() ? std::nullopt
                                  : rois_for(rois[fi], depth_start_m, probe.depth_step_m(), lateral);
    for (std::size_t v = 0; v < f.variants.size(); ++v) {
      const auto& [img, subset] = f.variants[v];
      const std::string& label = f.labels[v];
      if (!acc.count(label)) order.push_back(label);
      auto& [das, learned] = acc[label];
      das.add(reference, to_image(compound_angle_images(f.images[img], subset)), roi);
      if (net) learned.add(reference, to_image(deepbf_planewave(*net, f.images[img], subset, batch_size)), roi);
    }
  }
  std::vector<MetricRow> rows;
  for (const auto& label : order) {
    rows.push_back(acc[label].first.row(label, "das"));
    if (net) rows.push_back(acc[label].second.row(label, "deepbf"));
  }
  return rows;
}

}  // namespace deepbf
