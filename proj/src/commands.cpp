#include "deepbf/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numbers>
#include <ostream>

#include "deepbf/das.hpp"
#include "deepbf/rng.hpp"

namespace deepbf::commands {

namespace {

constexpr std::uint64_t kPhantomStream = 0x9A17;
constexpr std::uint64_t kNoiseStream = 0x7015E;
constexpr std::uint64_t kCystStream = 0xC157;
constexpr std::uint64_t kPwMaskStream = 0x3A5;

// Outer radius of the background annulus relative to the cyst radius.
const double kAnnulusOuter = std::sqrt(2.08);

std::uint64_t frame_seed(std::uint64_t seed, std::size_t frame) {
  return nn::sample_seed(seed, kPhantomStream, frame);
}

void say(std::ostream* log, const std::string& msg) {
  if (log) *log << msg << '\n' << std::flush;
}

std::string frame_file(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04zu.rf", i);
  return buf;
}

struct Dataset {
  fs::path dir;
  io::DatasetManifest manifest;

  bool planewave() const { return manifest.event_kind == EventKind::PlaneWave; }
  RFCube frame(std::size_t i) const { return io::load_frame(manifest, dir, i); }
};

Dataset open_dataset(const fs::path& dir) {
  Dataset ds{dir, io::read_manifest(dir / kManifestName)};
  io::validate_manifest(ds.manifest, dir);
  return ds;
}

std::vector<std::size_t> frames_for(const io::DatasetManifest& m, const std::string& split) {
  if (split == "all") {
    std::vector<std::size_t> all(m.frames.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  return m.frames_in(io::split_from_string(split));
}

std::optional<CystRoiSpec> roi_of(const io::FrameEntry& f, bool use_roi) {
  if (!use_roi || f.cysts.empty()) return std::nullopt;
  const Cyst& c = f.cysts.front();
  return CystRoiSpec{c.center_x_m, c.center_z_m, c.radius_m};
}

std::vector<double> element_positions(const ProbeConfig& probe) {
  std::vector<double> x(static_cast<std::size_t>(probe.n_elements));
  for (int e = 0; e < probe.n_elements; ++e) x[static_cast<std::size_t>(e)] = probe.element_x(e);
  return x;
}

std::uint64_t pw_mask_seed(std::uint64_t seed, std::size_t frame) {
  return nn::sample_seed(seed, kPwMaskStream, frame);
}

io::Checkpoint load_checkpoint_for(const fs::path& path, const Dataset& ds) {
  io::Checkpoint ck = io::read_checkpoint(path);
  const bool pw = ck.spec.variant == nn::Variant::Planewave;
  if (pw != ds.planewave())
    throw Error("checkpoint variant " + std::string(nn::to_string(ck.spec.variant)) +
                " does not match the dataset's " + to_string(ds.manifest.event_kind) + " frames");
  return ck;
}

BModeImage rf_image(const Grid& rf, double dr) {
  BeamformedLines l;
  l.rf_sum = rf;
  return envelope_log_compress(l, dr);
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<Cyst> place_cysts(const Config& cfg, std::uint64_t seed) {
  const ProbeConfig& p = cfg.probe;
  const double r = cfg.phantom.cyst_radius_m;
  const double z0 = cfg.sim.depth_start_m;
  const double z1 = z0 + static_cast<double>(cfg.sim.n_depth) * p.depth_step_m();
  double x0, x1;
  if (cfg.sim.mode == nn::Variant::Focused) {
    x0 = p.scanline_x(0);
    x1 = p.scanline_x(p.n_te_focused - 1);
  } else {
    x0 = p.element_x(0);
    x1 = p.element_x(p.n_elements - 1);
  }
  x0 = std::max(x0, cfg.phantom.lateral_min_m);
  x1 = std::min(x1, cfg.phantom.lateral_max_m);
  // Keep the background annulus (plus a sample of slack) inside the image.
  const double margin = kAnnulusOuter * r + p.depth_step_m() + p.pitch_m;
  const auto pick = [&](Rng& rng, double lo, double hi) {
    return hi - lo > 2 * margin ? rng.uniform(lo + margin, hi - margin) : 0.5 * (lo + hi);
  };
  Rng rng(seed ^ kCystStream);
  std::vector<Cyst> cysts;
  for (int i = 0; i < cfg.phantom.cyst_count; ++i) {
    const double x = pick(rng, x0, x1);
    const double z = pick(rng, z0, z1);
    cysts.push_back({x, z, r, cfg.phantom.cyst_scale});
  }
  return cysts;
}

io::DatasetManifest simulate(const Config& cfg, const fs::path& out_dir) {
  cfg.validate();
  io::DirLock lock(out_dir);
  const ProbeConfig& probe = cfg.probe;
  Pulse pulse = cfg.pulse;
  pulse.center_freq_hz = probe.carrier_freq_hz;
  const double z0 = cfg.sim.depth_start_m;
  const double z1 = z0 + static_cast<double>(cfg.sim.n_depth) * probe.depth_step_m();
  const Extent extent{cfg.phantom.lateral_min_m, cfg.phantom.lateral_max_m,
                      std::max(z0 - cfg.phantom.depth_margin_m, 0.5 * z0),
                      z1 + cfg.phantom.depth_margin_m};
  const bool pw = cfg.sim.mode == nn::Variant::Planewave;

  io::DatasetManifest m;
  m.probe = probe;
  m.event_kind = pw ? EventKind::PlaneWave : EventKind::FocusedTe;
  m.seed = cfg.seed;
  for (const auto& [k, v] : config_entries(cfg))
    if (k.rfind("phantom.", 0) == 0 || k.rfind("sim.", 0) == 0 || k.rfind("pulse.", 0) == 0)
      m.phantom_spec.emplace_back(k, v);
  if (pw)
    m.pw_angles_rad =
        angle_set(probe.n_planewaves, cfg.sim.pw_max_angle_deg * std::numbers::pi / 180.0);

  const std::size_t n_total = cfg.sim.n_train + cfg.sim.n_val + cfg.sim.n_test;
  for (std::size_t i = 0; i < n_total; ++i) {
    const std::uint64_t seed = frame_seed(cfg.seed, i);
    const auto cysts = place_cysts(cfg, seed);
    const Phantom ph = make_cyst_phantom(extent, cfg.phantom.density_per_m2, cysts, seed);
    RFCube cube = pw ? stack_angles(simulate_planewave_frame(ph, probe, pulse, m.pw_angles_rad,
                                                             cfg.sim.n_depth, z0))
                     : simulate_focused_frame(ph, probe, pulse, cfg.sim.n_depth, z0);
    if (cfg.sim.noise_snr_db > 0) add_white_noise(cube, cfg.sim.noise_snr_db, seed ^ kNoiseStream);

    io::FrameEntry f;
    f.file = frame_file(i);
    f.header = io::header_of(cube);
    f.byte_length = f.header.byte_length();
    f.split = i < cfg.sim.n_train                   ? io::Split::Train
              : i < cfg.sim.n_train + cfg.sim.n_val ? io::Split::Val
                                                    : io::Split::Test;
    f.phantom_seed = seed;
    f.cysts = cysts;
    io::write_rf_blob(out_dir / f.file, cube);
    m.frames.push_back(std::move(f));
  }
  io::write_manifest(out_dir / kManifestName, m);
  return m;
}

// ---------------------------------------------------------------------------

Scheme scheme_for_factor(const io::DatasetManifest& m, double factor) {
  const ProbeConfig& p = m.probe;
  Scheme s;
  if (m.event_kind == EventKind::FocusedTe) {
    s.n_channels = keep_for_factor(factor, p.n_rx_focused, focused_keep_counts());
    s.label = subsampling_label(s.n_channels, p.n_rx_focused);
    return s;
  }
  s.planewave = true;
  const int n_pw = static_cast<int>(m.pw_angles_rad.size());
  const int n_rx = p.n_rx_planewave;
  const auto close = [&](int keep, int full) {
    return std::abs(factor - subsampling_factor(keep, full)) < 0.05;
  };
  if (close(n_pw, n_pw)) {
    s.n_channels = n_rx;
    s.n_angles = n_pw;
    s.label = "full";
    return s;
  }
  for (int k : planewave_angle_counts())
    if (k < n_pw && close(k, n_pw)) {
      s.n_channels = std::min(64, n_rx);
      s.n_angles = k;
      s.label = "pw" + std::to_string(k);
      return s;
    }
  for (int k : planewave_channel_counts())
    if (k < n_rx && close(k, n_rx)) {
      s.n_channels = k;
      s.n_angles = n_pw;
      s.label = "rx" + std::to_string(k);
      return s;
    }
  throw Error("factor " + std::to_string(factor) + " is not a supported plane-wave rate");
}

SamplingMask make_mask(const fs::path& dataset, double factor, std::uint64_t seed,
                       const fs::path& out) {
  const Dataset ds = open_dataset(dataset);
  if (ds.manifest.frames.empty()) throw Error("dataset has no frames");
  const Scheme s = scheme_for_factor(ds.manifest, factor);
  const std::size_t n_depth = ds.manifest.frames.front().header.n_depth;
  const auto& p = ds.manifest.probe;

  SamplingMask mask;
  std::string label;
  if (!s.planewave) {
    mask = s.n_channels >= p.n_rx_focused ? full_channel_mask(n_depth, p.n_rx_focused)
                                          : make_focused_mask(n_depth, p.n_rx_focused, s.n_channels, seed);
    label = "x" + s.label;
  } else if (s.label.rfind("pw", 0) == 0 || s.label == "full") {
    mask = make_pw_subset(static_cast<int>(ds.manifest.pw_angles_rad.size()), s.n_angles);
    label = s.label;
  } else {
    mask = make_focused_mask(n_depth, p.n_rx_planewave, s.n_channels, seed);
    label = s.label;
  }
  mask.rng_seed = seed;

  const fs::path abs_out = fs::absolute(out).lexically_normal();
  const fs::path abs_dir = fs::absolute(dataset).lexically_normal();
  const fs::path rel = abs_out.lexically_relative(abs_dir);
  const bool inside = !rel.empty() && *rel.begin() != "..";
  if (!inside) {
    io::write_mask(out, mask);
    return mask;
  }
  io::DirLock lock(dataset);
  io::write_mask(out, mask);
  io::DatasetManifest m = io::read_manifest(dataset / kManifestName);
  const std::string file = rel.generic_string();
  m.masks.erase(std::remove_if(m.masks.begin(), m.masks.end(),
                               [&](const io::MaskRef& r) { return r.file == file; }),
                m.masks.end());
  m.masks.push_back({file, label});
  io::write_manifest(dataset / kManifestName, m);
  return mask;
}

// ---------------------------------------------------------------------------

std::vector<MetricRow> beamform(const BeamformOptions& opts, std::ostream* log) {
  if (opts.method != "das" && opts.method != "deepbf")
    throw Error("method must be das or deepbf, got '" + opts.method + "'");
  if (opts.method == "deepbf" && !opts.checkpoint) throw Error("method deepbf requires a checkpoint");
  const Dataset ds = open_dataset(opts.dataset);
  const Scheme scheme = scheme_for_factor(ds.manifest, opts.factor);
  const ProbeConfig& probe = ds.manifest.probe;
  std::optional<io::Checkpoint> ck;
  if (opts.method == "deepbf") ck = load_checkpoint_for(*opts.checkpoint, ds);
  std::optional<SamplingMask> file_mask;
  if (opts.mask) {
    if (scheme.planewave) throw Error("--mask applies to focused datasets only");
    file_mask = io::read_mask(*opts.mask);
  }

  io::DirLock lock(opts.out_dir);
  const double dr = opts.dynamic_range_db;
  std::vector<MetricRow> rows;
  for (std::size_t fi : frames_for(ds.manifest, opts.split)) {
    const io::FrameEntry& entry = ds.manifest.frames[fi];
    const RFCube raw = ds.frame(fi);
    BModeImage reference, image;
    std::vector<double> lateral;
    if (!scheme.planewave) {
      const RFCube aligned = align_focused(raw, probe);
      const std::size_t n_depth = aligned.n_depth();
      SamplingMask mask;
      if (file_mask) {
        mask = *file_mask;
        if (mask.n_planes != n_depth || mask.width != aligned.n_rx())
          throw Error("mask geometry does not match the dataset frames");
      } else {
        mask = scheme.n_channels >= probe.n_rx_focused
                   ? full_channel_mask(n_depth, probe.n_rx_focused)
                   : make_focused_mask(n_depth, probe.n_rx_focused, scheme.n_channels,
                                       eval_mask_seed(opts.seed, fi, scheme.n_channels));
      }
      reference = envelope_log_compress(sum_aligned(aligned), dr);
      image = ck ? envelope_log_compress(deepbf_focused(ck->net, aligned, &mask, opts.batch_size), dr)
                 : envelope_log_compress(sum_aligned(aligned, &mask), dr);
      lateral = aligned.event_params();
    } else {
      const auto& angles = ds.manifest.pw_angles_rad;
      const auto cubes = split_angles(raw);
      const RFCube full = planewave_angle_images(cubes, probe, angles, nullptr);
      const int n_pw = static_cast<int>(angles.size());
      reference = rf_image(compound_angle_images(full, make_pw_subset(n_pw, n_pw)), dr);
      const SamplingMask subset = make_pw_subset(n_pw, scheme.n_angles);
      RFCube masked;
      if (scheme.n_channels < probe.n_rx_planewave) {
        const auto m = make_focused_mask(raw.n_depth(), probe.n_rx_planewave, scheme.n_channels,
                                         pw_mask_seed(opts.seed, fi) + static_cast<std::uint64_t>(scheme.n_channels));
        masked = planewave_angle_images(cubes, probe, angles, &m);
      }
      const RFCube& ai = scheme.n_channels < probe.n_rx_planewave ? masked : full;
      image = ck ? rf_image(deepbf_planewave(ck->net, ai, subset, opts.batch_size), dr)
                 : rf_image(compound_angle_images(ai, subset), dr);
      lateral = element_positions(probe);
    }

    char stem[96];
    std::snprintf(stem, sizeof stem, "frame_%04zu_%s_x%s", fi, opts.method.c_str(),
                  scheme.label.c_str());
    io::write_pgm(opts.out_dir / (std::string(stem) + ".pgm"), image);
    io::write_db_image(opts.out_dir / (std::string(stem) + ".db"), image);
    rows.push_back(score_image(reference, image, roi_of(entry, opts.use_roi),
                               entry.header.depth_start_m, entry.header.depth_step_m, lateral,
                               scheme.label, opts.method));
    say(log, std::string("wrote ") + stem + ".pgm");
  }

  const fs::path csv = opts.out_dir / "metrics.csv";
  std::string text = io::metrics_csv(rows);
  if (fs::exists(csv)) text = text.substr(text.find('\n') + 1);
  io::append_text(csv, text);
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

std::unique_ptr<nn::SampleSource> training_source(const Dataset& ds, io::Split split,
                                                  const Config& cfg) {
  const auto ids = ds.manifest.frames_in(split);
  if (ids.empty()) return nullptr;
  const ProbeConfig& probe = ds.manifest.probe;
  if (!ds.planewave()) {
    std::vector<int> keep = focused_keep_counts();
    if (cfg.model.factor != 0)
      keep = {keep_for_factor(cfg.model.factor, probe.n_rx_focused, focused_keep_counts())};
    std::vector<FocusedFrame> frames;
    for (std::size_t fi : ids) frames.push_back(prepare_focused_frame(ds.frame(fi), probe));
    auto src = std::make_unique<FocusedSampleSource>(std::move(frames), keep);
    src->select_planes(cfg.model.planes_per_frame, 0, cfg.train.seed + static_cast<std::uint64_t>(split));
    if (split == io::Split::Train) src->set_crop_width(cfg.model.crop_width);
    return src;
  }
  if (cfg.model.factor != 0) throw Error("model.factor applies to focused datasets only");
  std::vector<PlanewaveFrame> frames;
  for (std::size_t fi : ids)
    frames.push_back(prepare_planewave_frame(ds.frame(fi), probe, ds.manifest.pw_angles_rad,
                                             pw_mask_seed(cfg.train.seed, fi)));
  auto src = std::make_unique<PlanewaveSampleSource>(std::move(frames));
  src->select_planes(cfg.model.planes_per_frame, 0, cfg.train.seed + static_cast<std::uint64_t>(split));
  return src;
}

}  // namespace

nn::TrainResult train(const TrainOptions& opts, std::ostream* log) {
  const Dataset ds = open_dataset(opts.dataset);
  const nn::Variant data_variant = ds.planewave() ? nn::Variant::Planewave : nn::Variant::Focused;
  const nn::Variant variant = opts.variant.value_or(data_variant);
  if (variant != data_variant)
    throw Error(std::string("variant ") + nn::to_string(variant) + " does not match the dataset's " +
                to_string(ds.manifest.event_kind) + " frames");
  Config cfg = opts.cfg;
  if (opts.epochs) cfg.train.epochs = *opts.epochs;
  cfg.validate();

  const auto train_src = training_source(ds, io::Split::Train, cfg);
  if (!train_src) throw Error("dataset has no train split");
  const auto val_src = training_source(ds, io::Split::Val, cfg);

  nn::NetworkSpec spec = nn::NetworkSpec::deepbf(variant, cfg.model.width_base);
  const std::size_t height = train_src->input_shape().h;
  if (height != spec.in_height) {
    spec.in_height = height;
    spec.stages = nn::NetworkSpec::stages_for_height(height);
  }
  nn::Network net = nn::Network::build(spec, cfg.train.seed);

  const fs::path loss_path = opts.loss_csv.value_or(fs::path(opts.out_checkpoint.string() + ".loss.csv"));
  std::vector<double> train_hist, val_hist;
  io::write_text(loss_path, io::loss_csv(train_hist, val_hist, cfg.train));
  say(log, "training " + std::string(nn::to_string(variant)) + " on " +
               std::to_string(train_src->size()) + " samples, " + std::to_string(net.parameter_count()) +
               " parameters");

  nn::TrainHooks hooks;
  hooks.validation = val_src.get();
  hooks.on_epoch = [&](int epoch, double tl, double vl) {
    train_hist.push_back(tl);
    if (!std::isnan(vl)) val_hist.push_back(vl);
    io::write_checkpoint(opts.out_checkpoint, net, cfg.train, epoch + 1);
    io::write_text(loss_path, io::loss_csv(train_hist, val_hist, cfg.train));
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d/%d  lr %.3g  train %.6g  val %.6g", epoch + 1,
                  cfg.train.epochs, nn::lr_at(epoch, cfg.train), tl, vl);
    say(log, buf);
  };
  try {
    return nn::train(*train_src, net, cfg.train, hooks);
  } catch (const nn::TrainingDiverged& e) {
    const std::string kept = train_hist.empty()
                                 ? std::string("no checkpoint was written")
                                 : "kept the epoch " + std::to_string(train_hist.size()) + " checkpoint";
    throw nn::TrainingDiverged(std::string(e.what()) + "; " + kept);
  }
}

// ---------------------------------------------------------------------------

std::vector<MetricRow> evaluate(const EvalOptions& opts, std::ostream* log) {
  const Dataset ds = open_dataset(opts.dataset);
  const auto ids = ds.manifest.frames_in(io::Split::Test);
  if (ids.empty()) throw Error("dataset has no test split");
  std::optional<io::Checkpoint> ck;
  if (opts.checkpoint) ck = load_checkpoint_for(*opts.checkpoint, ds);
  nn::Network* net = ck ? &ck->net : nullptr;

  std::vector<std::optional<CystRoiSpec>> rois;
  bool any_roi = false;
  for (std::size_t fi : ids) {
    rois.push_back(roi_of(ds.manifest.frames[fi], opts.use_roi));
    any_roi = any_roi || rois.back().has_value();
  }
  if (!any_roi) {
    say(log, "warning: no ROI configured; CNR and GCNR columns are left empty");
    rois.clear();
  }

  const ProbeConfig& probe = ds.manifest.probe;
  std::vector<MetricRow> rows;
  if (!ds.planewave()) {
    std::vector<FocusedFrame> frames;
    for (std::size_t fi : ids) frames.push_back(prepare_focused_frame(ds.frame(fi), probe));
    FocusedEvalOptions fo;
    for (double f : opts.factors)
      fo.keep_counts.push_back(keep_for_factor(f, probe.n_rx_focused, focused_keep_counts()));
    fo.seed = opts.seed;
    fo.dynamic_range_db = opts.dynamic_range_db;
    fo.batch_size = opts.batch_size;
    rows = evaluate_focused(frames, rois, net, probe, fo);
  } else {
    std::vector<PlanewaveFrame> frames;
    for (std::size_t fi : ids)
      frames.push_back(prepare_planewave_frame(ds.frame(fi), probe, ds.manifest.pw_angles_rad,
                                               pw_mask_seed(opts.seed, fi)));
    rows = evaluate_planewave(frames, rois, net, probe, ds.manifest.frames[ids[0]].header.depth_start_m,
                              opts.dynamic_range_db, opts.batch_size);
  }
  if (opts.out_csv) io::write_text(*opts.out_csv, io::metrics_csv(rows));
  return rows;
}

// ---------------------------------------------------------------------------

namespace {

LatencyStats summarize(std::vector<double> ms) {
  LatencyStats s;
  s.planes = ms.size();
  if (ms.empty()) return s;
  std::sort(ms.begin(), ms.end());
  double sum = 0.0;
  for (double v : ms) sum += v;
  s.mean_ms = sum / static_cast<double>(ms.size());
  const std::size_t n = ms.size();
  s.median_ms = n % 2 ? ms[n / 2] : 0.5 * (ms[n / 2 - 1] + ms[n / 2]);
  s.p95_ms = ms[std::min(n - 1, static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n))) - 1)];
  return s;
}

}  // namespace

BenchReport bench(const fs::path& dataset, const fs::path& checkpoint, std::size_t n_planes,
                  std::size_t batch) {
  if (n_planes == 0 || batch == 0) throw Error("bench needs n_planes > 0 and batch > 0");
  const Dataset ds = open_dataset(dataset);
  if (ds.manifest.frames.empty()) throw Error("dataset has no frames");
  io::Checkpoint ck = load_checkpoint_for(checkpoint, ds);
  const ProbeConfig& probe = ds.manifest.probe;
  const auto test = ds.manifest.frames_in(io::Split::Test);
  const std::size_t fi = test.empty() ? 0 : test.front();
  const RFCube raw = ds.frame(fi);

  RFCube source;
  SamplingMask subset;
  if (!ds.planewave()) {
    source = align_focused(raw, probe);
  } else {
    const auto& angles = ds.manifest.pw_angles_rad;
    source = planewave_angle_images(split_angles(raw), probe, angles, nullptr);
    subset = make_pw_subset(static_cast<int>(angles.size()), static_cast<int>(angles.size()));
  }
  const std::size_t h = source.n_rx();
  const std::size_t w = source.n_events();
  const auto fill = [&](std::size_t plane, double* out) {
    const std::size_t d = plane % source.n_depth();
    if (ds.planewave()) assemble_planewave_input(source, subset, d, out);
    else assemble_focused_input(source, nullptr, d, out);
  };
  using clock = std::chrono::steady_clock;

  // Warm-up so first-touch allocation does not land in the statistics.
  {
    nn::Tensor4 x(1, 3, h, w);
    fill(0, x.sample(0));
    ck.net.forward(x, nn::Mode::Eval);
  }

  BenchReport r;
  r.batch = batch;
  std::vector<double> single;
  nn::Tensor4 x1(1, 3, h, w);
  for (std::size_t p = 0; p < n_planes; ++p) {
    fill(p, x1.sample(0));
    const auto t0 = clock::now();
    ck.net.forward(x1, nn::Mode::Eval);
    single.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  }
  r.single = summarize(single);

  std::vector<double> batched;
  nn::Tensor4 xb(batch, 3, h, w);
  for (std::size_t first = 0; first < n_planes; first += batch) {
    for (std::size_t b = 0; b < batch; ++b) fill(first + b, xb.sample(b));
    const auto t0 = clock::now();
    ck.net.forward(xb, nn::Mode::Eval);
    const double per_plane =
        std::chrono::duration<double, std::milli>(clock::now() - t0).count() / static_cast<double>(batch);
    batched.insert(batched.end(), batch, per_plane);
  }
  r.batched = summarize(batched);
  return r;
}

std::string format_bench(const BenchReport& r) {
  std::string out = "mode,planes,mean_ms,median_ms,p95_ms,planes_per_s\n";
  char buf[160];
  const auto line = [&](const std::string& mode, const LatencyStats& s) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.4f,%.4f,%.1f\n", mode.c_str(), s.planes, s.mean_ms,
                  s.median_ms, s.p95_ms, s.mean_ms > 0 ? 1000.0 / s.mean_ms : 0.0);
    out += buf;
  };
  line("single", r.single);
  line("batch" + std::to_string(r.batch), r.batched);
  return out;
}

void render(const fs::path& db_image, const fs::path& out_pgm) {
  io::write_pgm(out_pgm, io::read_db_image(db_image));
}

}  // namespace deepbf::commands
