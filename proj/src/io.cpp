#include "deepbf/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace deepbf::io {

namespace {

using json = nlohmann::ordered_json;

template <typename T>
T to_le(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

class ByteWriter {
 public:
  template <typename T>
  void put(T v) {
    const T le = to_le(v);
    buf_.append(reinterpret_cast<const char*>(&le), sizeof(T));
  }
  void put_raw(const std::string& s) { buf_.append(s); }
  void put_f64s(const std::vector<double>& v) {
    for (double x : v) put(x);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string data, std::string what) : data_(std::move(data)), what_(std::move(what)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_le(v);
  }
  std::string get_raw(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_f64s(std::vector<double>& v) {
    for (double& x : v) x = get<double>();
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error(what_ + ": truncated file");
  }
  std::string data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_bytes(const fs::path& path, const std::string& bytes, bool append = false) {
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

json probe_to_json(const ProbeConfig& p) {
  return {{"carrier_freq_hz", p.carrier_freq_hz}, {"sampling_freq_hz", p.sampling_freq_hz},
          {"n_elements", p.n_elements},           {"n_tx_elements", p.n_tx_elements},
          {"n_te_focused", p.n_te_focused},       {"n_rx_focused", p.n_rx_focused},
          {"n_rx_planewave", p.n_rx_planewave},   {"n_planewaves", p.n_planewaves},
          {"pitch_m", p.pitch_m},                 {"element_width_m", p.element_width_m},
          {"sound_speed_m_s", p.sound_speed_m_s}};
}

ProbeConfig probe_from_json(const json& j) {
  ProbeConfig p;
  p.carrier_freq_hz = j.at("carrier_freq_hz").get<double>();
  p.sampling_freq_hz = j.at("sampling_freq_hz").get<double>();
  p.n_elements = j.at("n_elements").get<int>();
  p.n_tx_elements = j.at("n_tx_elements").get<int>();
  p.n_te_focused = j.at("n_te_focused").get<int>();
  p.n_rx_focused = j.at("n_rx_focused").get<int>();
  p.n_rx_planewave = j.at("n_rx_planewave").get<int>();
  p.n_planewaves = j.at("n_planewaves").get<int>();
  p.pitch_m = j.at("pitch_m").get<double>();
  p.element_width_m = j.at("element_width_m").get<double>();
  p.sound_speed_m_s = j.at("sound_speed_m_s").get<double>();
  return p;
}

constexpr char kMaskMagic[] = "DBFMASK1";
constexpr char kCheckpointMagic[] = "DEEPBFCK";
constexpr char kImageMagic[] = "DBFIMG01";

void expect_magic(ByteReader& r, const char* magic, const fs::path& path) {
  if (r.get_raw(8) != std::string(magic, 8))
    throw Error(path.string() + ": bad magic, expected " + std::string(magic, 8));
}

}  // namespace

// ---------------------------------------------------------------------------

void write_rf_blob(const fs::path& path, const RFCube& cube) {
  ByteWriter w;
  for (double v : cube.samples()) w.put(static_cast<float>(v));
  write_bytes(path, w.bytes());
}

CubeHeader header_of(const RFCube& cube) {
  return {cube.n_depth(),       cube.n_rx(),        cube.n_events(),     cube.event_kind(),
          cube.depth_start_m(), cube.depth_step_m(), cube.event_params()};
}

RFCube read_rf_blob(const fs::path& path, const CubeHeader& h, std::uint64_t offset) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  if (offset + h.byte_length() > size)
    throw Error(path.string() + ": blob shorter than declared shape");
  std::string bytes(h.byte_length(), '\0');
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  RFCube cube(h.n_depth, h.n_rx, h.n_events, h.kind, h.depth_start_m, h.depth_step_m,
              h.event_params);
  ByteReader r(std::move(bytes), path.string());
  for (double& v : cube.samples()) v = static_cast<double>(r.get<float>());
  return cube;
}

// ---------------------------------------------------------------------------

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error("unknown split '" + s + "'");
}

std::vector<std::size_t> DatasetManifest::frames_in(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].split == s) out.push_back(i);
  return out;
}

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format_version"] = m.format_version;
  j["probe"] = probe_to_json(m.probe);
  j["event_kind"] = to_string(m.event_kind);
  j["seed"] = m.seed;
  json spec = json::object();
  for (const auto& [k, v] : m.phantom_spec) spec[k] = v;
  j["phantom_spec"] = spec;
  j["pw_angles_rad"] = m.pw_angles_rad;
  json frames = json::array();
  for (const auto& f : m.frames) {
    json cysts = json::array();
    for (const auto& c : f.cysts)
      cysts.push_back({{"center_x_m", c.center_x_m},
                       {"center_z_m", c.center_z_m},
                       {"radius_m", c.radius_m},
                       {"interior_reflectivity_scale", c.interior_reflectivity_scale}});
    frames.push_back({{"file", f.file},
                      {"offset", f.offset},
                      {"byte_length", f.byte_length},
                      {"n_depth", f.header.n_depth},
                      {"n_rx", f.header.n_rx},
                      {"n_events", f.header.n_events},
                      {"event_kind", to_string(f.header.kind)},
                      {"depth_start_m", f.header.depth_start_m},
                      {"depth_step_m", f.header.depth_step_m},
                      {"event_params", f.header.event_params},
                      {"split", to_string(f.split)},
                      {"phantom_seed", f.phantom_seed},
                      {"cysts", cysts}});
  }
  j["frames"] = frames;
  json masks = json::array();
  for (const auto& mk : m.masks) masks.push_back({{"file", mk.file}, {"label", mk.label}});
  j["masks"] = masks;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("manifest: invalid JSON: ") + e.what());
  }
  try {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != DatasetManifest::kFormatVersion)
      throw Error("manifest: unsupported format_version " + std::to_string(m.format_version));
    m.probe = probe_from_json(j.at("probe"));
    m.event_kind = event_kind_from_string(j.at("event_kind").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("phantom_spec").items())
      m.phantom_spec.emplace_back(k, v.get<std::string>());
    m.pw_angles_rad = j.at("pw_angles_rad").get<std::vector<double>>();
    for (const auto& fj : j.at("frames")) {
      FrameEntry f;
      f.file = fj.at("file").get<std::string>();
      f.offset = fj.at("offset").get<std::uint64_t>();
      f.byte_length = fj.at("byte_length").get<std::uint64_t>();
      f.header.n_depth = fj.at("n_depth").get<std::size_t>();
      f.header.n_rx = fj.at("n_rx").get<std::size_t>();
      f.header.n_events = fj.at("n_events").get<std::size_t>();
      f.header.kind = event_kind_from_string(fj.at("event_kind").get<std::string>());
      f.header.depth_start_m = fj.at("depth_start_m").get<double>();
      f.header.depth_step_m = fj.at("depth_step_m").get<double>();
      f.header.event_params = fj.at("event_params").get<std::vector<double>>();
      f.split = split_from_string(fj.at("split").get<std::string>());
      f.phantom_seed = fj.at("phantom_seed").get<std::uint64_t>();
      for (const auto& cj : fj.at("cysts"))
        f.cysts.push_back({cj.at("center_x_m").get<double>(), cj.at("center_z_m").get<double>(),
                           cj.at("radius_m").get<double>(),
                           cj.at("interior_reflectivity_scale").get<double>()});
      m.frames.push_back(std::move(f));
    }
    for (const auto& mj : j.at("masks"))
      m.masks.push_back({mj.at("file").get<std::string>(), mj.at("label").get<std::string>()});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("manifest: ") + e.what());
  }
}

void write_manifest(const fs::path& path, const DatasetManifest& m) {
  write_text(path, manifest_to_json(m));
}

DatasetManifest read_manifest(const fs::path& path) { return manifest_from_json(read_text(path)); }

void validate_manifest(const DatasetManifest& m, const fs::path& dir) {
  std::map<std::string, Split> owner;
  for (std::size_t i = 0; i < m.frames.size(); ++i) {
    const auto& f = m.frames[i];
    const std::string where = "frames[" + std::to_string(i) + "]";
    if (f.byte_length != f.header.byte_length())
      throw Error(where + ".byte_length does not match the declared shape");
    if (f.header.n_events != f.header.event_params.size())
      throw Error(where + ".event_params length does not match n_events");
    const fs::path p = dir / f.file;
    if (!fs::exists(p)) throw Error(where + ".file missing: " + p.string());
    if (fs::file_size(p) < f.offset + f.byte_length)
      throw Error(where + ".file shorter than offset + byte_length: " + p.string());
    auto [it, inserted] = owner.emplace(f.file, f.split);
    if (!inserted && it->second != f.split)
      throw Error(where + ": file " + f.file + " is shared between splits");
  }
  for (std::size_t i = 0; i < m.masks.size(); ++i)
    if (!fs::exists(dir / m.masks[i].file))
      throw Error("masks[" + std::to_string(i) + "].file missing: " + m.masks[i].file);
}

RFCube load_frame(const DatasetManifest& m, const fs::path& dir, std::size_t frame) {
  if (frame >= m.frames.size()) throw Error("frame index out of range");
  const auto& f = m.frames[frame];
  return read_rf_blob(dir / f.file, f.header, f.offset);
}

// ---------------------------------------------------------------------------

void write_mask(const fs::path& path, const SamplingMask& mask) {
  ByteWriter w;
  w.put_raw(std::string(kMaskMagic, 8));
  w.put(static_cast<std::uint8_t>(mask.kind == MaskKind::FocusedChannels ? 0 : 1));
  w.put(static_cast<std::uint64_t>(mask.n_planes));
  w.put(static_cast<std::uint64_t>(mask.width));
  w.put(static_cast<std::int32_t>(mask.n_keep));
  w.put(mask.rng_seed);
  std::string packed((mask.bits.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < mask.bits.size(); ++i)
    if (mask.bits[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1u << (i % 8)));
  w.put_raw(packed);
  write_bytes(path, w.bytes());
}

SamplingMask read_mask(const fs::path& path) {
  ByteReader r(read_bytes(path), path.string());
  expect_magic(r, kMaskMagic, path);
  SamplingMask m;
  const auto kind = r.get<std::uint8_t>();
  if (kind > 1) throw Error(path.string() + ": unknown mask kind");
  m.kind = kind == 0 ? MaskKind::FocusedChannels : MaskKind::PwAngles;
  m.n_planes = r.get<std::uint64_t>();
  m.width = r.get<std::uint64_t>();
  m.n_keep = r.get<std::int32_t>();
  m.rng_seed = r.get<std::uint64_t>();
  m.bits.resize(m.n_planes * m.width);
  const std::string packed = r.get_raw((m.bits.size() + 7) / 8);
  for (std::size_t i = 0; i < m.bits.size(); ++i)
    m.bits[i] = static_cast<std::uint8_t>((static_cast<unsigned char>(packed[i / 8]) >> (i % 8)) & 1u);
  if (!r.at_end()) throw Error(path.string() + ": trailing bytes after mask");
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoint layout (little-endian):
//   "DEEPBFCK" u32 version
//   u32 variant, u64 in_channels, in_height, width_base, head_convs, stages,
//   out_channels, u8 grow_width
//   f64 lr_start, lr_end, weight_decay, momentum; u64 epochs, batch_size, seed;
//   u32 epochs_completed
//   u64 n_units; per unit: u64 in, out, kernel_h, kernel_w, stride_h; u8 bn_relu
//   per unit in order: f64 weight[], bias[], and when bn_relu:
//   scale[], shift[], running_mean[], running_var[]

void write_checkpoint(const fs::path& path, const nn::Network& net, const nn::TrainConfig& cfg,
                      int epochs_completed) {
  const auto& s = net.spec();
  ByteWriter w;
  w.put_raw(std::string(kCheckpointMagic, 8));
  w.put(Checkpoint::kVersion);
  w.put(static_cast<std::uint32_t>(s.variant == nn::Variant::Focused ? 0 : 1));
  for (std::size_t v : {s.in_channels, s.in_height, s.width_base, s.head_convs, s.stages,
                        s.out_channels})
    w.put(static_cast<std::uint64_t>(v));
  w.put(static_cast<std::uint8_t>(s.grow_width));
  w.put(cfg.lr_start);
  w.put(cfg.lr_end);
  w.put(cfg.weight_decay);
  w.put(cfg.momentum);
  w.put(static_cast<std::uint64_t>(cfg.epochs));
  w.put(static_cast<std::uint64_t>(cfg.batch_size));
  w.put(cfg.seed);
  w.put(static_cast<std::uint32_t>(epochs_completed));
  w.put(static_cast<std::uint64_t>(net.units().size()));
  for (const auto& u : net.units()) {
    for (std::size_t v : {u.geom.in_channels, u.geom.out_channels, u.geom.kernel_h,
                          u.geom.kernel_w, u.geom.stride_h})
      w.put(static_cast<std::uint64_t>(v));
    w.put(static_cast<std::uint8_t>(u.bn_relu));
  }
  for (const auto& u : net.units()) {
    w.put_f64s(u.weight);
    w.put_f64s(u.bias);
    if (u.bn_relu) {
      w.put_f64s(u.bn.scale);
      w.put_f64s(u.bn.shift);
      w.put_f64s(u.bn.running_mean);
      w.put_f64s(u.bn.running_var);
    }
  }
  // Write-then-rename so an interrupted save never clobbers the previous file.
  const fs::path tmp = path.string() + ".tmp";
  write_bytes(tmp, w.bytes());
  fs::rename(tmp, path);
}

Checkpoint read_checkpoint(const fs::path& path) {
  ByteReader r(read_bytes(path), path.string());
  expect_magic(r, kCheckpointMagic, path);
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion)
    throw Error(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const auto variant = r.get<std::uint32_t>();
  if (variant > 1) throw Error(path.string() + ": unknown variant");
  ck.spec.variant = variant == 0 ? nn::Variant::Focused : nn::Variant::Planewave;
  for (std::size_t* v : {&ck.spec.in_channels, &ck.spec.in_height, &ck.spec.width_base,
                         &ck.spec.head_convs, &ck.spec.stages, &ck.spec.out_channels})
    *v = r.get<std::uint64_t>();
  ck.spec.grow_width = r.get<std::uint8_t>() != 0;
  ck.train.lr_start = r.get<double>();
  ck.train.lr_end = r.get<double>();
  ck.train.weight_decay = r.get<double>();
  ck.train.momentum = r.get<double>();
  ck.train.epochs = static_cast<int>(r.get<std::uint64_t>());
  ck.train.batch_size = r.get<std::uint64_t>();
  ck.train.seed = r.get<std::uint64_t>();
  ck.epochs_completed = static_cast<int>(r.get<std::uint32_t>());
  ck.spec.validate();

  ck.net = nn::Network::build(ck.spec, 0);
  auto& units = ck.net.units();
  if (r.get<std::uint64_t>() != units.size())
    throw Error(path.string() + ": layer count does not match the network spec");
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& g = units[i].geom;
    const std::uint64_t expect[] = {g.in_channels, g.out_channels, g.kernel_h, g.kernel_w,
                                    g.stride_h};
    for (std::uint64_t e : expect)
      if (r.get<std::uint64_t>() != e)
        throw Error(path.string() + ": layer " + std::to_string(i) + " shape mismatch");
    if ((r.get<std::uint8_t>() != 0) != units[i].bn_relu)
      throw Error(path.string() + ": layer " + std::to_string(i) + " BN flag mismatch");
  }
  for (auto& u : units) {
    r.get_f64s(u.weight);
    r.get_f64s(u.bias);
    if (u.bn_relu) {
      r.get_f64s(u.bn.scale);
      r.get_f64s(u.bn.shift);
      r.get_f64s(u.bn.running_mean);
      r.get_f64s(u.bn.running_var);
    }
  }
  if (!r.at_end()) throw Error(path.string() + ": trailing bytes after parameters");
  return ck;
}

// ---------------------------------------------------------------------------

void write_db_image(const fs::path& path, const BModeImage& img) {
  ByteWriter w;
  w.put_raw(std::string(kImageMagic, 8));
  w.put(static_cast<std::uint64_t>(img.rows()));
  w.put(static_cast<std::uint64_t>(img.cols()));
  w.put(img.dynamic_range_db);
  w.put(static_cast<std::uint8_t>(img.all_zero_input));
  w.put_f64s(img.pixels_db.data);
  write_bytes(path, w.bytes());
}

BModeImage read_db_image(const fs::path& path) {
  ByteReader r(read_bytes(path), path.string());
  expect_magic(r, kImageMagic, path);
  BModeImage img;
  const auto rows = r.get<std::uint64_t>();
  const auto cols = r.get<std::uint64_t>();
  img.dynamic_range_db = r.get<double>();
  img.all_zero_input = r.get<std::uint8_t>() != 0;
  img.pixels_db = Grid(rows, cols);
  r.get_f64s(img.pixels_db.data);
  if (!r.at_end()) throw Error(path.string() + ": trailing bytes after image");
  return img;
}

std::uint8_t db_to_gray(double db, double dynamic_range_db) {
  if (!(dynamic_range_db > 0)) throw Error("dynamic range must be > 0");
  const double t = std::clamp((db + dynamic_range_db) / dynamic_range_db, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(255.0 * t));
}

void write_pgm(const fs::path& path, const BModeImage& img) {
  std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) +
                    "\n255\n";
  out.reserve(out.size() + img.pixels_db.data.size());
  for (double v : img.pixels_db.data)
    out.push_back(static_cast<char>(db_to_gray(v, img.dynamic_range_db)));
  write_bytes(path, out);
}

std::tuple<std::size_t, std::size_t, std::vector<std::uint8_t>> read_pgm(const fs::path& path) {
  const std::string bytes = read_bytes(path);
  std::istringstream ss(bytes);
  std::string magic;
  std::size_t cols = 0, rows = 0;
  int maxval = 0;
  ss >> magic >> cols >> rows >> maxval;
  if (!ss || magic != "P5" || maxval != 255) throw Error(path.string() + ": not an 8-bit P5 PGM");
  const auto start = static_cast<std::size_t>(ss.tellg()) + 1;
  if (bytes.size() != start + rows * cols) throw Error(path.string() + ": PGM size mismatch");
  std::vector<std::uint8_t> px(bytes.begin() + static_cast<std::ptrdiff_t>(start), bytes.end());
  return {rows, cols, std::move(px)};
}

std::string format_metric(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "factor,method,cnr,gcnr,psnr,ssim\n";
  for (const auto& r : rows) {
    out += r.factor + "," + r.method + ",";
    out += r.has_roi_metrics ? format_metric(r.cnr) + "," + format_metric(r.gcnr) : ",";
    out += "," + format_metric(r.psnr) + "," + format_metric(r.ssim) + "\n";
  }
  return out;
}

std::string loss_csv(const std::vector<double>& train, const std::vector<double>& val,
                     const nn::TrainConfig& cfg) {
  std::string out = "epoch,lr,train_loss,val_loss\n";
  char buf[128];
  for (std::size_t e = 0; e < train.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.17g,", e, nn::lr_at(static_cast<double>(e), cfg),
                  train[e]);
    out += buf;
    if (e < val.size()) {
      std::snprintf(buf, sizeof buf, "%.17g", val[e]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text); }
void append_text(const fs::path& path, const std::string& text) { write_bytes(path, text, true); }
std::string read_text(const fs::path& path) { return read_bytes(path); }

// ---------------------------------------------------------------------------

DirLock::DirLock(const fs::path& dir) : path_(dir / kFileName) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw Error(dir.string() + " is locked by another command (remove " + path_.string() +
                  " if stale)");
    throw Error("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

DirLock::~DirLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

}  // namespace deepbf::io
