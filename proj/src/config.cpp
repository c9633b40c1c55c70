#include "deepbf/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

namespace deepbf {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out))
    throw Error("expected a number, got '" + v + "'");
  return out;
}

template <typename Int>
Int parse_int(const std::string& v) {
  Int out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw Error("expected an integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("expected true/false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item)));
  if (out.empty()) throw Error("expected a comma-separated list");
  return out;
}

// Shortest representation that parses back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

struct Field {
  const char* key;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

#define DBF_DOUBLE(k, member)                                                   \
  Field {                                                                       \
    k, [](Config& c, const std::string& v) { c.member = parse_double(v); },     \
        [](const Config& c) { return fmt(c.member); }                           \
  }
#define DBF_INT(k, member)                                                                    \
  Field {                                                                                     \
    k, [](Config& c, const std::string& v) { c.member = parse_int<decltype(c.member)>(v); }, \
        [](const Config& c) { return std::to_string(c.member); }                              \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      DBF_INT("seed", seed),
      DBF_DOUBLE("probe.carrier_freq_hz", probe.carrier_freq_hz),
      DBF_DOUBLE("probe.sampling_freq_hz", probe.sampling_freq_hz),
      DBF_INT("probe.n_elements", probe.n_elements),
      DBF_INT("probe.n_tx_elements", probe.n_tx_elements),
      DBF_INT("probe.n_te_focused", probe.n_te_focused),
      DBF_INT("probe.n_rx_focused", probe.n_rx_focused),
      DBF_INT("probe.n_rx_planewave", probe.n_rx_planewave),
      DBF_INT("probe.n_planewaves", probe.n_planewaves),
      DBF_DOUBLE("probe.pitch_m", probe.pitch_m),
      DBF_DOUBLE("probe.element_width_m", probe.element_width_m),
      DBF_DOUBLE("probe.sound_speed_m_s", probe.sound_speed_m_s),
      DBF_DOUBLE("pulse.fractional_bandwidth", pulse.fractional_bandwidth),
      DBF_DOUBLE("pulse.cutoff_sigmas", pulse.cutoff_sigmas),
      DBF_DOUBLE("phantom.lateral_min_m", phantom.lateral_min_m),
      DBF_DOUBLE("phantom.lateral_max_m", phantom.lateral_max_m),
      DBF_DOUBLE("phantom.depth_margin_m", phantom.depth_margin_m),
      DBF_DOUBLE("phantom.density_per_m2", phantom.density_per_m2),
      DBF_INT("phantom.cyst_count", phantom.cyst_count),
      DBF_DOUBLE("phantom.cyst_radius_m", phantom.cyst_radius_m),
      DBF_DOUBLE("phantom.cyst_scale", phantom.cyst_scale),
      Field{"sim.mode",
            [](Config& c, const std::string& v) { c.sim.mode = nn::variant_from_string(v); },
            [](const Config& c) { return std::string(nn::to_string(c.sim.mode)); }},
      DBF_INT("sim.n_depth", sim.n_depth),
      DBF_DOUBLE("sim.depth_start_m", sim.depth_start_m),
      DBF_DOUBLE("sim.pw_max_angle_deg", sim.pw_max_angle_deg),
      DBF_DOUBLE("sim.noise_snr_db", sim.noise_snr_db),
      DBF_INT("sim.n_train", sim.n_train),
      DBF_INT("sim.n_val", sim.n_val),
      DBF_INT("sim.n_test", sim.n_test),
      DBF_INT("model.width_base", model.width_base),
      DBF_INT("model.planes_per_frame", model.planes_per_frame),
      DBF_INT("model.crop_width", model.crop_width),
      DBF_DOUBLE("model.factor", model.factor),
      DBF_DOUBLE("train.lr_start", train.lr_start),
      DBF_DOUBLE("train.lr_end", train.lr_end),
      DBF_DOUBLE("train.weight_decay", train.weight_decay),
      DBF_DOUBLE("train.momentum", train.momentum),
      DBF_INT("train.epochs", train.epochs),
      DBF_INT("train.batch_size", train.batch_size),
      DBF_INT("train.seed", train.seed),
      Field{"eval.factors",
            [](Config& c, const std::string& v) { c.eval.factors = parse_list(v); },
            [](const Config& c) {
              std::string s;
              for (double f : c.eval.factors) s += (s.empty() ? "" : ",") + fmt(f);
              return s;
            }},
      DBF_DOUBLE("eval.dynamic_range_db", eval.dynamic_range_db),
      DBF_INT("eval.batch_size", eval.batch_size),
      Field{"eval.use_roi",
            [](Config& c, const std::string& v) { c.eval.use_roi = parse_bool(v); },
            [](const Config& c) { return std::string(c.eval.use_roi ? "true" : "false"); }},
  };
  return table;
}

#undef DBF_DOUBLE
#undef DBF_INT

void require(bool ok, const std::string& msg) {
  if (!ok) throw Error(msg);
}

}  // namespace

void Config::validate() const {
  probe.validate();
  Pulse p = pulse;
  p.center_freq_hz = probe.carrier_freq_hz;
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(std::string("pulse: ") + e.what());
  }
  require(phantom.lateral_max_m > phantom.lateral_min_m,
          "phantom.lateral_max_m: must exceed phantom.lateral_min_m");
  require(phantom.depth_margin_m >= 0, "phantom.depth_margin_m: must be >= 0");
  require(phantom.density_per_m2 > 0, "phantom.density_per_m2: must be > 0");
  require(phantom.cyst_count >= 0, "phantom.cyst_count: must be >= 0");
  require(phantom.cyst_radius_m > 0, "phantom.cyst_radius_m: must be > 0");
  require(phantom.cyst_scale >= 0, "phantom.cyst_scale: must be >= 0");
  require(sim.n_depth > 0, "sim.n_depth: must be > 0");
  require(sim.depth_start_m > 0, "sim.depth_start_m: must be > 0");
  require(sim.pw_max_angle_deg >= 0 && sim.pw_max_angle_deg < 45,
          "sim.pw_max_angle_deg: must be in [0, 45)");
  require(sim.n_train + sim.n_val + sim.n_test > 0, "sim.n_train: dataset has no frames");
  require(model.width_base > 0, "model.width_base: must be > 0");
  require(model.factor == 0 || model.factor >= 1, "model.factor: must be 0 or >= 1");
  try {
    train.validate();
  } catch (const Error& e) {
    throw Error(std::string("train: ") + e.what());
  }
  require(!eval.factors.empty(), "eval.factors: must not be empty");
  for (double f : eval.factors) require(f >= 1, "eval.factors: factors must be >= 1");
  require(eval.dynamic_range_db > 0, "eval.dynamic_range_db: must be > 0");
  require(eval.batch_size > 0, "eval.batch_size: must be > 0");
}

void set_config_value(Config& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key != f.key) continue;
    try {
      f.set(cfg, value);
    } catch (const Error& e) {
      throw Error(key + ": " + e.what());
    }
    cfg.pulse.center_freq_hz = cfg.probe.carrier_freq_hz;
    return;
  }
  throw Error("unknown key '" + key + "'");
}

Config parse_config(const std::string& text, const std::string& source) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    if (eq == std::string::npos) throw Error(where + "expected 'key = value'");
    try {
      set_config_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(where + e.what());
    }
  }
  cfg.pulse.center_freq_hz = cfg.probe.carrier_freq_hz;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(source + ": " + e.what());
  }
  return cfg;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::vector<std::pair<std::string, std::string>> config_entries(const Config& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(cfg));
  return out;
}

std::string render_config(const Config& cfg) {
  std::string out;
  for (const auto& [k, v] : config_entries(cfg)) out += k + " = " + v + "\n";
  return out;
}

}  // namespace deepbf
