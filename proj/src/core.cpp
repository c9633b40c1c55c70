#include "deepbf/core.hpp"

#include <cmath>
#include <cstdio>

namespace deepbf {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(what);
}

double line_center_index(const ProbeConfig& p, int k) {
  return (k + 0.5) * static_cast<double>(p.n_elements) / p.n_te_focused - 0.5;
}

}  // namespace

void ProbeConfig::validate() const {
  require(carrier_freq_hz > 0, "probe.carrier_freq_hz must be > 0");
  require(sampling_freq_hz > 0, "probe.sampling_freq_hz must be > 0");
  require(pitch_m > 0, "probe.pitch_m must be > 0");
  require(element_width_m > 0, "probe.element_width_m must be > 0");
  require(sound_speed_m_s > 0, "probe.sound_speed_m_s must be > 0");
  require(n_elements > 0, "probe.n_elements must be > 0");
  require(n_tx_elements > 0, "probe.n_tx_elements must be > 0");
  require(n_rx_focused > 0, "probe.n_rx_focused must be > 0");
  require(n_te_focused > 0, "probe.n_te_focused must be > 0");
  require(n_rx_planewave > 0 && n_rx_planewave <= n_elements,
          "probe.n_rx_planewave must be in [1, n_elements]");
  require(n_planewaves > 0, "probe.n_planewaves must be > 0");
  require(n_rx_focused <= n_tx_elements, "probe.n_rx_focused must be <= n_tx_elements");
  require(n_tx_elements <= n_elements, "probe.n_tx_elements must be <= n_elements");
  require(sampling_freq_hz >= 2.0 * carrier_freq_hz,
          "probe.sampling_freq_hz must be >= 2 * carrier_freq_hz");
}

double ProbeConfig::scanline_x(int k) const {
  return (line_center_index(*this, k) - 0.5 * (n_elements - 1)) * pitch_m;
}

int ProbeConfig::first_rx_element(int k) const {
  return static_cast<int>(std::floor(line_center_index(*this, k))) - (n_rx_focused / 2 - 1);
}

ProbeConfig default_probe() { return ProbeConfig{}; }

double depth_index_to_meters(std::ptrdiff_t i, const ProbeConfig& probe, double depth_start_m) {
  if (i < 0) throw Error("depth index must be >= 0");
  return depth_start_m + static_cast<double>(i) * probe.depth_step_m();
}

std::ptrdiff_t meters_to_depth_index(double depth_m, const ProbeConfig& probe,
                                     double depth_start_m) {
  return static_cast<std::ptrdiff_t>(std::llround((depth_m - depth_start_m) / probe.depth_step_m()));
}

double subsampling_factor(int n_active, int n_full) {
  if (n_active < 1 || n_active > n_full)
    throw Error("subsampling_factor requires 1 <= n_active <= n_full");
  return static_cast<double>(n_full) / n_active;
}

std::string subsampling_label(int n_active, int n_full) {
  const double f = std::round(subsampling_factor(n_active, n_full) * 10.0) / 10.0;
  char buf[32];
  if (f == std::floor(f))
    std::snprintf(buf, sizeof buf, "%.0f", f);
  else
    std::snprintf(buf, sizeof buf, "%.1f", f);
  return buf;
}

const char* to_string(EventKind kind) {
  return kind == EventKind::FocusedTe ? "focused_te" : "planewave_angle";
}

EventKind event_kind_from_string(const std::string& s) {
  if (s == "focused_te") return EventKind::FocusedTe;
  if (s == "planewave_angle") return EventKind::PlaneWave;
  throw Error("unknown event kind '" + s + "'");
}

RFCube::RFCube(std::size_t n_depth, std::size_t n_rx, std::size_t n_events, EventKind kind,
               double depth_start_m, double depth_step_m, std::vector<double> event_params)
    : n_depth_(n_depth),
      n_rx_(n_rx),
      n_events_(n_events),
      kind_(kind),
      depth_start_m_(depth_start_m),
      depth_step_m_(depth_step_m),
      event_params_(std::move(event_params)),
      samples_(n_depth * n_rx * n_events, 0.0) {
  if (n_depth == 0 || n_rx == 0 || n_events == 0) throw Error("RFCube dimensions must be > 0");
  if (event_params_.size() != n_events) throw Error("RFCube event_params size != n_events");
  if (!(depth_step_m > 0)) throw Error("RFCube depth_step_m must be > 0");
}

void RFCube::validate() const {
  require(samples_.size() == n_depth_ * n_rx_ * n_events_, "RFCube sample count mismatch");
  require(event_params_.size() == n_events_, "RFCube event_params size mismatch");
  for (double v : samples_) require(std::isfinite(v), "RFCube contains non-finite samples");
}

void IQLine::validate() const {
  require(i_component.size() == q_component.size(), "IQLine components differ in length");
  for (std::size_t k = 0; k < i_component.size(); ++k)
    require(std::isfinite(i_component[k]) && std::isfinite(q_component[k]),
            "IQLine contains non-finite values");
}

}  // namespace deepbf
