// Shared domain types: probe geometry, RF data cubes, IQ lines and B-mode images.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepbf {

/// Raised for any violated precondition or malformed input.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear-array transducer geometry and acquisition constants.
struct ProbeConfig {
  double carrier_freq_hz = 8.48e6;
  double sampling_freq_hz = 40e6;
  int n_elements = 192;
  int n_tx_elements = 128;
  int n_te_focused = 96;
  int n_rx_focused = 64;
  int n_rx_planewave = 192;
  int n_planewaves = 31;
  double pitch_m = 0.2e-3;
  double element_width_m = 0.14e-3;
  double sound_speed_m_s = 1540.0;

  /// Throws Error naming the first offending field.
  void validate() const;

  /// Axial distance covered by one pulse-echo sample.
  double depth_step_m() const { return sound_speed_m_s / (2.0 * sampling_freq_hz); }

  /// Lateral position of element e, with the array centred on x = 0.
  double element_x(int e) const { return (e - 0.5 * (n_elements - 1)) * pitch_m; }

  /// Lateral position of focused scan line k. Lines are spread evenly over the
  /// array so that each sits midway between its two centre receive channels.
  double scanline_x(int k) const;

  /// Element index of receive channel 0 for scan line k. Channel j maps to
  /// element first_rx_element(k) + j; elements outside [0, n_elements) are absent.
  int first_rx_element(int k) const;

  bool operator==(const ProbeConfig&) const = default;
};

ProbeConfig default_probe();

double depth_index_to_meters(std::ptrdiff_t i, const ProbeConfig& probe, double depth_start_m = 0.0);
/// Nearest depth index for a depth in meters.
std::ptrdiff_t meters_to_depth_index(double depth_m, const ProbeConfig& probe,
                                     double depth_start_m = 0.0);

/// n_full / n_active.
double subsampling_factor(int n_active, int n_full);
/// Factor rounded to one decimal for reports ("1", "2.7", "16").
std::string subsampling_label(int n_active, int n_full);

enum class EventKind { FocusedTe, PlaneWave };

const char* to_string(EventKind kind);
EventKind event_kind_from_string(const std::string& s);

/// Per-channel RF samples indexed [depth][rx][event], row-major.
class RFCube {
 public:
  RFCube() = default;
  RFCube(std::size_t n_depth, std::size_t n_rx, std::size_t n_events, EventKind kind,
         double depth_start_m, double depth_step_m, std::vector<double> event_params);

  std::size_t n_depth() const { return n_depth_; }
  std::size_t n_rx() const { return n_rx_; }
  std::size_t n_events() const { return n_events_; }
  EventKind event_kind() const { return kind_; }
  double depth_start_m() const { return depth_start_m_; }
  double depth_step_m() const { return depth_step_m_; }
  /// Scan-line lateral position (m) or steering angle (rad) per event.
  const std::vector<double>& event_params() const { return event_params_; }

  std::size_t index(std::size_t d, std::size_t r, std::size_t e) const {
    return (d * n_rx_ + r) * n_events_ + e;
  }
  double& at(std::size_t d, std::size_t r, std::size_t e) { return samples_[index(d, r, e)]; }
  double at(std::size_t d, std::size_t r, std::size_t e) const { return samples_[index(d, r, e)]; }
  const double* ptr(std::size_t d, std::size_t r, std::size_t e) const {
    return samples_.data() + index(d, r, e);
  }

  std::span<double> samples() { return samples_; }
  std::span<const double> samples() const { return samples_; }

  /// Checks shape/metadata agreement and finiteness.
  void validate() const;

  bool operator==(const RFCube&) const = default;

 private:
  std::size_t n_depth_ = 0;
  std::size_t n_rx_ = 0;
  std::size_t n_events_ = 0;
  EventKind kind_ = EventKind::FocusedTe;
  double depth_start_m_ = 0.0;
  double depth_step_m_ = 0.0;
  std::vector<double> event_params_;
  std::vector<double> samples_;
};

/// Row-major real matrix.
struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Grid() = default;
  Grid(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  bool operator==(const Grid&) const = default;
};

struct IQLine {
  std::vector<double> i_component;
  std::vector<double> q_component;

  std::size_t size() const { return i_component.size(); }
  void validate() const;
};

/// Log-compressed envelope, dB relative to the frame maximum.
struct BModeImage {
  Grid pixels_db;  // [n_depth x n_lateral]
  double dynamic_range_db = 60.0;
  /// Set when the source envelope was identically zero.
  bool all_zero_input = false;

  std::size_t rows() const { return pixels_db.rows; }
  std::size_t cols() const { return pixels_db.cols; }
  double operator()(std::size_t r, std::size_t c) const { return pixels_db(r, c); }
};

}  // namespace deepbf
