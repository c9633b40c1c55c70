// Straightforward single-threaded delay-and-sum, pixel by pixel. The parallel
// kernels in das.cpp must reproduce these results bit for bit.
#include <cmath>

#include "deepbf/das.hpp"
#include "deepbf/sim.hpp"

namespace deepbf::serial {

BeamformedLines das_focused(const RFCube& raw, const ProbeConfig& probe, const SamplingMask* mask) {
  if (raw.event_kind() != EventKind::FocusedTe) throw Error("das_focused needs a focused_te cube");
  if (raw.n_rx() != static_cast<std::size_t>(probe.n_rx_focused))
    throw Error("cube receive channels do not match probe.n_rx_focused");
  if (mask && (mask->n_planes != raw.n_depth() || mask->width != raw.n_rx()))
    throw Error("channel mask geometry does not match the cube");

  BeamformedLines out;
  out.rf_sum = Grid(raw.n_depth(), raw.n_events());
  out.lateral_m = raw.event_params();
  out.depth_start_m = raw.depth_start_m();
  out.depth_step_m = raw.depth_step_m();

  const double c = probe.sound_speed_m_s;
  const double t0 = 2.0 * raw.depth_start_m() / c;
  const std::size_t stride = raw.n_rx() * raw.n_events();
  for (std::size_t d = 0; d < raw.n_depth(); ++d) {
    const double z = raw.depth_start_m() + static_cast<double>(d) * raw.depth_step_m();
    for (std::size_t k = 0; k < raw.n_events(); ++k) {
      const int e0 = probe.first_rx_element(static_cast<int>(k));
      double acc = 0.0;
      for (std::size_t r = 0; r < raw.n_rx(); ++r) {
        if (mask && !mask->active(d, r)) continue;
        const double rx_x = probe.element_x(e0 + static_cast<int>(r));
        const double tau = rx_delay_focused(z, rx_x, raw.event_params()[k], c);
        acc += sample_at(raw.ptr(0, r, k), stride, raw.n_depth(), (tau - t0) * probe.sampling_freq_hz);
      }
      out.rf_sum(d, k) = acc;
    }
  }
  return out;
}

BeamformedLines das_planewave_compound(const std::vector<RFCube>& cubes, const ProbeConfig& probe,
                                       const std::vector<double>& angles,
                                       const SamplingMask& pw_subset,
                                       const SamplingMask* channel_mask) {
  if (cubes.empty() || cubes.size() != angles.size() || pw_subset.width != angles.size())
    throw Error("need one plane-wave cube per angle");
  if (pw_subset.popcount(0) == 0) throw Error("empty plane-wave subset");
  const RFCube& ref = cubes[0];

  BeamformedLines out;
  out.rf_sum = Grid(ref.n_depth(), static_cast<std::size_t>(probe.n_elements));
  for (int e = 0; e < probe.n_elements; ++e) out.lateral_m.push_back(probe.element_x(e));
  out.depth_start_m = ref.depth_start_m();
  out.depth_step_m = ref.depth_step_m();

  const double c = probe.sound_speed_m_s;
  const double t0 = 2.0 * ref.depth_start_m() / c;
  for (std::size_t d = 0; d < ref.n_depth(); ++d) {
    const double z = ref.depth_start_m() + static_cast<double>(d) * ref.depth_step_m();
    for (std::size_t j = 0; j < out.n_lateral(); ++j) {
      double acc = 0.0;
      for (std::size_t a = 0; a < angles.size(); ++a) {
        if (!pw_subset.active(0, a)) continue;
        double angle_sum = 0.0;
        for (std::size_t r = 0; r < ref.n_rx(); ++r) {
          if (channel_mask && !channel_mask->active(d, r)) continue;
          const double rx_x = probe.element_x(planewave_rx_element(probe, static_cast<int>(r)));
          const double tau = rx_delay_planewave(z, out.lateral_m[j], rx_x, angles[a], c);
          angle_sum += sample_at(cubes[a].ptr(0, r, 0), ref.n_rx(), ref.n_depth(),
                                 (tau - t0) * probe.sampling_freq_hz);
        }
        acc += angle_sum;
      }
      out.rf_sum(d, j) = acc;
    }
  }
  return out;
}

}  // namespace deepbf::serial
