// Receive-channel and plane-wave-angle subsampling patterns.
#pragma once

#include <cstdint>
#include <vector>

#include "deepbf/core.hpp"

namespace deepbf {

enum class MaskKind {
  /// One boolean row over the receive aperture per depth plane.
  FocusedChannels,
  /// A single boolean row over the plane-wave angles.
  PwAngles,
};

const char* to_string(MaskKind kind);
MaskKind mask_kind_from_string(const std::string& s);

struct SamplingMask {
  MaskKind kind = MaskKind::FocusedChannels;
  std::size_t n_planes = 0;
  std::size_t width = 0;
  int n_keep = 0;
  std::uint64_t rng_seed = 0;
  std::vector<std::uint8_t> bits;  // [n_planes x width], 0 or 1

  bool active(std::size_t plane, std::size_t idx) const { return bits[plane * width + idx] != 0; }
  std::vector<int> active_indices(std::size_t plane = 0) const;
  std::size_t popcount(std::size_t plane) const;

  /// Checks the kind-specific invariants (exact n_keep per row, centre pair kept).
  void validate() const;

  bool operator==(const SamplingMask&) const = default;
};

/// The two middle channels of an n_rx aperture.
inline std::pair<int, int> center_channels(int n_rx) { return {n_rx / 2 - 1, n_rx / 2}; }

/// Fresh random pattern per depth plane: the two centre channels are always
/// kept and n_keep - 2 others are drawn without replacement.
SamplingMask make_focused_mask(std::size_t n_depth, int n_rx, int n_keep, std::uint64_t rng_seed);

/// Evenly spaced angle indices, symmetric about the centre angle. n_keep must be odd.
SamplingMask make_pw_subset(int n_pw, int n_keep);

/// Zeroes inactive samples. Channel masks act on (depth plane, rx) across all
/// events; angle masks zero whole events of a stacked [depth x rx x angle] cube.
RFCube apply_mask(const RFCube& cube, const SamplingMask& mask);

/// Full-aperture mask (every channel on every plane).
SamplingMask full_channel_mask(std::size_t n_depth, int n_rx);

}  // namespace deepbf
