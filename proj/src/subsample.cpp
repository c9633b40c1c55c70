#include "deepbf/subsample.hpp"

#include <cmath>
#include <numeric>

#include "deepbf/rng.hpp"

namespace deepbf {

const char* to_string(MaskKind kind) {
  return kind == MaskKind::FocusedChannels ? "focused_channels" : "pw_angles";
}

MaskKind mask_kind_from_string(const std::string& s) {
  if (s == "focused_channels") return MaskKind::FocusedChannels;
  if (s == "pw_angles") return MaskKind::PwAngles;
  throw Error("unknown mask kind '" + s + "'");
}

std::vector<int> SamplingMask::active_indices(std::size_t plane) const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < width; ++i)
    if (active(plane, i)) idx.push_back(static_cast<int>(i));
  return idx;
}

std::size_t SamplingMask::popcount(std::size_t plane) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < width; ++i) n += active(plane, i) ? 1 : 0;
  return n;
}

void SamplingMask::validate() const {
  if (bits.size() != n_planes * width) throw Error("mask bitmap size mismatch");
  if (n_keep < 1 || static_cast<std::size_t>(n_keep) > width) throw Error("mask n_keep out of range");
  if (kind == MaskKind::PwAngles && n_planes != 1) throw Error("angle mask must have one plane");
  const auto [c0, c1] = center_channels(static_cast<int>(width));
  for (std::size_t p = 0; p < n_planes; ++p) {
    if (popcount(p) != static_cast<std::size_t>(n_keep))
      throw Error("mask plane " + std::to_string(p) + " does not keep exactly n_keep entries");
    if (kind == MaskKind::FocusedChannels && (!active(p, c0) || !active(p, c1)))
      throw Error("mask plane " + std::to_string(p) + " drops a centre channel");
  }
}

SamplingMask make_focused_mask(std::size_t n_depth, int n_rx, int n_keep, std::uint64_t rng_seed) {
  if (n_depth == 0) throw Error("mask needs at least one depth plane");
  if (n_rx < 2) throw Error("mask aperture must have at least 2 channels");
  if (n_keep < 2) throw Error("n_keep must be >= 2 (the centre pair is always kept)");
  if (n_keep > n_rx) throw Error("n_keep exceeds the receive aperture");

  SamplingMask m;
  m.kind = MaskKind::FocusedChannels;
  m.n_planes = n_depth;
  m.width = static_cast<std::size_t>(n_rx);
  m.n_keep = n_keep;
  m.rng_seed = rng_seed;
  m.bits.assign(m.n_planes * m.width, 0);

  const auto [c0, c1] = center_channels(n_rx);
  std::vector<int> others;
  for (int r = 0; r < n_rx; ++r)
    if (r != c0 && r != c1) others.push_back(r);

  Rng rng(rng_seed);
  std::vector<int> pool(others.size());
  const auto draws = static_cast<std::size_t>(n_keep - 2);
  for (std::size_t p = 0; p < n_depth; ++p) {
    std::uint8_t* row = &m.bits[p * m.width];
    row[c0] = row[c1] = 1;
    // Partial Fisher-Yates over a fresh copy so each plane is an independent draw.
    pool = others;
    for (std::size_t i = 0; i < draws; ++i) {
      const std::size_t j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
      row[pool[i]] = 1;
    }
  }
  return m;
}

SamplingMask make_pw_subset(int n_pw, int n_keep) {
  if (n_pw < 1) throw Error("n_pw must be >= 1");
  if (n_keep < 1 || n_keep > n_pw) throw Error("n_keep must lie in [1, n_pw]");
  if (n_keep % 2 == 0) throw Error("plane-wave subsets must keep an odd number of angles");
  if (n_pw % 2 == 0) throw Error("plane-wave subsets need an odd angle count with a centre angle");

  SamplingMask m;
  m.kind = MaskKind::PwAngles;
  m.n_planes = 1;
  m.width = static_cast<std::size_t>(n_pw);
  m.n_keep = n_keep;
  m.bits.assign(m.width, 0);

  const int center = n_pw / 2;
  const int half = n_keep / 2;
  if (half == 0) {
    m.bits[center] = 1;
    return m;
  }
  const double stride = static_cast<double>(center) / half;
  for (int i = -half; i <= half; ++i) {
    const auto offset = static_cast<int>(std::lround(std::abs(i) * stride));
    m.bits[center + (i < 0 ? -offset : offset)] = 1;
  }
  return m;
}

SamplingMask full_channel_mask(std::size_t n_depth, int n_rx) {
  SamplingMask m;
  m.kind = MaskKind::FocusedChannels;
  m.n_planes = n_depth;
  m.width = static_cast<std::size_t>(n_rx);
  m.n_keep = n_rx;
  m.bits.assign(n_depth * m.width, 1);
  return m;
}

RFCube apply_mask(const RFCube& cube, const SamplingMask& mask) {
  RFCube out = cube;
  const std::size_t n_ev = cube.n_events();
  if (mask.kind == MaskKind::FocusedChannels) {
    if (mask.n_planes != cube.n_depth() || mask.width != cube.n_rx())
      throw Error("channel mask geometry does not match the cube");
#pragma omp parallel for
    for (std::ptrdiff_t d = 0; d < static_cast<std::ptrdiff_t>(cube.n_depth()); ++d)
      for (std::size_t r = 0; r < cube.n_rx(); ++r)
        if (!mask.active(d, r))
          for (std::size_t e = 0; e < n_ev; ++e) out.at(d, r, e) = 0.0;
  } else {
    if (mask.width != n_ev) throw Error("angle mask width does not match the cube's event count");
#pragma omp parallel for
    for (std::ptrdiff_t d = 0; d < static_cast<std::ptrdiff_t>(cube.n_depth()); ++d)
      for (std::size_t r = 0; r < cube.n_rx(); ++r)
        for (std::size_t e = 0; e < n_ev; ++e)
          if (!mask.active(0, e)) out.at(d, r, e) = 0.0;
  }
  return out;
}

}  // namespace deepbf
