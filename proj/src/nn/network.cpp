#include "deepbf/nn/network.hpp"

#include <algorithm>

namespace deepbf::nn {

const char* to_string(Variant v) { return v == Variant::Focused ? "focused" : "planewave"; }

Variant variant_from_string(const std::string& s) {
  if (s == "focused") return Variant::Focused;
  if (s == "planewave") return Variant::Planewave;
  throw Error("unknown variant '" + s + "' (expected focused or planewave)");
}

std::size_t NetworkSpec::stages_for_height(std::size_t height) {
  std::size_t s = 0;
  while (height > 1) {
    height = (height + 1) / 2;
    ++s;
  }
  return s;
}

NetworkSpec NetworkSpec::deepbf(Variant variant, std::size_t width_base) {
  NetworkSpec s;
  s.variant = variant;
  s.width_base = width_base;
  if (variant == Variant::Focused) {
    s.in_height = 64;
    s.stages = 6;
    s.head_convs = 2;
    s.out_channels = 2;
  } else {
    // Five reductions (31 -> 16 -> 8 -> 4 -> 2 -> 1); the head takes the
    // remaining convolutions to reach 27.
    s.in_height = 31;
    s.stages = 5;
    s.head_convs = 6;
    s.out_channels = 1;
  }
  return s;
}

std::size_t NetworkSpec::stage_width(std::size_t s) const {
  if (!grow_width) return width_base;
  const std::size_t cap = std::max<std::size_t>(64, width_base);
  std::size_t w = width_base;
  for (std::size_t i = 0; i < s && w < cap; ++i) w = std::min(cap, w * 2);
  return w;
}

void NetworkSpec::validate() const {
  if (in_channels == 0 || in_height == 0 || width_base == 0 || out_channels == 0)
    throw Error("network spec: sizes must be > 0");
  if (head_convs == 0) throw Error("network spec: need at least one head convolution");
  if (stages != stages_for_height(in_height))
    throw Error("network spec: " + std::to_string(stages) + " stages do not reduce height " +
                std::to_string(in_height) + " to 1");
}

Tensor4 ConvUnit::forward(const Tensor4& x, Mode mode) {
  Tensor4 y = conv_forward(x, weight, bias, geom);
  if (bn_relu) y = relu_forward(bn.forward(y, mode));
  if (mode == Mode::Train) {
    input = x;
    output = y;
  }
  return y;
}

Tensor4 ConvUnit::backward(const Tensor4& grad_out) {
  Tensor4 g = grad_out;
  if (bn_relu) g = bn.backward(relu_backward(output, g));
  ConvGrads grads = conv_backward(input, weight, g, geom);
  for (std::size_t i = 0; i < grad_weight.size(); ++i) grad_weight[i] += grads.grad_kernel[i];
  for (std::size_t i = 0; i < grad_bias.size(); ++i) grad_bias[i] += grads.grad_bias[i];
  return std::move(grads.grad_x);
}

namespace {

ConvUnit make_unit(const ConvGeometry& g, bool bn_relu, Rng& rng) {
  ConvUnit u;
  u.geom = g;
  const std::size_t taps = g.kernel_h * g.kernel_w;
  u.weight = xavier_init(g.kernel_size(), g.in_channels * taps, g.out_channels * taps, rng);
  u.bias.assign(g.out_channels, 0.0);
  u.grad_weight.assign(u.weight.size(), 0.0);
  u.grad_bias.assign(u.bias.size(), 0.0);
  u.bn_relu = bn_relu;
  if (bn_relu) u.bn = BatchNorm(g.out_channels);
  return u;
}

}  // namespace

Network Network::build(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Network net;
  net.spec_ = spec;
  Rng rng(seed);

  std::size_t c = spec.in_channels;
  const std::size_t w0 = spec.stage_width(0);
  for (std::size_t i = 0; i < spec.head_convs; ++i) {
    net.units_.push_back(make_unit(ConvGeometry::same(c, w0, 3), true, rng));
    c = w0;
  }
  for (std::size_t s = 0; s < spec.stages; ++s) {
    const std::size_t w = spec.stage_width(s);
    net.stage_in_channels_.push_back(c);
    net.units_.push_back(make_unit(ConvGeometry::same(c, w, 3), true, rng));
    net.units_.push_back(make_unit(ConvGeometry::same(w, w, 3), true, rng));
    net.units_.push_back(make_unit(ConvGeometry::same(w, w, 3), true, rng));
    net.units_.push_back(make_unit(ConvGeometry::same(c + w, w, 3, 2), true, rng));
    c = w;
  }
  net.units_.push_back(make_unit(ConvGeometry::same(c, spec.out_channels, 1), false, rng));
  return net;
}

Network build_deepbf(Variant variant, std::size_t width_base, std::uint64_t seed) {
  return Network::build(NetworkSpec::deepbf(variant, width_base), seed);
}

namespace {

Tensor4 run_unit(ConvUnit& u, std::size_t index, const Tensor4& x, Mode mode) {
  try {
    return u.forward(x, mode);
  } catch (const Error& e) {
    throw Error("layer " + std::to_string(index) + " (input " + x.shape().str() + "): " + e.what());
  }
}

}  // namespace

Tensor4 Network::forward(const Tensor4& x, Mode mode) {
  if (units_.empty()) throw Error("network has no layers");
  if (x.c() != spec_.in_channels || x.h() != spec_.in_height)
    throw Error("layer 0: expected input [N x " + std::to_string(spec_.in_channels) + " x " +
                std::to_string(spec_.in_height) + " x W], got " + x.shape().str());

  Tensor4 h = x;
  std::size_t i = 0;
  for (; i < head_end(); ++i) h = run_unit(units_[i], i, h, mode);
  for (std::size_t s = 0; s < spec_.stages; ++s) {
    const Tensor4 stage_in = h;
    for (std::size_t k = 0; k < 3; ++k, ++i) h = run_unit(units_[i], i, h, mode);
    h = run_unit(units_[i], i, concat_channels(stage_in, h), mode);
    ++i;
  }
  return run_unit(units_[i], i, h, mode);
}

Tensor4 Network::backward(const Tensor4& grad_out) {
  if (units_.back().output.size() == 0 && units_.back().input.size() == 0)
    throw Error("backward called without a train-mode forward");
  Tensor4 g = units_.back().backward(grad_out);
  for (std::size_t s = spec_.stages; s-- > 0;) {
    const std::size_t b = stage_begin(s);
    auto [g_in, g_feat] = split_channels(units_[b + 3].backward(g), stage_in_channels_[s]);
    for (std::size_t k = 3; k-- > 0;) g_feat = units_[b + k].backward(g_feat);
    for (std::size_t j = 0; j < g_in.size(); ++j) g_in.data()[j] += g_feat.data()[j];
    g = std::move(g_in);
  }
  for (std::size_t k = head_end(); k-- > 0;) g = units_[k].backward(g);
  return g;
}

void Network::zero_grad() {
  for (auto& u : units_) {
    std::fill(u.grad_weight.begin(), u.grad_weight.end(), 0.0);
    std::fill(u.grad_bias.begin(), u.grad_bias.end(), 0.0);
    std::fill(u.bn.grad_scale.begin(), u.bn.grad_scale.end(), 0.0);
    std::fill(u.bn.grad_shift.begin(), u.bn.grad_shift.end(), 0.0);
  }
}

std::vector<ParamRef> Network::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < units_.size(); ++i) {
    auto& u = units_[i];
    const std::string p = "conv" + std::to_string(i);
    out.push_back({u.weight, u.grad_weight, true, p + ".weight"});
    out.push_back({u.bias, u.grad_bias, true, p + ".bias"});
    if (u.bn_relu) {
      out.push_back({u.bn.scale, u.bn.grad_scale, false, p + ".bn_scale"});
      out.push_back({u.bn.shift, u.bn.grad_shift, false, p + ".bn_shift"});
    }
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& u : units_) n += u.weight.size() + u.bias.size() + u.bn.scale.size() + u.bn.shift.size();
  return n;
}

void Network::clear_cache() {
  for (auto& u : units_) {
    u.input = Tensor4();
    u.output = Tensor4();
  }
}

}  // namespace deepbf::nn
