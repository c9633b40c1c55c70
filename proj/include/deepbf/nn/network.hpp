// The learned beamformer: a contracting convolutional network that collapses
// the receive-channel (focused) or plane-wave (planewave) axis of a three-plane
// input cube to a single row.
//
// Layout (every conv is 3x3 + BN + ReLU unless noted):
//   head      : `head_convs` stride-1 convs, in_channels -> w
//   stage s   : three stride-1 convs producing F, then a stride-(2,1) conv on
//               concat(stage input, F); the height halves (rounding up)
//   final     : 1x1 conv to out_channels, no BN / ReLU
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deepbf/nn/layers.hpp"

namespace deepbf::nn {

enum class Variant { Focused, Planewave };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct NetworkSpec {
  Variant variant = Variant::Focused;
  std::size_t in_channels = 3;
  std::size_t in_height = 64;
  std::size_t width_base = 32;
  std::size_t head_convs = 2;
  std::size_t stages = 6;
  std::size_t out_channels = 2;
  /// Double the feature width per stage (capped at max(64, width_base)).
  bool grow_width = false;

  /// Full-size networks: focused 3x64xW -> 2x1xW, planewave 3x31xW -> 1x1xW,
  /// both with 27 convolutions.
  static NetworkSpec deepbf(Variant variant, std::size_t width_base = 32);

  /// Smallest stage count that reduces `height` to 1.
  static std::size_t stages_for_height(std::size_t height);

  std::size_t conv_count() const { return head_convs + 4 * stages + 1; }
  std::size_t stage_width(std::size_t s) const;
  void validate() const;
  bool operator==(const NetworkSpec&) const = default;
};

/// One learnable parameter block and its gradient accumulator.
struct ParamRef {
  std::span<double> value;
  std::span<double> grad;
  bool weight_decay = true;
  std::string name;
};

/// Convolution, optionally followed by batch norm and ReLU.
struct ConvUnit {
  ConvGeometry geom;
  std::vector<double> weight, bias;
  std::vector<double> grad_weight, grad_bias;
  bool bn_relu = true;
  BatchNorm bn;

  // Train-mode caches.
  Tensor4 input;
  Tensor4 output;

  Tensor4 forward(const Tensor4& x, Mode mode);
  /// Gradient w.r.t. the cached input; accumulates parameter gradients.
  Tensor4 backward(const Tensor4& grad_out);
};

class Network {
 public:
  Network() = default;

  /// Xavier-initialized network, deterministic in seed.
  static Network build(const NetworkSpec& spec, std::uint64_t seed);

  const NetworkSpec& spec() const { return spec_; }
  std::vector<ConvUnit>& units() { return units_; }
  const std::vector<ConvUnit>& units() const { return units_; }
  std::size_t conv_count() const { return units_.size(); }

  /// Shape errors name the failing conv layer.
  Tensor4 forward(const Tensor4& x, Mode mode);
  /// Backpropagates through the last train-mode forward; returns the input gradient.
  Tensor4 backward(const Tensor4& grad_out);

  void zero_grad();
  std::vector<ParamRef> parameters();
  std::size_t parameter_count() const;

  /// Releases train-mode activation caches.
  void clear_cache();

 private:
  std::size_t head_end() const { return spec_.head_convs; }
  std::size_t stage_begin(std::size_t s) const { return spec_.head_convs + 4 * s; }

  NetworkSpec spec_;
  std::vector<ConvUnit> units_;
  std::vector<std::size_t> stage_in_channels_;
};

/// build_deepbf(variant, width_base, seed) = Network::build(NetworkSpec::deepbf(...), seed).
Network build_deepbf(Variant variant, std::size_t width_base, std::uint64_t seed);

}  // namespace deepbf::nn
