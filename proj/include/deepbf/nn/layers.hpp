// Layer kernels: 2-D convolution, batch normalization, ReLU and channel
// concatenation, each with an exact backward pass.
#pragma once

#include <cstdint>
#include <vector>

#include "deepbf/nn/tensor.hpp"
#include "deepbf/rng.hpp"

namespace deepbf::nn {

/// Cross-correlation geometry. Kernel layout is [out][in][kh][kw].
struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 3;
  std::size_t kernel_w = 3;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  std::size_t pad_h = 1;
  std::size_t pad_w = 1;

  /// "Same" zero padding for odd kernels.
  static ConvGeometry same(std::size_t in, std::size_t out, std::size_t k, std::size_t stride_h = 1);

  std::size_t kernel_size() const { return out_channels * in_channels * kernel_h * kernel_w; }
  std::size_t out_h(std::size_t h) const { return (h + 2 * pad_h - kernel_h) / stride_h + 1; }
  std::size_t out_w(std::size_t w) const { return (w + 2 * pad_w - kernel_w) / stride_w + 1; }
  Shape4 out_shape(const Shape4& in) const { return {in.n, out_channels, out_h(in.h), out_w(in.w)}; }
  bool operator==(const ConvGeometry&) const = default;
};

struct ConvGrads {
  Tensor4 grad_x;
  std::vector<double> grad_kernel;
  std::vector<double> grad_bias;
};

Tensor4 conv_forward(const Tensor4& x, const std::vector<double>& kernel,
                     const std::vector<double>& bias, const ConvGeometry& g);

ConvGrads conv_backward(const Tensor4& x, const std::vector<double>& kernel,
                        const Tensor4& grad_out, const ConvGeometry& g);

namespace serial {
/// Direct seven-loop convolution; the reference for the im2col kernels.
Tensor4 conv_forward(const Tensor4& x, const std::vector<double>& kernel,
                     const std::vector<double>& bias, const ConvGeometry& g);
ConvGrads conv_backward(const Tensor4& x, const std::vector<double>& kernel,
                        const Tensor4& grad_out, const ConvGeometry& g);
}  // namespace serial

enum class Mode { Train, Eval };

/// Per-channel batch normalization over (batch, height, width).
class BatchNorm {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.9;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);

  std::size_t channels() const { return scale.size(); }

  /// Train mode normalizes with batch statistics, caches what backward needs
  /// and updates the running statistics. Eval mode uses running statistics.
  Tensor4 forward(const Tensor4& x, Mode mode);

  /// Gradient w.r.t. the input of the last train-mode forward; accumulates
  /// grad_scale / grad_shift.
  Tensor4 backward(const Tensor4& grad_out);

  std::vector<double> scale, shift;
  std::vector<double> running_mean, running_var;
  std::vector<double> grad_scale, grad_shift;

 private:
  Tensor4 normalized_;
  std::vector<double> inv_std_;
};

Tensor4 relu_forward(const Tensor4& x);
/// Uses the forward output: the gradient passes where y > 0.
Tensor4 relu_backward(const Tensor4& y, const Tensor4& grad_out);

/// Channel-wise concatenation [a, b].
Tensor4 concat_channels(const Tensor4& a, const Tensor4& b);
/// Splits a concatenated gradient back into the parts for a (first ca channels) and b.
std::pair<Tensor4, Tensor4> split_channels(const Tensor4& g, std::size_t ca);

/// Glorot normal: N(0, 2 / (fan_in + fan_out)).
std::vector<double> xavier_init(std::size_t count, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace deepbf::nn
