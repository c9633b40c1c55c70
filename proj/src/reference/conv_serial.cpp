// Direct convolution loops. Slow; used only as the reference the GEMM kernels are tested against.
#include "deepbf/nn/layers.hpp"

namespace deepbf::nn::serial {

namespace {

// Input coordinate for an output position and kernel tap, or -1 when in the padding.
std::ptrdiff_t source(std::size_t o, std::size_t k, std::size_t stride, std::size_t pad,
                      std::size_t extent) {
  const auto i = static_cast<std::ptrdiff_t>(o * stride + k) - static_cast<std::ptrdiff_t>(pad);
  return (i < 0 || i >= static_cast<std::ptrdiff_t>(extent)) ? -1 : i;
}

std::size_t kidx(const ConvGeometry& g, std::size_t co, std::size_t ci, std::size_t ki,
                 std::size_t kj) {
  return ((co * g.in_channels + ci) * g.kernel_h + ki) * g.kernel_w + kj;
}

}  // namespace

Tensor4 conv_forward(const Tensor4& x, const std::vector<double>& kernel,
                     const std::vector<double>& bias, const ConvGeometry& g) {
  if (x.c() != g.in_channels || kernel.size() != g.kernel_size() || bias.size() != g.out_channels)
    throw Error("conv: shape mismatch");
  Tensor4 y(g.out_shape(x.shape()));
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oh = 0; oh < y.h(); ++oh)
        for (std::size_t ow = 0; ow < y.w(); ++ow) {
          double acc = bias[co];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
              const auto ih = source(oh, ki, g.stride_h, g.pad_h, x.h());
              if (ih < 0) continue;
              for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const auto iw = source(ow, kj, g.stride_w, g.pad_w, x.w());
                if (iw < 0) continue;
                acc += kernel[kidx(g, co, ci, ki, kj)] * x(n, ci, ih, iw);
              }
            }
          y(n, co, oh, ow) = acc;
        }
  return y;
}

ConvGrads conv_backward(const Tensor4& x, const std::vector<double>& kernel,
                        const Tensor4& grad_out, const ConvGeometry& g) {
  if (x.c() != g.in_channels || kernel.size() != g.kernel_size() ||
      grad_out.shape() != g.out_shape(x.shape()))
    throw Error("conv: shape mismatch");
  ConvGrads out{Tensor4(x.shape()), std::vector<double>(kernel.size(), 0.0),
                std::vector<double>(g.out_channels, 0.0)};
  for (std::size_t n = 0; n < x.n(); ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t oh = 0; oh < grad_out.h(); ++oh)
        for (std::size_t ow = 0; ow < grad_out.w(); ++ow) {
          const double go = grad_out(n, co, oh, ow);
          out.grad_bias[co] += go;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci)
            for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
              const auto ih = source(oh, ki, g.stride_h, g.pad_h, x.h());
              if (ih < 0) continue;
              for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const auto iw = source(ow, kj, g.stride_w, g.pad_w, x.w());
                if (iw < 0) continue;
                out.grad_kernel[kidx(g, co, ci, ki, kj)] += go * x(n, ci, ih, iw);
                out.grad_x(n, ci, ih, iw) += go * kernel[kidx(g, co, ci, ki, kj)];
              }
            }
        }
  return out;
}

}  // namespace deepbf::nn::serial
