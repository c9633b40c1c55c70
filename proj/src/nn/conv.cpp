// im2col + GEMM convolution, parallel over the batch. Every sample is computed
// independently and kernel gradients are reduced in sample order, so results
// do not depend on the thread count.
#include <Eigen/Core>

#include <algorithm>
#include <utility>

#include "deepbf/nn/layers.hpp"

namespace deepbf::nn {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMajor>;
using ConstMapMat = Eigen::Map<const RowMajor>;
using Stride = Eigen::OuterStride<>;
using StridedMat = Eigen::Map<RowMajor, 0, Stride>;
using ConstStridedMat = Eigen::Map<const RowMajor, 0, Stride>;

void check(const Tensor4& x, const std::vector<double>& kernel, const ConvGeometry& g) {
  if (x.c() != g.in_channels)
    throw Error("conv: input has " + std::to_string(x.c()) + " channels, expected " +
                std::to_string(g.in_channels));
  if (kernel.size() != g.kernel_size()) throw Error("conv: kernel size does not match geometry");
  if (x.h() + 2 * g.pad_h < g.kernel_h || x.w() + 2 * g.pad_w < g.kernel_w)
    throw Error("conv: input smaller than kernel");
}

bool is_pointwise(const ConvGeometry& g) {
  return g.kernel_h == 1 && g.kernel_w == 1 && g.stride_h == 1 && g.stride_w == 1 && g.pad_h == 0 &&
         g.pad_w == 0;
}

// Output columns [lo, hi) whose input column ow * stride_w + kj - pad_w lies inside [0, w).
std::pair<std::size_t, std::size_t> valid_columns(std::size_t w, const ConvGeometry& g, std::size_t kj,
                                                  std::size_t wo) {
  std::size_t lo = 0;
  while (lo < wo && lo * g.stride_w + kj < g.pad_w) ++lo;
  std::size_t hi = lo;
  while (hi < wo && hi * g.stride_w + kj < g.pad_w + w) ++hi;
  return {lo, hi};
}

// Column matrix for output rows [oh0, oh1): row (ci, ki, kj), column (oh - oh0) * wo + ow.
void im2col(const double* x, std::size_t h, std::size_t w, const ConvGeometry& g, std::size_t oh0,
            std::size_t oh1, std::size_t wo, double* col) {
  const std::size_t plane = (oh1 - oh0) * wo;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci)
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        double* row = col + ((ci * g.kernel_h + ki) * g.kernel_w + kj) * plane;
        const auto [lo, hi] = valid_columns(w, g, kj, wo);
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + ki) -
                          static_cast<std::ptrdiff_t>(g.pad_h);
          double* out = row + (oh - oh0) * wo;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(out, out + wo, 0.0);
            continue;
          }
          const double* src = x + (ci * h + static_cast<std::size_t>(ih)) * w;
          std::fill(out, out + lo, 0.0);
          if (g.stride_w == 1) {
            std::copy(src + lo + kj - g.pad_w, src + hi + kj - g.pad_w, out + lo);
          } else {
            for (std::size_t ow = lo; ow < hi; ++ow) out[ow] = src[ow * g.stride_w + kj - g.pad_w];
          }
          std::fill(out + hi, out + wo, 0.0);
        }
      }
}

// Scatter-adds a column matrix for output rows [oh0, oh1) back onto x.
void col2im_add(const double* col, std::size_t h, std::size_t w, const ConvGeometry& g,
                std::size_t oh0, std::size_t oh1, std::size_t wo, double* x) {
  const std::size_t plane = (oh1 - oh0) * wo;
  for (std::size_t ci = 0; ci < g.in_channels; ++ci)
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const double* row = col + ((ci * g.kernel_h + ki) * g.kernel_w + kj) * plane;
        const auto [lo, hi] = valid_columns(w, g, kj, wo);
        for (std::size_t oh = oh0; oh < oh1; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride_h + ki) -
                          static_cast<std::ptrdiff_t>(g.pad_h);
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = x + (ci * h + static_cast<std::size_t>(ih)) * w;
          const double* in = row + (oh - oh0) * wo;
          for (std::size_t ow = lo; ow < hi; ++ow) dst[ow * g.stride_w + kj - g.pad_w] += in[ow];
        }
      }
}

// Output rows per im2col tile, sized so the column buffer stays cache resident.
std::size_t tile_rows(std::size_t ck, std::size_t ho, std::size_t wo) {
  constexpr std::size_t kTileDoubles = 1u << 15;
  return std::clamp<std::size_t>(kTileDoubles / std::max<std::size_t>(ck * wo, 1), 1, ho);
}

}  // namespace

ConvGeometry ConvGeometry::same(std::size_t in, std::size_t out, std::size_t k, std::size_t stride_h) {
  ConvGeometry g;
  g.in_channels = in;
  g.out_channels = out;
  g.kernel_h = g.kernel_w = k;
  g.stride_h = stride_h;
  g.stride_w = 1;
  g.pad_h = g.pad_w = k / 2;
  return g;
}

Tensor4 conv_forward(const Tensor4& x, const std::vector<double>& kernel,
                     const std::vector<double>& bias, const ConvGeometry& g) {
  check(x, kernel, g);
  if (bias.size() != g.out_channels) throw Error("conv: bias size does not match out channels");
  Tensor4 y(g.out_shape(x.shape()));
  const std::size_t ho = y.h(), wo = y.w(), plane = ho * wo;
  const std::size_t ck = g.in_channels * g.kernel_h * g.kernel_w;
  const auto co = static_cast<Eigen::Index>(g.out_channels);
  const ConstMapMat K(kernel.data(), co, static_cast<Eigen::Index>(ck));
  const bool pointwise = is_pointwise(g);
  const std::size_t rows = tile_rows(ck, ho, wo);

#pragma omp parallel
  {
    std::vector<double> col(pointwise ? 0 : ck * rows * wo);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(x.n()); ++n) {
      if (pointwise) {
        const ConstMapMat C(x.sample(n), static_cast<Eigen::Index>(ck), static_cast<Eigen::Index>(plane));
        MapMat Y(y.sample(n), co, static_cast<Eigen::Index>(plane));
        Y.noalias() = K * C;
      } else {
        for (std::size_t oh0 = 0; oh0 < ho; oh0 += rows) {
          const std::size_t oh1 = std::min(ho, oh0 + rows);
          const auto cols = static_cast<Eigen::Index>((oh1 - oh0) * wo);
          im2col(x.sample(n), x.h(), x.w(), g, oh0, oh1, wo, col.data());
          const ConstMapMat C(col.data(), static_cast<Eigen::Index>(ck), cols);
          StridedMat Y(y.sample(n) + oh0 * wo, co, cols, Stride(static_cast<Eigen::Index>(plane)));
          Y.noalias() = K * C;
        }
      }
      MapMat Y(y.sample(n), co, static_cast<Eigen::Index>(plane));
      for (std::size_t c = 0; c < g.out_channels; ++c) Y.row(static_cast<Eigen::Index>(c)).array() += bias[c];
    }
  }
  return y;
}

ConvGrads conv_backward(const Tensor4& x, const std::vector<double>& kernel,
                        const Tensor4& grad_out, const ConvGeometry& g) {
  check(x, kernel, g);
  if (grad_out.shape() != g.out_shape(x.shape())) throw Error("conv: grad_out shape mismatch");
  const std::size_t ho = grad_out.h(), wo = grad_out.w(), plane = ho * wo;
  const std::size_t ck = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t batch = x.n();
  const auto co = static_cast<Eigen::Index>(g.out_channels);
  const ConstMapMat K(kernel.data(), co, static_cast<Eigen::Index>(ck));
  const bool pointwise = is_pointwise(g);
  const std::size_t rows = tile_rows(ck, ho, wo);

  ConvGrads out{Tensor4(x.shape()), std::vector<double>(kernel.size(), 0.0),
                std::vector<double>(g.out_channels, 0.0)};
  // One kernel-gradient slab per sample, reduced afterwards in sample order.
  std::vector<double> partial(batch * kernel.size());

#pragma omp parallel
  {
    std::vector<double> col(pointwise ? 0 : ck * rows * wo);
    std::vector<double> gcol(pointwise ? 0 : ck * rows * wo);
#pragma omp for schedule(static)
    for (std::ptrdiff_t n = 0; n < static_cast<std::ptrdiff_t>(batch); ++n) {
      MapMat GK(partial.data() + static_cast<std::size_t>(n) * kernel.size(), co,
                static_cast<Eigen::Index>(ck));
      if (pointwise) {
        const ConstMapMat C(x.sample(n), static_cast<Eigen::Index>(ck), static_cast<Eigen::Index>(plane));
        const ConstMapMat G(grad_out.sample(n), co, static_cast<Eigen::Index>(plane));
        GK.noalias() = G * C.transpose();
        MapMat GX(out.grad_x.sample(n), static_cast<Eigen::Index>(ck), static_cast<Eigen::Index>(plane));
        GX.noalias() = K.transpose() * G;
        continue;
      }
      GK.setZero();
      for (std::size_t oh0 = 0; oh0 < ho; oh0 += rows) {
        const std::size_t oh1 = std::min(ho, oh0 + rows);
        const auto cols = static_cast<Eigen::Index>((oh1 - oh0) * wo);
        im2col(x.sample(n), x.h(), x.w(), g, oh0, oh1, wo, col.data());
        const ConstMapMat C(col.data(), static_cast<Eigen::Index>(ck), cols);
        const ConstStridedMat G(grad_out.sample(n) + oh0 * wo, co, cols,
                                Stride(static_cast<Eigen::Index>(plane)));
        GK.noalias() += G * C.transpose();
        MapMat GC(gcol.data(), static_cast<Eigen::Index>(ck), cols);
        GC.noalias() = K.transpose() * G;
        col2im_add(gcol.data(), x.h(), x.w(), g, oh0, oh1, wo, out.grad_x.sample(n));
      }
    }
  }

  for (std::size_t n = 0; n < batch; ++n) {
    const double* p = partial.data() + n * kernel.size();
    for (std::size_t k = 0; k < kernel.size(); ++k) out.grad_kernel[k] += p[k];
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const double* gr = grad_out.sample(n) + co * plane;
      double s = 0.0;
      for (std::size_t i = 0; i < plane; ++i) s += gr[i];
      out.grad_bias[co] += s;
    }
  }
  return out;
}

}  // namespace deepbf::nn
