#include <cmath>

#include "deepbf/nn/layers.hpp"

namespace deepbf::nn {

namespace {

// Four-lane accumulation of f(i) over [0, n); lanes are combined pairwise.
template <typename F>
double lane_sum(std::size_t n, F f) {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a0 += f(i);
    a1 += f(i + 1);
    a2 += f(i + 2);
    a3 += f(i + 3);
  }
  for (; i < n; ++i) a0 += f(i);
  return (a0 + a1) + (a2 + a3);
}

}  // namespace

std::string Shape4::str() const {
  return "[" + std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w) + "]";
}

BatchNorm::BatchNorm(std::size_t channels)
    : scale(channels, 1.0),
      shift(channels, 0.0),
      running_mean(channels, 0.0),
      running_var(channels, 1.0),
      grad_scale(channels, 0.0),
      grad_shift(channels, 0.0) {}

Tensor4 BatchNorm::forward(const Tensor4& x, Mode mode) {
  if (x.c() != channels())
    throw Error("batchnorm: input has " + std::to_string(x.c()) + " channels, expected " +
                std::to_string(channels()));
  const std::size_t plane = x.h() * x.w();
  const double count = static_cast<double>(x.n() * plane);
  Tensor4 y(x.shape());
  if (mode == Mode::Train) {
    normalized_ = Tensor4(x.shape());
    inv_std_.assign(channels(), 0.0);
  }

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(channels()); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    double mean, var;
    if (mode == Mode::Train) {
      double s = 0.0;
      for (std::size_t n = 0; n < x.n(); ++n) {
        const double* p = x.sample(n) + c * plane;
        s += lane_sum(plane, [p](std::size_t i) { return p[i]; });
      }
      mean = s / count;
      double ss = 0.0;
      for (std::size_t n = 0; n < x.n(); ++n) {
        const double* p = x.sample(n) + c * plane;
        ss += lane_sum(plane, [p, mean](std::size_t i) { return (p[i] - mean) * (p[i] - mean); });
      }
      var = ss / count;
      running_mean[c] = kMomentum * running_mean[c] + (1.0 - kMomentum) * mean;
      running_var[c] = kMomentum * running_var[c] + (1.0 - kMomentum) * var;
    } else {
      mean = running_mean[c];
      var = running_var[c];
    }
    const double inv = 1.0 / std::sqrt(var + kEpsilon);
    if (mode == Mode::Train) inv_std_[c] = inv;
    for (std::size_t n = 0; n < x.n(); ++n) {
      const double* p = x.sample(n) + c * plane;
      double* q = y.sample(n) + c * plane;
      double* xh = mode == Mode::Train ? normalized_.sample(n) + c * plane : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = (p[i] - mean) * inv;
        if (xh) xh[i] = v;
        q[i] = scale[c] * v + shift[c];
      }
    }
  }
  return y;
}

Tensor4 BatchNorm::backward(const Tensor4& grad_out) {
  if (grad_out.shape() != normalized_.shape())
    throw Error("batchnorm: backward without a matching train-mode forward");
  const std::size_t plane = grad_out.h() * grad_out.w();
  const double count = static_cast<double>(grad_out.n() * plane);
  Tensor4 gx(grad_out.shape());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < static_cast<std::ptrdiff_t>(channels()); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t n = 0; n < grad_out.n(); ++n) {
      const double* g = grad_out.sample(n) + c * plane;
      const double* xh = normalized_.sample(n) + c * plane;
      sum_g += lane_sum(plane, [g](std::size_t i) { return g[i]; });
      sum_gx += lane_sum(plane, [g, xh](std::size_t i) { return g[i] * xh[i]; });
    }
    grad_shift[c] += sum_g;
    grad_scale[c] += sum_gx;
    const double k = scale[c] * inv_std_[c] / count;
    for (std::size_t n = 0; n < grad_out.n(); ++n) {
      const double* g = grad_out.sample(n) + c * plane;
      const double* xh = normalized_.sample(n) + c * plane;
      double* out = gx.sample(n) + c * plane;
      for (std::size_t i = 0; i < plane; ++i) out[i] = k * (count * g[i] - sum_g - xh[i] * sum_gx);
    }
  }
  return gx;
}

Tensor4 relu_forward(const Tensor4& x) {
  Tensor4 y(x.shape());
  const auto in = x.values();
  auto out = y.values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
  return y;
}

Tensor4 relu_backward(const Tensor4& y, const Tensor4& grad_out) {
  if (y.shape() != grad_out.shape()) throw Error("relu: grad_out shape mismatch");
  Tensor4 g(y.shape());
  const auto out = y.values();
  const auto go = grad_out.values();
  auto gi = g.values();
  for (std::size_t i = 0; i < out.size(); ++i) gi[i] = out[i] > 0.0 ? go[i] : 0.0;
  return g;
}

Tensor4 concat_channels(const Tensor4& a, const Tensor4& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw Error("concat: " + a.shape().str() + " and " + b.shape().str() + " are incompatible");
  Tensor4 y(a.n(), a.c() + b.c(), a.h(), a.w());
  const std::size_t sa = a.c() * a.h() * a.w(), sb = b.c() * b.h() * b.w();
  for (std::size_t n = 0; n < a.n(); ++n) {
    std::copy(a.sample(n), a.sample(n) + sa, y.sample(n));
    std::copy(b.sample(n), b.sample(n) + sb, y.sample(n) + sa);
  }
  return y;
}

std::pair<Tensor4, Tensor4> split_channels(const Tensor4& g, std::size_t ca) {
  if (ca > g.c()) throw Error("split: channel count out of range");
  Tensor4 a(g.n(), ca, g.h(), g.w()), b(g.n(), g.c() - ca, g.h(), g.w());
  const std::size_t sa = a.c() * a.h() * a.w(), sb = b.c() * b.h() * b.w();
  for (std::size_t n = 0; n < g.n(); ++n) {
    std::copy(g.sample(n), g.sample(n) + sa, a.sample(n));
    std::copy(g.sample(n) + sa, g.sample(n) + sa + sb, b.sample(n));
  }
  return {std::move(a), std::move(b)};
}

std::vector<double> xavier_init(std::size_t count, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw Error("xavier_init: fans must be > 0");
  const double sd = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(count);
  for (double& v : w) v = sd * rng.normal();
  return w;
}

}  // namespace deepbf::nn
