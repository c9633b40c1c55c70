#include <gtest/gtest.h>
#include <omp.h>

#include <cmath>

#include "deepbf/nn/layers.hpp"
#include "gradcheck.hpp"

using namespace deepbf;
using namespace deepbf::nn;
using deepbf::testing::gradcheck;

namespace {

Tensor4 random_tensor(Shape4 s, std::uint64_t seed, double scale = 1.0) {
  Tensor4 t(s);
  Rng rng(seed);
  for (double& v : t.values()) v = scale * rng.normal();
  return t;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::vector<double> v(n);
  Rng rng(seed);
  for (double& x : v) x = rng.normal();
  return v;
}

// Scalar probe loss sum(w * y), so dL/dy = w.
double dot(const Tensor4& y, const Tensor4& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data()[i] * w.data()[i];
  return s;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST(Conv, IdentityKernel) {
  const Tensor4 x = random_tensor({2, 1, 5, 7}, 1);
  const auto g = ConvGeometry::same(1, 1, 3);
  std::vector<double> k(9, 0.0);
  k[4] = 1.0;
  const Tensor4 y = conv_forward(x, k, {0.0}, g);
  EXPECT_EQ(y, x);
  const Tensor4 go = random_tensor(x.shape(), 2);
  EXPECT_EQ(conv_backward(x, k, go, g).grad_x, go);
}

TEST(Conv, OnesKernelCounts) {
  const Tensor4 x(Shape4{1, 1, 5, 6}, 1.0);
  const auto g = ConvGeometry::same(1, 1, 3);
  const Tensor4 y = conv_forward(x, std::vector<double>(9, 1.0), {0.0}, g);
  EXPECT_EQ(y(0, 0, 2, 2), 9.0);
  EXPECT_EQ(y(0, 0, 0, 3), 6.0);
  EXPECT_EQ(y(0, 0, 2, 0), 6.0);
  EXPECT_EQ(y(0, 0, 0, 0), 4.0);
  EXPECT_EQ(y(0, 0, 4, 5), 4.0);
}

TEST(Conv, StrideHalvesHeight) {
  const auto g = ConvGeometry::same(2, 3, 3, 2);
  EXPECT_EQ(g.out_shape({1, 2, 64, 96}), (Shape4{1, 3, 32, 96}));
  EXPECT_EQ(g.out_shape({1, 2, 31, 192}), (Shape4{1, 3, 16, 192}));
  EXPECT_EQ(g.out_shape({1, 2, 1, 5}), (Shape4{1, 3, 1, 5}));
  const Tensor4 x = random_tensor({1, 2, 64, 96}, 3);
  EXPECT_EQ(conv_forward(x, random_vec(g.kernel_size(), 4), {0, 0, 0}, g).shape(),
            (Shape4{1, 3, 32, 96}));
}

TEST(Conv, ZeroGradOut) {
  const Tensor4 x = random_tensor({2, 3, 6, 5}, 5);
  const auto g = ConvGeometry::same(3, 4, 3);
  const auto grads = conv_backward(x, random_vec(g.kernel_size(), 6), Tensor4(Shape4{2, 4, 6, 5}), g);
  for (double v : grads.grad_x.values()) EXPECT_EQ(v, 0.0);
  for (double v : grads.grad_kernel) EXPECT_EQ(v, 0.0);
  for (double v : grads.grad_bias) EXPECT_EQ(v, 0.0);
}

TEST(Conv, Errors) {
  const auto g = ConvGeometry::same(3, 4, 3);
  const Tensor4 x = random_tensor({1, 2, 6, 5}, 5);
  EXPECT_THROW(conv_forward(x, std::vector<double>(g.kernel_size()), std::vector<double>(4), g), Error);
  const Tensor4 ok = random_tensor({1, 3, 6, 5}, 5);
  EXPECT_THROW(conv_forward(ok, std::vector<double>(5), std::vector<double>(4), g), Error);
  EXPECT_THROW(conv_backward(ok, std::vector<double>(g.kernel_size()), Tensor4(Shape4{1, 4, 5, 5}), g), Error);
}

class ConvGradient : public ::testing::TestWithParam<std::tuple<std::size_t, std::size_t, std::size_t>> {};

TEST_P(ConvGradient, FiniteDifferences) {
  const auto [k, stride, in_h] = GetParam();
  const auto g = ConvGeometry::same(3, 4, k, stride);
  Tensor4 x = random_tensor({2, 3, in_h, 5}, 10);
  auto kernel = random_vec(g.kernel_size(), 11);
  auto bias = random_vec(4, 12);
  const Tensor4 w = random_tensor(g.out_shape(x.shape()), 13);
  const auto grads = conv_backward(x, kernel, w, g);
  auto loss = [&] { return dot(conv_forward(x, kernel, bias, g), w); };
  EXPECT_LT(gradcheck(x.values(), grads.grad_x.values(), loss), 1e-5);
  EXPECT_LT(gradcheck(kernel, grads.grad_kernel, loss), 1e-5);
  EXPECT_LT(gradcheck(bias, grads.grad_bias, loss), 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Shapes, ConvGradient,
                         ::testing::Values(std::make_tuple(3, 1, 6), std::make_tuple(3, 2, 7),
                                           std::make_tuple(1, 1, 4), std::make_tuple(3, 2, 2)));

TEST(Conv, GemmMatchesDirectLoops) {
  for (std::size_t stride : {1, 2}) {
    const auto g = ConvGeometry::same(5, 6, 3, stride);
    const Tensor4 x = random_tensor({4, 5, 9, 11}, 20);
    const auto kernel = random_vec(g.kernel_size(), 21);
    const auto bias = random_vec(6, 22);
    const Tensor4 go = random_tensor(g.out_shape(x.shape()), 23);
    const Tensor4 y = conv_forward(x, kernel, bias, g);
    const Tensor4 yr = serial::conv_forward(x, kernel, bias, g);
    ASSERT_EQ(y.shape(), yr.shape());
    EXPECT_LT(max_abs_diff(y.values(), yr.values()), 1e-12);
    const auto a = conv_backward(x, kernel, go, g), b = serial::conv_backward(x, kernel, go, g);
    EXPECT_LT(max_abs_diff(a.grad_x.values(), b.grad_x.values()), 1e-12);
    EXPECT_LT(max_abs_diff(a.grad_kernel, b.grad_kernel), 1e-11);
    EXPECT_LT(max_abs_diff(a.grad_bias, b.grad_bias), 1e-12);
  }
}

TEST(Conv, ThreadCountDoesNotChangeBits) {
  const auto g = ConvGeometry::same(4, 5, 3, 2);
  const Tensor4 x = random_tensor({7, 4, 10, 9}, 30);
  const auto kernel = random_vec(g.kernel_size(), 31);
  const auto bias = random_vec(5, 32);
  const Tensor4 go = random_tensor(g.out_shape(x.shape()), 33);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const Tensor4 y1 = conv_forward(x, kernel, bias, g);
  const auto g1 = conv_backward(x, kernel, go, g);
  for (int t : {2, 3, 5}) {
    omp_set_num_threads(t);
    EXPECT_EQ(conv_forward(x, kernel, bias, g), y1);
    const auto gt = conv_backward(x, kernel, go, g);
    EXPECT_EQ(gt.grad_x, g1.grad_x);
    EXPECT_EQ(gt.grad_kernel, g1.grad_kernel);
    EXPECT_EQ(gt.grad_bias, g1.grad_bias);
  }
  omp_set_num_threads(saved);
}

TEST(BatchNorm, ConstantChannelGivesShift) {
  BatchNorm bn(2);
  bn.shift = {0.5, -1.5};
  bn.scale = {3.0, 2.0};
  Tensor4 x(Shape4{3, 2, 2, 2}, 4.0);
  const Tensor4 y = bn.forward(x, Mode::Train);
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_EQ(y(n, 0, i / 2, i % 2), 0.5);
      EXPECT_EQ(y(n, 1, i / 2, i % 2), -1.5);
    }
}

TEST(BatchNorm, StandardizedInputPassesThrough) {
  Tensor4 x = random_tensor({4, 2, 3, 5}, 40);
  // Standardize each channel exactly (population statistics).
  for (std::size_t c = 0; c < 2; ++c) {
    double m = 0, v = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t w = 0; w < 5; ++w) m += x(n, c, h, w);
    m /= 60;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t w = 0; w < 5; ++w) v += (x(n, c, h, w) - m) * (x(n, c, h, w) - m);
    const double sd = std::sqrt(v / 60);
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t w = 0; w < 5; ++w) x(n, c, h, w) = (x(n, c, h, w) - m) / sd;
  }
  BatchNorm bn(2);
  const Tensor4 y = bn.forward(x, Mode::Train);
  // Unit variance leaves only the epsilon in the denominator.
  Tensor4 expect = x;
  for (double& v : expect.values()) v /= std::sqrt(1.0 + BatchNorm::kEpsilon);
  EXPECT_LT(max_abs_diff(y.values(), expect.values()), 1e-12);
  EXPECT_LT(max_abs_diff(y.values(), x.values()), 2e-5);
}

TEST(BatchNorm, RunningStatisticsAndEval) {
  BatchNorm bn(1);
  Tensor4 x(Shape4{2, 1, 1, 2});
  x.values()[0] = 1;
  x.values()[1] = 3;
  x.values()[2] = 5;
  x.values()[3] = 7;
  bn.forward(x, Mode::Train);
  // mean 4, population variance 5.
  EXPECT_NEAR(bn.running_mean[0], 0.1 * 4.0, 1e-15);
  EXPECT_NEAR(bn.running_var[0], 0.9 + 0.1 * 5.0, 1e-15);
  bn.running_mean = {2.0};
  bn.running_var = {4.0 - BatchNorm::kEpsilon};
  const Tensor4 y = bn.forward(x, Mode::Eval);
  EXPECT_NEAR(y.values()[0], -0.5, 1e-12);
  EXPECT_NEAR(y.values()[3], 2.5, 1e-12);
}

TEST(BatchNorm, GradientFiniteDifferences) {
  BatchNorm bn(3);
  bn.scale = random_vec(3, 50);
  bn.shift = random_vec(3, 51);
  Tensor4 x = random_tensor({4, 3, 2, 3}, 52, 2.0);
  const Tensor4 w = random_tensor(x.shape(), 53);
  bn.forward(x, Mode::Train);
  const Tensor4 gx = bn.backward(w);
  const auto gs = bn.grad_scale, gb = bn.grad_shift;
  auto loss = [&] {
    BatchNorm probe = bn;
    return dot(probe.forward(x, Mode::Train), w);
  };
  EXPECT_LT(gradcheck(x.values(), gx.values(), loss), 1e-5);
  EXPECT_LT(gradcheck(bn.scale, gs, loss), 1e-5);
  EXPECT_LT(gradcheck(bn.shift, gb, loss), 1e-5);
}

TEST(Relu, ForwardBackwardAndGradient) {
  Tensor4 x = random_tensor({2, 2, 3, 3}, 60);
  // Keep probes away from the kink.
  for (double& v : x.values())
    if (std::abs(v) < 0.05) v = 0.3;
  const Tensor4 y = relu_forward(x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], std::max(0.0, x.data()[i]));
  const Tensor4 w = random_tensor(x.shape(), 61);
  const Tensor4 g = relu_backward(y, w);
  EXPECT_LT(gradcheck(x.values(), g.values(), [&] { return dot(relu_forward(x), w); }), 1e-5);
}

TEST(Concat, RoundTripAndGradient) {
  Tensor4 a = random_tensor({2, 2, 3, 4}, 70), b = random_tensor({2, 3, 3, 4}, 71);
  const Tensor4 y = concat_channels(a, b);
  EXPECT_EQ(y.shape(), (Shape4{2, 5, 3, 4}));
  EXPECT_EQ(y(1, 3, 2, 1), b(1, 1, 2, 1));
  EXPECT_EQ(y(1, 1, 0, 3), a(1, 1, 0, 3));
  const auto [ga, gb] = split_channels(y, 2);
  EXPECT_EQ(ga, a);
  EXPECT_EQ(gb, b);
  const Tensor4 w = random_tensor(y.shape(), 72);
  const auto [wa, wb] = split_channels(w, 2);
  auto loss = [&] { return dot(concat_channels(a, b), w); };
  EXPECT_LT(gradcheck(a.values(), wa.values(), loss), 1e-5);
  EXPECT_LT(gradcheck(b.values(), wb.values(), loss), 1e-5);
  EXPECT_THROW(concat_channels(a, Tensor4(Shape4{2, 1, 2, 4})), Error);
}

TEST(Xavier, VarianceAndDeterminism) {
  Rng r1(3), r2(3);
  const auto a = xavier_init(100000, 9, 9, r1);
  EXPECT_EQ(a, xavier_init(100000, 9, 9, r2));
  double m = 0, v = 0;
  for (double x : a) m += x;
  m /= a.size();
  for (double x : a) v += (x - m) * (x - m);
  v /= a.size();
  EXPECT_NEAR(v / (1.0 / 9.0), 1.0, 0.05);
  EXPECT_NEAR(m, 0.0, 0.01);
  Rng r3(1);
  EXPECT_THROW(xavier_init(4, 0, 3, r3), Error);
}
