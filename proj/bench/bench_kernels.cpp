// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include "deepbf/das.hpp"
#include "deepbf/nn/layers.hpp"
#include "deepbf/sim.hpp"
#include "deepbf/subsample.hpp"

using namespace deepbf;

namespace {

RFCube random_focused(std::size_t n_depth) {
  const ProbeConfig probe;
  std::vector<double> lines(probe.n_te_focused);
  for (int k = 0; k < probe.n_te_focused; ++k) lines[k] = probe.scanline_x(k);
  RFCube c(n_depth, probe.n_rx_focused, probe.n_te_focused, EventKind::FocusedTe, 5e-3,
           probe.depth_step_m(), lines);
  Rng rng(1);
  for (double& v : c.samples()) v = rng.normal();
  return c;
}

std::vector<RFCube> random_planewave(std::size_t n_depth, const std::vector<double>& angles) {
  const ProbeConfig probe;
  std::vector<RFCube> cubes;
  Rng rng(2);
  for (double a : angles) {
    RFCube c(n_depth, probe.n_rx_planewave, 1, EventKind::PlaneWave, 5e-3, probe.depth_step_m(), {a});
    for (double& v : c.samples()) v = rng.normal();
    cubes.push_back(std::move(c));
  }
  return cubes;
}

nn::Tensor4 random_tensor(nn::Shape4 s, std::uint64_t seed) {
  nn::Tensor4 t(s);
  Rng rng(seed);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

template <bool Serial>
void BM_DasFocused(benchmark::State& state) {
  const ProbeConfig probe;
  const RFCube raw = random_focused(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    auto out = Serial ? serial::das_focused(raw, probe) : das_focused(raw, probe);
    benchmark::DoNotOptimize(out.rf_sum.data.data());
  }
}

template <bool Serial>
void BM_DasPlanewave(benchmark::State& state) {
  const ProbeConfig probe;
  const auto angles = angle_set(static_cast<int>(state.range(1)), 0.26);
  const auto cubes = random_planewave(static_cast<std::size_t>(state.range(0)), angles);
  const SamplingMask all = make_pw_subset(static_cast<int>(angles.size()), static_cast<int>(angles.size()));
  for (auto _ : state) {
    auto out = Serial ? serial::das_planewave_compound(cubes, probe, angles, all)
                      : das_planewave_compound(cubes, probe, angles, all);
    benchmark::DoNotOptimize(out.rf_sum.data.data());
  }
}

template <bool Serial>
void BM_ConvForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto g = nn::ConvGeometry::same(c, c, 3);
  const nn::Tensor4 x = random_tensor({8, c, 64, 96}, 3);
  const std::vector<double> kernel(g.kernel_size(), 0.01), bias(c, 0.0);
  for (auto _ : state) {
    auto y = Serial ? nn::serial::conv_forward(x, kernel, bias, g) : nn::conv_forward(x, kernel, bias, g);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Serial>
void BM_ConvBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto g = nn::ConvGeometry::same(c, c, 3);
  const nn::Tensor4 x = random_tensor({8, c, 64, 96}, 4);
  const nn::Tensor4 go = random_tensor(g.out_shape(x.shape()), 5);
  const std::vector<double> kernel(g.kernel_size(), 0.01);
  for (auto _ : state) {
    auto grads = Serial ? nn::serial::conv_backward(x, kernel, go, g) : nn::conv_backward(x, kernel, go, g);
    benchmark::DoNotOptimize(grads.grad_x.data());
  }
}

}  // namespace

BENCHMARK(BM_DasFocused<false>)->Name("das_focused/parallel")->Arg(512)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DasFocused<true>)->Name("das_focused/serial")->Arg(512)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DasPlanewave<false>)->Name("das_planewave/parallel")->Args({256, 11})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_DasPlanewave<true>)->Name("das_planewave/serial")->Args({256, 11})->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/parallel")->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/serial")->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/parallel")->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/serial")->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK_MAIN();
