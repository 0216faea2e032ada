// Reference vs OpenMP kernels on MobileNet-like layer shapes.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "rfcl/kernels.hpp"

namespace k = rfcl::kernels;
using rfcl::real;

namespace {

std::vector<real> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<real> u(-1.0, 1.0);
  std::vector<real> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_Dense(benchmark::State& state) {
  const k::DenseDims d{static_cast<std::size_t>(state.range(0)), 1024, 256};
  const auto x = random_vec(d.batch * d.in, 1), w = random_vec(d.out * d.in, 2), b = random_vec(d.out, 3);
  std::vector<real> y(d.batch * d.out);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::dense_forward(d, x, w, b, y);
    } else {
      k::reference::dense_forward(d, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(d.batch));
}

template <bool Parallel>
void BM_Depthwise(benchmark::State& state) {
  const k::DepthwiseDims d{static_cast<std::size_t>(state.range(0)), 32, 16, 16, 3};
  const std::size_t n = d.batch * d.channels * d.height * d.width;
  const auto x = random_vec(n, 1), w = random_vec(d.channels * 9, 2), b = random_vec(d.channels, 3);
  std::vector<real> y(n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::depthwise_forward(d, x, w, b, y);
    } else {
      k::reference::depthwise_forward(d, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(d.batch));
}

template <bool Parallel>
void BM_Pointwise(benchmark::State& state) {
  const k::PointwiseDims d{static_cast<std::size_t>(state.range(0)), 32, 64, 256};
  const auto x = random_vec(d.batch * d.in_channels * d.spatial, 1);
  const auto w = random_vec(d.out_channels * d.in_channels, 2), b = random_vec(d.out_channels, 3);
  std::vector<real> y(d.batch * d.out_channels * d.spatial);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::pointwise_forward(d, x, w, b, y);
    } else {
      k::reference::pointwise_forward(d, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(d.batch));
}

template <bool Parallel>
void BM_PointwiseBackwardParams(benchmark::State& state) {
  const k::PointwiseDims d{static_cast<std::size_t>(state.range(0)), 32, 64, 256};
  const auto x = random_vec(d.batch * d.in_channels * d.spatial, 1);
  const auto dy = random_vec(d.batch * d.out_channels * d.spatial, 2);
  std::vector<real> dw(d.out_channels * d.in_channels), db(d.out_channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::pointwise_backward_params(d, x, dy, dw, db);
    } else {
      k::reference::pointwise_backward_params(d, x, dy, dw, db);
    }
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(d.batch));
}

}  // namespace

BENCHMARK(BM_Dense<false>)->Name("dense/reference")->Arg(16)->Arg(128);
BENCHMARK(BM_Dense<true>)->Name("dense/parallel")->Arg(16)->Arg(128);
BENCHMARK(BM_Depthwise<false>)->Name("depthwise/reference")->Arg(16)->Arg(128);
BENCHMARK(BM_Depthwise<true>)->Name("depthwise/parallel")->Arg(16)->Arg(128);
BENCHMARK(BM_Pointwise<false>)->Name("pointwise/reference")->Arg(16)->Arg(128);
BENCHMARK(BM_Pointwise<true>)->Name("pointwise/parallel")->Arg(16)->Arg(128);
BENCHMARK(BM_PointwiseBackwardParams<false>)->Name("pointwise_dw/reference")->Arg(16)->Arg(128);
BENCHMARK(BM_PointwiseBackwardParams<true>)->Name("pointwise_dw/parallel")->Arg(16)->Arg(128);

BENCHMARK_MAIN();
