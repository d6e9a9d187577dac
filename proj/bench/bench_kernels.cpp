// Serial reference kernels against their OpenMP counterparts. Thread count
// follows OMP_NUM_THREADS.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "hajscc/kernels.hpp"

namespace k = hajscc::kernels;

namespace {

std::vector<double> filled(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

// Batch of 32 feature maps shaped like the default autoencoder's first layer.
k::ConvGeometry conv_geometry(std::size_t channels, std::size_t size) {
  k::ConvGeometry g;
  g.batch = 32;
  g.in_ch = channels;
  g.in_h = size;
  g.in_w = size;
  g.out_ch = channels;
  g.kernel = 3;
  g.stride = 1;
  g.pad = 1;
  return g;
}

template <auto Kernel>
void BM_Matmul(benchmark::State& state) {
  const std::size_t n = std::size_t(state.range(0));
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(n, n, n, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

template <auto Kernel>
void BM_ConvForward(benchmark::State& state) {
  const k::ConvGeometry g = conv_geometry(std::size_t(state.range(0)), std::size_t(state.range(1)));
  const auto x = filled(g.input_size(), 3), w = filled(g.weight_size(), 4), b = filled(g.out_ch, 5);
  std::vector<double> y(g.output_size());
  for (auto _ : state) {
    Kernel(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Kernel>
void BM_ConvGradInput(benchmark::State& state) {
  const k::ConvGeometry g = conv_geometry(std::size_t(state.range(0)), std::size_t(state.range(1)));
  const auto dy = filled(g.output_size(), 6), w = filled(g.weight_size(), 7);
  std::vector<double> dx(g.input_size());
  for (auto _ : state) {
    Kernel(g, dy, w, dx);
    benchmark::DoNotOptimize(dx.data());
  }
}

template <auto Kernel>
void BM_ConvGradParams(benchmark::State& state) {
  const k::ConvGeometry g = conv_geometry(std::size_t(state.range(0)), std::size_t(state.range(1)));
  const auto x = filled(g.input_size(), 8), dy = filled(g.output_size(), 9);
  std::vector<double> dw(g.weight_size()), db(g.out_ch);
  for (auto _ : state) {
    Kernel(g, x, dy, dw, db);
    benchmark::DoNotOptimize(dw.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({8, 8})->Args({20, 8})->Args({20, 32});
}

}  // namespace

BENCHMARK(BM_Matmul<k::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<k::omp::matmul>)->Name("matmul/omp")->Arg(64)->Arg(256);
BENCHMARK(BM_ConvForward<k::serial::conv2d_forward>)->Name("conv_forward/serial")->Apply(conv_args);
BENCHMARK(BM_ConvForward<k::omp::conv2d_forward>)->Name("conv_forward/omp")->Apply(conv_args);
BENCHMARK(BM_ConvGradInput<k::serial::conv2d_grad_input>)->Name("conv_grad_input/serial")->Apply(conv_args);
BENCHMARK(BM_ConvGradInput<k::omp::conv2d_grad_input>)->Name("conv_grad_input/omp")->Apply(conv_args);
BENCHMARK(BM_ConvGradParams<k::serial::conv2d_grad_params>)->Name("conv_grad_params/serial")->Apply(conv_args);
BENCHMARK(BM_ConvGradParams<k::omp::conv2d_grad_params>)->Name("conv_grad_params/omp")->Apply(conv_args);

BENCHMARK_MAIN();
