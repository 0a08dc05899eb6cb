// Parallel kernels against the serial reference on the shapes the networks use.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "ssvae/kernels.hpp"

namespace k = ssvae::kernels;

namespace {

std::vector<double> filled(std::size_t n) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

// batch, in channels, side, out channels, kernel, stride, pad
k::ConvGeometry geometry(const benchmark::State& s) {
  k::ConvGeometry g;
  g.batch = static_cast<std::size_t>(s.range(0));
  g.in_channels = static_cast<std::size_t>(s.range(1));
  g.in_h = g.in_w = static_cast<std::size_t>(s.range(2));
  g.out_channels = static_cast<std::size_t>(s.range(3));
  g.kernel_h = g.kernel_w = static_cast<std::size_t>(s.range(4));
  g.stride = static_cast<std::size_t>(s.range(5));
  g.pad = static_cast<std::size_t>(s.range(6));
  return g;
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({32, 16, 16, 16, 3, 1, 1});
  b->Args({32, 64, 8, 64, 3, 1, 1});
  b->Args({32, 64, 16, 64, 1, 1, 0});
  b->Args({32, 32, 16, 64, 4, 2, 1});
}

template <auto Fn>
void BM_gemm(benchmark::State& s) {
  const auto n = static_cast<std::size_t>(s.range(0));
  const auto a = filled(n * n), b = filled(n * n);
  std::vector<double> c(n * n);
  for (auto _ : s) {
    Fn(n, n, n, a, b, c);
    benchmark::DoNotOptimize(c.data());
  }
  s.SetItemsProcessed(static_cast<std::int64_t>(s.iterations() * n * n * n));
}

template <auto Fn>
void BM_conv_forward(benchmark::State& s) {
  const k::ConvGeometry g = geometry(s);
  const auto x = filled(g.input_size()), w = filled(g.weight_size());
  std::vector<double> y(g.output_size());
  for (auto _ : s) {
    Fn(g, x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Fn>
void BM_conv_backward_input(benchmark::State& s) {
  const k::ConvGeometry g = geometry(s);
  const auto dy = filled(g.output_size()), w = filled(g.weight_size());
  std::vector<double> dx(g.input_size());
  for (auto _ : s) {
    Fn(g, dy, w, dx);
    benchmark::DoNotOptimize(dx.data());
  }
}

template <auto Fn>
void BM_conv_backward_weight(benchmark::State& s) {
  const k::ConvGeometry g = geometry(s);
  const auto x = filled(g.input_size()), dy = filled(g.output_size());
  std::vector<double> dw(g.weight_size());
  for (auto _ : s) {
    Fn(g, x, dy, dw);
    benchmark::DoNotOptimize(dw.data());
  }
}

}  // namespace

BENCHMARK(BM_gemm<k::gemm>)->Name("gemm/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_gemm<k::reference::gemm>)->Name("gemm/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_conv_forward<k::conv2d_forward>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(BM_conv_forward<k::reference::conv2d_forward>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(BM_conv_backward_input<k::conv2d_backward_input>)->Name("conv_backward_input/parallel")->Apply(conv_args);
BENCHMARK(BM_conv_backward_input<k::reference::conv2d_backward_input>)
    ->Name("conv_backward_input/reference")
    ->Apply(conv_args);
BENCHMARK(BM_conv_backward_weight<k::conv2d_backward_weight>)->Name("conv_backward_weight/parallel")->Apply(conv_args);
BENCHMARK(BM_conv_backward_weight<k::reference::conv2d_backward_weight>)
    ->Name("conv_backward_weight/reference")
    ->Apply(conv_args);

BENCHMARK_MAIN();
