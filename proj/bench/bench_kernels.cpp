// Serial reference loops vs the im2col + GEMM path with OpenMP over batch items.
// Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <vector>

#include "descnet/kernels.hpp"
#include "descnet/rng.hpp"

using namespace descnet;
using namespace descnet::kernels;

namespace {

struct Buffers {
  ConvGeometry g;
  std::size_t batch;
  std::vector<float> in, kernel, bias, out;

  Buffers(int ci, int co, int extent, int k, int stride, std::size_t n) : batch(n) {
    const int pad = (k - 1) / 2;
    g = make_conv_geometry(ci, co, {extent, extent, extent}, {k, k, k}, {stride, stride, stride},
                           {pad, pad, pad}, {k - 1 - pad, k - 1 - pad, k - 1 - pad});
    Rng rng(1);
    auto fill = [&](std::vector<float>& v, std::size_t size) {
      v.resize(size);
      for (auto& x : v) x = static_cast<float>(rng.normal());
    };
    fill(in, batch * g.in_item_size());
    fill(kernel, g.patch_size() * static_cast<std::size_t>(co));
    fill(bias, static_cast<std::size_t>(co));
    out.resize(batch * g.out_item_size());
  }
};

// First layer of the 16^3 desk-scale descriptor and a second-layer-like shape.
Buffers make(const benchmark::State& state) {
  if (state.range(0) == 0) return Buffers(1, 8, 16, 8, 4, 16);
  return Buffers(8, 16, 8, 3, 1, 16);
}

void BM_ConvForwardReference(benchmark::State& state) {
  auto b = make(state);
  for (auto _ : state) {
    reference::conv3d_forward<float>(b.g, b.batch, b.in, b.kernel, b.bias, b.out);
    benchmark::DoNotOptimize(b.out.data());
  }
}

void BM_ConvForwardParallel(benchmark::State& state) {
  auto b = make(state);
  for (auto _ : state) {
    parallel::conv3d_forward<float>(b.g, b.batch, b.in, b.kernel, b.bias, b.out);
    benchmark::DoNotOptimize(b.out.data());
  }
}

void BM_ConvBackwardInputReference(benchmark::State& state) {
  auto b = make(state);
  std::vector<float> grad_in(b.in.size());
  for (auto _ : state) {
    reference::conv3d_backward_input<float>(b.g, b.batch, b.out, b.kernel, grad_in);
    benchmark::DoNotOptimize(grad_in.data());
  }
}

void BM_ConvBackwardInputParallel(benchmark::State& state) {
  auto b = make(state);
  std::vector<float> grad_in(b.in.size());
  for (auto _ : state) {
    parallel::conv3d_backward_input<float>(b.g, b.batch, b.out, b.kernel, grad_in);
    benchmark::DoNotOptimize(grad_in.data());
  }
}

void BM_ConvBackwardParamsReference(benchmark::State& state) {
  auto b = make(state);
  std::vector<float> gk(b.kernel.size()), gb(b.bias.size());
  for (auto _ : state) {
    reference::conv3d_backward_params<float>(b.g, b.batch, b.in, b.out, gk, gb);
    benchmark::DoNotOptimize(gk.data());
  }
}

void BM_ConvBackwardParamsParallel(benchmark::State& state) {
  auto b = make(state);
  std::vector<float> gk(b.kernel.size()), gb(b.bias.size());
  for (auto _ : state) {
    parallel::conv3d_backward_params<float>(b.g, b.batch, b.in, b.out, gk, gb);
    benchmark::DoNotOptimize(gk.data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForwardReference)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForwardParallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInputReference)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInputParallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParamsReference)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParamsParallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
