// Direct convolution loops vs the im2col+matmul fast path.

#include <benchmark/benchmark.h>

#include "radmamba/rng.hpp"
#include "radmamba/tensor.hpp"

using namespace radmamba;

namespace {

Tensor randu(Rng& rng, Shape shape) {
  Tensor t = Tensor::zeros(std::move(shape), Precision::F32);
  for (auto& v : t.mutable_data()) v = rng.uniform(-1.0, 1.0);
  t.round_to_precision();
  return t;
}

}  // namespace

static void Conv2dDirect(benchmark::State& state) {
  Rng rng(7);
  const int64_t hw = state.range(0);
  Tensor x = randu(rng, {3, hw, hw});
  Tensor w = randu(rng, {16, 3, 3, 3});
  Tensor b = randu(rng, {16});
  for (auto _ : state) {
    Tensor y = ops::conv2d(x, w, b, 1, 1, 1, 1, ops::ConvAlgo::Direct);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetComplexityN(hw * hw);
}
BENCHMARK(Conv2dDirect)->RangeMultiplier(2)->Range(16, 224)->Complexity();

static void Conv2dIm2col(benchmark::State& state) {
  Rng rng(7);
  const int64_t hw = state.range(0);
  Tensor x = randu(rng, {3, hw, hw});
  Tensor w = randu(rng, {16, 3, 3, 3});
  Tensor b = randu(rng, {16});
  for (auto _ : state) {
    Tensor y = ops::conv2d(x, w, b, 1, 1, 1, 1, ops::ConvAlgo::Im2col);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetComplexityN(hw * hw);
}
BENCHMARK(Conv2dIm2col)->RangeMultiplier(2)->Range(16, 224)->Complexity();

BENCHMARK_MAIN();
