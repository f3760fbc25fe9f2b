// Sequential vs parallel selective-scan over growing sequence lengths.

#include <benchmark/benchmark.h>

#include "radmamba/rng.hpp"
#include "radmamba/ssm.hpp"

using namespace radmamba;

namespace {

struct ScanFixture {
  Tensor x, c, d;
  SsmParams p;
};

ScanFixture make_fixture(int64_t n, int64_t dim, int64_t dim_s) {
  Rng rng(42);
  auto fill = [&](Shape shape, double lo, double hi) {
    Tensor t = Tensor::zeros(std::move(shape), Precision::F32);
    for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
    t.round_to_precision();
    return t;
  };
  ScanFixture f;
  f.x = fill({n, dim}, -1.0, 1.0);
  f.c = fill({n, dim_s}, -1.0, 1.0);
  f.d = fill({dim}, -1.0, 1.0);
  f.p.a_bar = fill({n, dim, dim_s}, 0.0, 0.99);
  f.p.b_bar = fill({n, dim, dim_s}, -1.0, 1.0);
  return f;
}

}  // namespace

static void ScanSequential(benchmark::State& state) {
  auto f = make_fixture(state.range(0), 16, 16);
  for (auto _ : state) {
    Tensor y = scan_sequential(f.x, f.p, f.c, f.d);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(ScanSequential)->RangeMultiplier(2)->Range(8, 1024)->Complexity();

static void ScanParallel(benchmark::State& state) {
  auto f = make_fixture(state.range(0), 16, 16);
  for (auto _ : state) {
    Tensor y = scan_parallel(f.x, f.p, f.c, f.d);
    benchmark::DoNotOptimize(y.data().data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(ScanParallel)->RangeMultiplier(2)->Range(8, 1024)->Complexity();

BENCHMARK_MAIN();
