#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "covspec/simulate.hpp"

using namespace covspec;

static void BM_SampleField(benchmark::State& state) {
  const SiteLayout l = bench::layout(static_cast<std::size_t>(state.range(0)));
  const auto T = static_cast<std::size_t>(state.range(1));
  const SteinModel m = bench::model();
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(sample_field(m, l, T, ++seed));
}
BENCHMARK(BM_SampleField)->Args({10, 4096})->Args({11, 6574})->Args({30, 4096})->Unit(benchmark::kMillisecond);
