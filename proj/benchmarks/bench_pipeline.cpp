#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "covspec/estimate.hpp"
#include "covspec/simulate.hpp"

using namespace covspec;

static void BM_EstimateAll(benchmark::State& state) {
  const SiteLayout l = bench::layout(static_cast<std::size_t>(state.range(0)));
  const auto s = sample_field(bench::model(), l, 4096, 9);
  const auto table = smooth(raw_cross_spectra(half_fft(center(s.values)), l), 129);
  EstimationConfig cfg;
  if (state.range(1) == 0) cfg.k1 = cfg.k2 = cfg.k3 = 1;
  for (auto _ : state) benchmark::DoNotOptimize(estimate_all(table, cfg));
}
// second argument: 0 fixed orders, 1 AIC over 0..6
BENCHMARK(BM_EstimateAll)->Args({10, 0})->Args({10, 1})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
