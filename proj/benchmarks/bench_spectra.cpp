#include <benchmark/benchmark.h>

#include "bench_common.hpp"
#include "covspec/simulate.hpp"
#include "covspec/spectra.hpp"

using namespace covspec;

static void BM_HalfFft(benchmark::State& state) {
  const auto T = static_cast<std::size_t>(state.range(0));
  const auto s = sample_field(bench::model(), bench::layout(10), T, 1);
  for (auto _ : state) benchmark::DoNotOptimize(half_fft(s.values));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_HalfFft)->RangeMultiplier(4)->Range(1024, 65536)->Complexity(benchmark::oNLogN);

static void BM_DaniellSmooth(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  std::vector<Complex> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = {n(rng), n(rng)};
  for (auto _ : state) benchmark::DoNotOptimize(daniell_smooth(std::span<const Complex>(x), 255));
}
BENCHMARK(BM_DaniellSmooth)->Arg(2048)->Arg(3287)->Arg(16384);

static void BM_SmoothTable(benchmark::State& state) {
  const auto S = static_cast<std::size_t>(state.range(0));
  const SiteLayout l = bench::layout(S);
  const auto raw = raw_cross_spectra(half_fft(center(sample_field(bench::model(), l, 4096, 2).values)), l);
  for (auto _ : state) benchmark::DoNotOptimize(smooth(raw, 129));
}
BENCHMARK(BM_SmoothTable)->Arg(5)->Arg(11)->Arg(20)->Unit(benchmark::kMillisecond);
