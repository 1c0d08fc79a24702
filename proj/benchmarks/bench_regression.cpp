#include <random>

#include <benchmark/benchmark.h>

#include "covspec/regression.hpp"

using namespace covspec;

// G lag classes on F frequencies with 4 regressors
static RegressionProblem problem(std::size_t G, std::size_t F) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  RegressionProblem p;
  const auto N = static_cast<Eigen::Index>(G * F);
  p.X.resize(N, 4);
  p.y.resize(N);
  for (Eigen::Index r = 0; r < N; ++r) {
    for (int c = 0; c < 4; ++c) p.X(r, c) = n(rng);
    p.y(r) = n(rng);
    p.group.push_back(static_cast<std::size_t>(r) / F);
    p.freq_index.push_back(static_cast<std::size_t>(r) % F);
  }
  p.n_groups = G;
  p.n_freqs = F;
  return p;
}

static void BM_FitLinearSandwich(benchmark::State& state) {
  const auto p = problem(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(fit_linear(p));
}
BENCHMARK(BM_FitLinearSandwich)->Args({1, 3287})->Args({55, 2987})->Unit(benchmark::kMillisecond);

static void BM_Ar1Apply(benchmark::State& state) {
  const Eigen::VectorXd x = Eigen::VectorXd::Random(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(ar1_apply(x, 0.8));
}
BENCHMARK(BM_Ar1Apply)->Arg(3287)->Arg(32768);
