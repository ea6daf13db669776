#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "papnf/metrics.hpp"

using namespace papnf;

namespace {

std::vector<double> normal_samples(std::size_t n) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace

static void BM_CrpsEmpirical(benchmark::State& state) {
  const std::vector<double> s = normal_samples(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(crps_empirical(s, 0.3));
}
BENCHMARK(BM_CrpsEmpirical)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_Coverage(benchmark::State& state) {
  const std::size_t samples = 100, horizon = 96, channels = 7;
  const ForecastEnsemble e(samples, horizon, channels, normal_samples(samples * horizon * channels));
  const std::vector<double> truth(horizon * channels, 0.1);
  for (auto _ : state) benchmark::DoNotOptimize(coverage(e, truth, 0.9));
}
BENCHMARK(BM_Coverage);
