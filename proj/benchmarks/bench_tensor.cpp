#include <benchmark/benchmark.h>

#include "papnf/random.hpp"
#include "papnf/tensor.hpp"

using namespace papnf;

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = init_normal({n, n}, 1.0, rng, false);
  const Tensor b = init_normal({n, n}, 1.0, rng, false);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(16, 256);

static void BM_LinearForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const Tensor x = init_normal({n, 64}, 1.0, rng, false);
  Tensor w = init_normal({128, 64}, 0.1, rng);
  Tensor b = init_normal({128}, 0.1, rng);
  for (auto _ : state) {
    const Tensor loss = sum(tanh(linear(x, w, b)));
    backward(loss);
  }
}
BENCHMARK(BM_LinearForwardBackward)->Arg(8)->Arg(64);

static void BM_CausalSoftmax(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const Tensor x = init_normal({n, n}, 1.0, rng, false);
  for (auto _ : state) benchmark::DoNotOptimize(softmax_rows(x, true));
}
BENCHMARK(BM_CausalSoftmax)->Arg(11)->Arg(64);
