#include <benchmark/benchmark.h>

#include "papnf/model.hpp"
#include "papnf/synthetic.hpp"
#include "papnf/trainer.hpp"

using namespace papnf;

namespace {

WindowSample default_window(const ModelConfig& cfg) {
  synthetic::Ar1SeasonalSpec spec;
  spec.length = cfg.lookback + cfg.horizon;
  spec.channels = cfg.channels;
  return make_windows(synthetic::ar1_seasonal(spec), cfg.lookback, cfg.horizon)[0];
}

}  // namespace

static void BM_Condition(benchmark::State& state) {
  const ModelConfig cfg;
  const PapNfModel model = PapNfModel::create(cfg);
  const StandardizedWindow w = standardize(default_window(cfg));
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.condition(w.x));
}
BENCHMARK(BM_Condition)->Unit(benchmark::kMicrosecond);

static void BM_SampleForecasts(benchmark::State& state) {
  const ModelConfig cfg;
  const PapNfModel model = PapNfModel::create(cfg);
  const WindowSample w = default_window(cfg);
  const auto samples = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_forecasts(model, w, samples, 1));
}
BENCHMARK(BM_SampleForecasts)->Arg(16)->Arg(100)->Unit(benchmark::kMicrosecond);

static void BM_TrainStep(benchmark::State& state) {
  const ModelConfig cfg;
  const PapNfModel model = PapNfModel::create(cfg);
  const WindowSample w = default_window(cfg);
  TrainConfig tc;
  tc.objective = state.range(0) == 0 ? Objective::kCrps : Objective::kMse;
  Adam adam(model.trainable_parameters(), 0.0);
  std::uint64_t step = 0;
  for (auto _ : state) {
    backward(window_loss(model, w, tc, step++));
    adam.step();
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);
