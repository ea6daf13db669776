#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "papnf/metrics.hpp"
#include "papnf/model.hpp"

namespace papnf {

/// Produces the ensemble for one window; must be safe to call concurrently.
using Forecaster = std::function<ForecastEnsemble(const WindowSample&)>;

struct EvalOptions {
  bool fair_crps = false;
  double extreme_top_frac = 0.1;
  bool keep_quantiles = true;
};

struct QuantileRow {
  std::size_t window_id = 0;
  std::size_t step = 0;
  std::size_t channel = 0;
  double q05 = 0.0, q10 = 0.0, q50 = 0.0, q90 = 0.0, q95 = 0.0;
  double truth = 0.0;
};

struct EvalResult {
  MetricsReport report;
  std::vector<QuantileRow> quantiles;
};

/// Point metrics use the ensemble mean; extreme coverage ranks points by the
/// persistence forecast's absolute error. Windows are processed in parallel
/// and reduced in window order.
EvalResult evaluate(const std::vector<WindowSample>& windows, const Forecaster& forecaster,
                    const EvalOptions& options = {});
EvalResult evaluate_model(const PapNfModel& model, const std::vector<WindowSample>& windows, std::size_t samples,
                          std::uint64_t seed, const EvalOptions& options = {});

}  // namespace papnf
