#include "papnf/evaluate.hpp"

#include <cmath>

#include "papnf/parallel.hpp"

namespace papnf {

namespace {

struct WindowStats {
  std::vector<double> sq, abs, crps, truth, persistence_error;
  std::vector<std::uint8_t> in80, in90, in95;
  std::vector<QuantileRow> rows;
  std::size_t samples = 0;
};

bool within(const std::pair<double, double>& interval, double y) { return y >= interval.first && y <= interval.second; }

WindowStats summarize(const WindowSample& w, const ForecastEnsemble& e, const EvalOptions& options) {
  if (e.horizon() != w.horizon || e.channels() != w.channels) {
    throw ShapeError("forecaster returned an ensemble of the wrong shape for window " + std::to_string(w.id));
  }
  WindowStats st;
  st.samples = e.samples();
  const auto mean = e.mean();
  const auto naive = baseline::persistence(w);
  for (std::size_t h = 0; h < w.horizon; ++h) {
    for (std::size_t c = 0; c < w.channels; ++c) {
      const std::size_t i = h * w.channels + c;
      const double y = w.y[i];
      const auto sorted = e.sorted_point(h, c);
      const double err = mean[i] - y;
      st.sq.push_back(err * err);
      st.abs.push_back(std::abs(err));
      // A single draw is a point mass, whose CRPS is the absolute error.
      st.crps.push_back(sorted.size() == 1 ? std::abs(sorted[0] - y) : crps_sorted(sorted, y, options.fair_crps));
      st.truth.push_back(y);
      st.persistence_error.push_back(std::abs(naive[i] - y));
      st.in80.push_back(within(central_interval(sorted, 0.80), y));
      st.in90.push_back(within(central_interval(sorted, 0.90), y));
      st.in95.push_back(within(central_interval(sorted, 0.95), y));
      if (options.keep_quantiles) {
        st.rows.push_back({w.id, h, c, quantile_sorted(sorted, 0.05), quantile_sorted(sorted, 0.10),
                           quantile_sorted(sorted, 0.50), quantile_sorted(sorted, 0.90),
                           quantile_sorted(sorted, 0.95), y});
      }
    }
  }
  return st;
}

double fraction(const std::vector<std::uint8_t>& flags) {
  std::size_t n = 0;
  for (auto f : flags) n += f;
  return static_cast<double>(n) / static_cast<double>(flags.size());
}

}  // namespace

EvalResult evaluate(const std::vector<WindowSample>& windows, const Forecaster& forecaster,
                    const EvalOptions& options) {
  if (windows.empty()) throw ConfigError("evaluation split has no windows");
  std::vector<WindowStats> per_window(windows.size());
  parallel_for(windows.size(), [&](std::size_t i) {
    per_window[i] = summarize(windows[i], forecaster(windows[i]), options);
  });

  const std::size_t horizon = windows.front().horizon;
  const std::size_t channels = windows.front().channels;
  WindowStats all;
  std::vector<double> step_sq(horizon, 0.0), step_abs(horizon, 0.0), step_crps(horizon, 0.0);
  EvalResult result;
  for (auto& st : per_window) {
    for (std::size_t i = 0; i < st.sq.size(); ++i) {
      step_sq[i / channels] += st.sq[i];
      step_abs[i / channels] += st.abs[i];
      step_crps[i / channels] += st.crps[i];
    }
    auto append = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    append(all.sq, st.sq);
    append(all.abs, st.abs);
    append(all.crps, st.crps);
    append(all.truth, st.truth);
    append(all.persistence_error, st.persistence_error);
    append(all.in80, st.in80);
    append(all.in90, st.in90);
    append(all.in95, st.in95);
    append(result.quantiles, st.rows);
  }

  MetricsReport& r = result.report;
  const auto points = static_cast<double>(all.sq.size());
  auto total = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  r.mse = total(all.sq) / points;
  r.mae = total(all.abs) / points;
  r.crps_mean = total(all.crps) / points;
  const WeightedCrps wc = weighted_crps(all.crps, all.truth);
  r.weighted_crps = wc.value;
  r.weighted_crps_normalized = wc.normalized;
  r.coverage80 = fraction(all.in80);
  r.coverage90 = fraction(all.in90);
  r.coverage95 = fraction(all.in95);
  r.extreme_coverage90 = extreme_coverage(all.persistence_error, all.in90, options.extreme_top_frac);
  const auto per_step = static_cast<double>(windows.size() * channels);
  for (std::size_t h = 0; h < horizon; ++h) {
    r.mse_by_step.push_back(step_sq[h] / per_step);
    r.mae_by_step.push_back(step_abs[h] / per_step);
    r.crps_by_step.push_back(step_crps[h] / per_step);
  }
  r.windows = windows.size();
  r.points = all.sq.size();
  r.samples = per_window.front().samples;
  return result;
}

EvalResult evaluate_model(const PapNfModel& model, const std::vector<WindowSample>& windows, std::size_t samples,
                          std::uint64_t seed, const EvalOptions& options) {
  return evaluate(
      windows, [&](const WindowSample& w) { return sample_forecasts(model, w, samples, seed); }, options);
}

}  // namespace papnf
