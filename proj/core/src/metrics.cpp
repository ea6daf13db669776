#include "papnf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "papnf/errors.hpp"
#include "papnf/random.hpp"

namespace papnf {

PointMetrics point_metrics(std::span<const double> forecast, std::span<const double> truth) {
  if (forecast.size() != truth.size() || truth.empty()) {
    throw ShapeError("point_metrics: forecast has " + std::to_string(forecast.size()) + " values, truth " +
                     std::to_string(truth.size()));
  }
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double e = forecast[i] - truth[i];
    se += e * e;
    ae += std::abs(e);
  }
  const auto n = static_cast<double>(truth.size());
  return {se / n, ae / n};
}

double crps_sorted(std::span<const double> sorted, double y, bool fair) {
  const std::size_t s = sorted.size();
  if (s < 2) throw std::invalid_argument("crps needs at least two samples");
  double accuracy = 0.0, pairwise = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    accuracy += std::abs(sorted[i] - y);
    // x_(i) appears i times as the larger and (s - 1 - i) times as the smaller element.
    pairwise += (2.0 * static_cast<double>(i) - static_cast<double>(s - 1)) * sorted[i];
  }
  pairwise *= 2.0;  // ordered pairs
  const auto n = static_cast<double>(s);
  const double denom = fair ? 2.0 * n * (n - 1.0) : 2.0 * n * n;
  return accuracy / n - pairwise / denom;
}

double crps_empirical(std::span<const double> samples, double y, bool fair) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  return crps_sorted(sorted, y, fair);
}

WeightedCrps weighted_crps(std::span<const double> crps_values, std::span<const double> truth) {
  if (crps_values.size() != truth.size()) throw ShapeError("weighted_crps: crps and truth lengths differ");
  const double num = std::accumulate(crps_values.begin(), crps_values.end(), 0.0);
  double den = 0.0;
  for (double y : truth) den += std::abs(y);
  if (den == 0.0) return {num, false};
  return {num / den, true};
}

WeightedCrps weighted_crps(std::span<const ForecastEnsemble> ensembles, std::span<const std::vector<double>> truths,
                           bool fair) {
  if (ensembles.size() != truths.size()) throw ShapeError("weighted_crps: ensemble and truth counts differ");
  std::vector<double> crps, flat;
  for (std::size_t w = 0; w < ensembles.size(); ++w) {
    const ForecastEnsemble& e = ensembles[w];
    if (truths[w].size() != e.horizon() * e.channels()) throw ShapeError("weighted_crps: truth shape mismatch");
    for (std::size_t h = 0; h < e.horizon(); ++h) {
      for (std::size_t c = 0; c < e.channels(); ++c) {
        const double y = truths[w][h * e.channels() + c];
        crps.push_back(crps_sorted(e.sorted_point(h, c), y, fair));
        flat.push_back(y);
      }
    }
  }
  return weighted_crps(crps, flat);
}

std::pair<double, double> central_interval(std::span<const double> sorted, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("interval level must lie in (0, 1)");
  return {quantile_sorted(sorted, 0.5 * (1.0 - level)), quantile_sorted(sorted, 0.5 * (1.0 + level))};
}

double coverage(const ForecastEnsemble& ensemble, std::span<const double> truth, double level) {
  if (truth.size() != ensemble.horizon() * ensemble.channels()) throw ShapeError("coverage: truth shape mismatch");
  std::size_t inside = 0;
  for (std::size_t h = 0; h < ensemble.horizon(); ++h) {
    for (std::size_t c = 0; c < ensemble.channels(); ++c) {
      const auto [lo, hi] = central_interval(ensemble.sorted_point(h, c), level);
      const double y = truth[h * ensemble.channels() + c];
      inside += (y >= lo && y <= hi) ? 1 : 0;
    }
  }
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

std::vector<std::size_t> top_error_indices(std::span<const double> errors, double top_frac) {
  if (!(top_frac > 0.0 && top_frac <= 1.0)) throw std::invalid_argument("top_frac must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(std::ceil(top_frac * static_cast<double>(errors.size()) - 1e-9));
  if (k == 0) throw std::invalid_argument("extreme_coverage: empty selection");
  std::vector<std::size_t> idx(errors.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double extreme_coverage(std::span<const double> baseline_errors, std::span<const std::uint8_t> inside,
                        double top_frac) {
  if (baseline_errors.size() != inside.size()) throw ShapeError("extreme_coverage: length mismatch");
  const auto idx = top_error_indices(baseline_errors, top_frac);
  std::size_t hit = 0;
  for (std::size_t i : idx) hit += inside[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

double extreme_coverage(std::span<const double> baseline_errors, std::span<const ForecastEnsemble> ensembles,
                        std::span<const std::vector<double>> truths, double level, double top_frac) {
  if (ensembles.size() != truths.size()) throw ShapeError("extreme_coverage: ensemble and truth counts differ");
  std::vector<std::uint8_t> inside;
  for (std::size_t w = 0; w < ensembles.size(); ++w) {
    const ForecastEnsemble& e = ensembles[w];
    for (std::size_t h = 0; h < e.horizon(); ++h) {
      for (std::size_t c = 0; c < e.channels(); ++c) {
        const auto [lo, hi] = central_interval(e.sorted_point(h, c), level);
        const double y = truths[w][h * e.channels() + c];
        inside.push_back(y >= lo && y <= hi);
      }
    }
  }
  return extreme_coverage(baseline_errors, inside, top_frac);
}

namespace baseline {

std::vector<double> persistence(const WindowSample& w) {
  std::vector<double> out(w.horizon * w.channels);
  const double* last = w.x.data() + (w.lookback - 1) * w.channels;
  for (std::size_t h = 0; h < w.horizon; ++h) std::copy(last, last + w.channels, out.begin() + h * w.channels);
  return out;
}

std::vector<double> seasonal_naive(const WindowSample& w, std::size_t period) {
  if (period == 0 || period > w.lookback) {
    throw ConfigError("seasonal period " + std::to_string(period) + " must lie in [1, lookback = " +
                      std::to_string(w.lookback) + "]");
  }
  std::vector<double> out(w.horizon * w.channels);
  for (std::size_t h = 0; h < w.horizon; ++h) {
    const std::size_t src = w.lookback - period + h % period;
    std::copy_n(w.x.begin() + src * w.channels, w.channels, out.begin() + h * w.channels);
  }
  return out;
}

std::vector<double> residual_sigma(const WindowSample& w) {
  std::vector<double> sigma(w.channels, 0.0);
  if (w.lookback < 2) return sigma;
  const auto n = static_cast<double>(w.lookback - 1);
  for (std::size_t c = 0; c < w.channels; ++c) {
    double mu = 0.0;
    for (std::size_t t = 1; t < w.lookback; ++t) mu += w.x[t * w.channels + c] - w.x[(t - 1) * w.channels + c];
    mu /= n;
    double var = 0.0;
    for (std::size_t t = 1; t < w.lookback; ++t) {
      const double d = w.x[t * w.channels + c] - w.x[(t - 1) * w.channels + c] - mu;
      var += d * d;
    }
    sigma[c] = std::sqrt(var / n);
  }
  return sigma;
}

ForecastEnsemble gaussian_residual(const WindowSample& w, std::size_t samples, std::uint64_t seed) {
  if (samples == 0) throw ConfigError("sample count must be at least 1");
  const auto mean = persistence(w);
  const auto sigma = residual_sigma(w);
  const std::size_t n = w.horizon * w.channels;
  std::vector<double> values(samples * n);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, "baseline", w.start, s));
    for (std::size_t h = 0; h < w.horizon; ++h) {
      const double spread = std::sqrt(static_cast<double>(h + 1));
      for (std::size_t c = 0; c < w.channels; ++c) {
        const std::size_t i = h * w.channels + c;
        values[s * n + i] = mean[i] + sigma[c] * spread * rng.normal();
      }
    }
  }
  return ForecastEnsemble(samples, w.horizon, w.channels, std::move(values));
}

}  // namespace baseline

std::string to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["counts"] = {{"points", r.points}, {"samples", r.samples}, {"windows", r.windows}};
  j["coverage80"] = r.coverage80;
  j["coverage90"] = r.coverage90;
  j["coverage95"] = r.coverage95;
  j["crps_mean"] = r.crps_mean;
  j["extreme_coverage90"] = r.extreme_coverage90;
  j["mae"] = r.mae;
  j["mse"] = r.mse;
  j["per_horizon"] = {{"crps", r.crps_by_step}, {"mae", r.mae_by_step}, {"mse", r.mse_by_step}};
  j["weighted_crps"] = r.weighted_crps;
  j["weighted_crps_normalized"] = r.weighted_crps_normalized;
  return j.dump(2);
}

}  // namespace papnf
