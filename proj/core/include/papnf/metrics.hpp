#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "papnf/data.hpp"
#include "papnf/ensemble.hpp"

namespace papnf {

struct PointMetrics {
  double mse = 0.0;
  double mae = 0.0;
};

PointMetrics point_metrics(std::span<const double> forecast, std::span<const double> truth);

/// Energy-form CRPS of an empirical ensemble:
///   (1/S) sum_i |X_i - y| - 1/(2 S^2) sum_i sum_j |X_i - X_j|.
/// With `fair` the pairwise term uses 1/(2 S (S - 1)) instead.
double crps_empirical(std::span<const double> samples, double y, bool fair = false);
/// Same, for samples already sorted ascending (O(S)).
double crps_sorted(std::span<const double> sorted, double y, bool fair = false);

struct WeightedCrps {
  double value = 0.0;
  /// False when every target is zero; `value` is then the plain CRPS sum.
  bool normalized = true;
};

/// sum of per-point CRPS / sum of |y|.
WeightedCrps weighted_crps(std::span<const double> crps_values, std::span<const double> truth);
WeightedCrps weighted_crps(std::span<const ForecastEnsemble> ensembles,
                           std::span<const std::vector<double>> truths, bool fair = false);

/// Central interval [(1 - level)/2, (1 + level)/2] of sorted samples.
std::pair<double, double> central_interval(std::span<const double> sorted, double level);
/// Fraction of truth values inside the per-point central interval (inclusive).
double coverage(const ForecastEnsemble& ensemble, std::span<const double> truth, double level);

/// Coverage restricted to the ceil(top_frac * n) points with the largest
/// baseline error; ties go to the earliest index.
double extreme_coverage(std::span<const double> baseline_errors, std::span<const std::uint8_t> inside,
                        double top_frac = 0.1);
double extreme_coverage(std::span<const double> baseline_errors, std::span<const ForecastEnsemble> ensembles,
                        std::span<const std::vector<double>> truths, double level = 0.9, double top_frac = 0.1);
/// Indices selected by extreme_coverage.
std::vector<std::size_t> top_error_indices(std::span<const double> errors, double top_frac);

namespace baseline {

/// Repeat the last look-back row across the horizon.
std::vector<double> persistence(const WindowSample& window);
/// Repeat the last `period` look-back rows.
std::vector<double> seasonal_naive(const WindowSample& window, std::size_t period);
/// Per-channel one-step-difference standard deviation of the look-back.
std::vector<double> residual_sigma(const WindowSample& window);
/// Persistence mean with N(0, sigma_c^2 (h + 1)) noise at step h; draw s uses
/// the stream derive_seed(seed, "baseline", window.start, s).
ForecastEnsemble gaussian_residual(const WindowSample& window, std::size_t samples, std::uint64_t seed);

}  // namespace baseline

struct MetricsReport {
  double mse = 0.0;
  double mae = 0.0;
  double crps_mean = 0.0;
  double weighted_crps = 0.0;
  bool weighted_crps_normalized = true;
  double coverage80 = 0.0;
  double coverage90 = 0.0;
  double coverage95 = 0.0;
  double extreme_coverage90 = 0.0;
  std::vector<double> mse_by_step;
  std::vector<double> mae_by_step;
  std::vector<double> crps_by_step;
  std::size_t windows = 0;
  std::size_t points = 0;
  std::size_t samples = 0;
};

/// Canonical JSON (sorted keys, fixed number formatting).
std::string to_json(const MetricsReport& report);

}  // namespace papnf
