#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace papnf {

/// Type-7 empirical quantile (linear interpolation between order statistics)
/// of values already sorted ascending.
double quantile_sorted(std::span<const double> sorted, double level);

/// S sampled trajectories of shape H x C on the original data scale, stored
/// sample-major: samples[(s * H + h) * C + c].
class ForecastEnsemble {
 public:
  ForecastEnsemble() = default;
  ForecastEnsemble(std::size_t samples, std::size_t horizon, std::size_t channels, std::vector<double> values);

  std::size_t samples() const { return samples_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t channels() const { return channels_; }
  double at(std::size_t s, std::size_t h, std::size_t c) const {
    return values_[(s * horizon_ + h) * channels_ + c];
  }
  std::span<const double> values() const { return values_; }

  /// The S draws at one (step, channel), sorted ascending.
  std::vector<double> sorted_point(std::size_t h, std::size_t c) const;
  /// Per-point quantile at `level`, H x C row-major.
  std::vector<double> quantile(double level) const;
  /// Per-point ensemble mean, H x C row-major.
  std::vector<double> mean() const;

 private:
  std::size_t samples_ = 0;
  std::size_t horizon_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> values_;
};

}  // namespace papnf
