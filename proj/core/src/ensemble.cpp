#include "papnf/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "papnf/errors.hpp"

namespace papnf {

double quantile_sorted(std::span<const double> sorted, double level) {
  if (sorted.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
  const double pos = level * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

ForecastEnsemble::ForecastEnsemble(std::size_t samples, std::size_t horizon, std::size_t channels,
                                   std::vector<double> values)
    : samples_(samples), horizon_(horizon), channels_(channels), values_(std::move(values)) {
  if (samples_ == 0) throw ShapeError("ensemble needs at least one sample");
  if (values_.size() != samples_ * horizon_ * channels_) {
    throw ShapeError("ensemble holds " + std::to_string(values_.size()) + " values, expected " +
                     std::to_string(samples_) + "x" + std::to_string(horizon_) + "x" + std::to_string(channels_));
  }
}

std::vector<double> ForecastEnsemble::sorted_point(std::size_t h, std::size_t c) const {
  std::vector<double> v(samples_);
  for (std::size_t s = 0; s < samples_; ++s) v[s] = at(s, h, c);
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<double> ForecastEnsemble::quantile(double level) const {
  std::vector<double> out(horizon_ * channels_);
  for (std::size_t h = 0; h < horizon_; ++h) {
    for (std::size_t c = 0; c < channels_; ++c) out[h * channels_ + c] = quantile_sorted(sorted_point(h, c), level);
  }
  return out;
}

std::vector<double> ForecastEnsemble::mean() const {
  const std::size_t n = horizon_ * channels_;
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < samples_; ++s) {
    for (std::size_t i = 0; i < n; ++i) out[i] += values_[s * n + i];
  }
  for (double& v : out) v /= static_cast<double>(samples_);
  return out;
}

}  // namespace papnf
