#pragma once

#include <string>
#include <vector>

namespace papnf::cli {

/// One channel of one window: look-back history, truth over the horizon and
/// the ensemble's per-step quantiles.
struct FanChart {
  std::string title;
  std::vector<double> history;
  std::vector<double> truth;
  std::vector<double> median;
  // lower/upper bands: 95%, 90%, 80%
  std::vector<double> lo95, hi95, lo90, hi90, lo80, hi80;
};

std::string render_fan_chart(const FanChart& chart, int width = 800, int height = 360);

}  // namespace papnf::cli
