#pragma once

#include <string>
#include <vector>

#include "papnf/cli/run_config.hpp"

namespace papnf::cli {

struct Dataset {
  RawSeries series;
  SplitSpec split_spec;
  std::vector<WindowSample> train, val, test;
  /// Hash over every window's start, x and y, for cross-run identity checks.
  std::string windows_sha256;
};

RawSeries load_series(const RunConfig& config);
/// Explicit split, else the ETT defaults by file name (ETTm -> 15-minute,
/// otherwise hourly), else 70/15/15 for synthetic series.
SplitSpec resolved_split(const RunConfig& config, const RawSeries& series);
Dataset load_dataset(const RunConfig& config);
const std::vector<WindowSample>& split_windows(const Dataset& data, const std::string& name);

std::string hash_windows(const std::vector<WindowSample>& train, const std::vector<WindowSample>& val,
                         const std::vector<WindowSample>& test);

}  // namespace papnf::cli
