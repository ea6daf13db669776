#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace papnf {

/// A multichannel series loaded from CSV: T rows, C numeric channels.
struct RawSeries {
  std::vector<std::string> timestamps;
  std::vector<std::string> channel_names;
  std::vector<double> values;  // row-major T x C
  /// Row offset of this series inside the series it was split from.
  std::size_t origin = 0;

  std::size_t length() const { return timestamps.size(); }
  std::size_t channels() const { return channel_names.size(); }
  double at(std::size_t t, std::size_t c) const { return values[t * channels() + c]; }
  /// Rows [begin, end) as a new series whose origin accounts for the offset.
  RawSeries slice(std::size_t begin, std::size_t end) const;
};

struct SplitSpec {
  std::size_t train_len = 0;
  std::size_t val_len = 0;
  std::size_t test_len = 0;
};

/// Repo default for hourly ETT files: 12/4/4 months of hourly data.
inline constexpr SplitSpec kEttHourlySplit{8640, 2880, 2880};
/// Repo default for 15-minute ETT files.
inline constexpr SplitSpec kEttMinuteSplit{34560, 11520, 11520};

struct SeriesSplits {
  RawSeries train;
  RawSeries val;
  RawSeries test;
};

/// Per-channel statistics of a look-back window.
struct Scaler {
  std::vector<double> mean;
  std::vector<double> std;
};

inline constexpr double kStdFloor = 1e-6;

struct WindowSample {
  std::size_t id = 0;      // index within its segment
  std::size_t start = 0;   // absolute row of x[0] in the source file
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  std::size_t channels = 0;
  std::vector<double> x;   // lookback x channels, row-major
  std::vector<double> y;   // horizon x channels, row-major
  Scaler scaler;           // computed from x only
};

/// Parse a CSV with a mandatory header whose first column is the timestamp.
/// Errors (ragged rows, non-numeric cells, empty file, unordered timestamps)
/// raise ParseError naming the offending 1-based line.
RawSeries load_csv(const std::filesystem::path& path);
RawSeries parse_csv(const std::string& text);
void write_csv(const RawSeries& series, const std::filesystem::path& path);

/// Contiguous chronological train/val/test segments from the head of the series.
SeriesSplits split(const RawSeries& series, const SplitSpec& spec);

std::size_t window_count(std::size_t segment_len, std::size_t lookback, std::size_t horizon,
                         std::size_t stride = 1);
std::vector<WindowSample> make_windows(const RawSeries& segment, std::size_t lookback,
                                       std::size_t horizon, std::size_t stride = 1);

/// Population mean / std per channel of a rows x channels block, std floored.
Scaler fit_scaler(std::span<const double> block, std::size_t channels);
std::vector<double> standardize(std::span<const double> block, const Scaler& scaler);
std::vector<double> destandardize(std::span<const double> block, const Scaler& scaler);

struct StandardizedWindow {
  std::vector<double> x;
  std::vector<double> y;
};
StandardizedWindow standardize(const WindowSample& window);

}  // namespace papnf
