#include "papnf/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "papnf/errors.hpp"

namespace papnf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

std::string line_error(std::size_t line, const std::string& what) {
  return "csv line " + std::to_string(line) + ": " + what;
}

}  // namespace

RawSeries RawSeries::slice(std::size_t begin, std::size_t end) const {
  RawSeries out;
  out.channel_names = channel_names;
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  const std::size_t c = channels();
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin * c),
                    values.begin() + static_cast<std::ptrdiff_t>(end * c));
  out.origin = origin + begin;
  return out;
}

RawSeries parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  RawSeries series;

  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (!have_header) {
      if (fields.size() < 2) throw ParseError(line_error(line_no, "header needs a date column and at least one value column"));
      for (std::size_t i = 1; i < fields.size(); ++i) series.channel_names.push_back(unquote(fields[i]));
      have_header = true;
      continue;
    }
    const std::size_t channels = series.channel_names.size();
    if (fields.size() != channels + 1) {
      throw ParseError(line_error(line_no, "expected " + std::to_string(channels + 1) +
                                               " fields, found " + std::to_string(fields.size())));
    }
    std::string stamp = unquote(fields[0]);
    if (!series.timestamps.empty() && !(series.timestamps.back() < stamp)) {
      throw ParseError(line_error(line_no, "timestamp '" + stamp + "' is not after '" +
                                               series.timestamps.back() + "'"));
    }
    for (std::size_t c = 1; c < fields.size(); ++c) {
      const std::string_view cell = fields[c];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(line_error(line_no, "non-numeric value '" + std::string(cell) +
                                                 "' in column '" + series.channel_names[c - 1] + "'"));
      }
      series.values.push_back(v);
    }
    series.timestamps.push_back(std::move(stamp));
  }
  if (!have_header) throw ParseError("csv: empty file");
  if (series.timestamps.empty()) throw ParseError("csv: header present but no data rows");
  return series;
}

RawSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("csv: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

void write_csv(const RawSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("csv: cannot write " + path.string());
  out << "date";
  for (const auto& name : series.channel_names) out << ',' << name;
  out << '\n';
  out << std::setprecision(17);
  const std::size_t c = series.channels();
  for (std::size_t t = 0; t < series.length(); ++t) {
    out << series.timestamps[t];
    for (std::size_t j = 0; j < c; ++j) out << ',' << series.values[t * c + j];
    out << '\n';
  }
}

SeriesSplits split(const RawSeries& series, const SplitSpec& spec) {
  if (spec.train_len == 0 || spec.val_len == 0 || spec.test_len == 0) {
    throw ConfigError("split: all segment lengths must be positive");
  }
  const std::size_t total = spec.train_len + spec.val_len + spec.test_len;
  if (total > series.length()) {
    throw ConfigError("split: " + std::to_string(spec.train_len) + "/" + std::to_string(spec.val_len) +
                      "/" + std::to_string(spec.test_len) + " needs " + std::to_string(total) +
                      " rows but the series has " + std::to_string(series.length()));
  }
  const std::size_t a = spec.train_len;
  const std::size_t b = a + spec.val_len;
  return {series.slice(0, a), series.slice(a, b), series.slice(b, total)};
}

std::size_t window_count(std::size_t segment_len, std::size_t lookback, std::size_t horizon,
                         std::size_t stride) {
  if (stride == 0) throw ConfigError("window stride must be positive");
  if (segment_len < lookback + horizon) return 0;
  return (segment_len - lookback - horizon) / stride + 1;
}

std::vector<WindowSample> make_windows(const RawSeries& segment, std::size_t lookback,
                                       std::size_t horizon, std::size_t stride) {
  if (lookback == 0 || horizon == 0) throw ConfigError("make_windows: lookback and horizon must be positive");
  if (segment.length() < lookback + horizon) {
    throw ConfigError("make_windows: segment of " + std::to_string(segment.length()) +
                      " steps is shorter than lookback + horizon = " +
                      std::to_string(lookback + horizon));
  }
  const std::size_t n = window_count(segment.length(), lookback, horizon, stride);
  const std::size_t c = segment.channels();
  std::vector<WindowSample> windows;
  windows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = i * stride;
    WindowSample w;
    w.id = i;
    w.start = segment.origin + s;
    w.lookback = lookback;
    w.horizon = horizon;
    w.channels = c;
    auto base = segment.values.begin() + static_cast<std::ptrdiff_t>(s * c);
    w.x.assign(base, base + static_cast<std::ptrdiff_t>(lookback * c));
    w.y.assign(base + static_cast<std::ptrdiff_t>(lookback * c),
               base + static_cast<std::ptrdiff_t>((lookback + horizon) * c));
    w.scaler = fit_scaler(w.x, c);
    windows.push_back(std::move(w));
  }
  return windows;
}

Scaler fit_scaler(std::span<const double> block, std::size_t channels) {
  if (channels == 0 || block.size() % channels != 0 || block.empty()) {
    throw ShapeError("fit_scaler: block of " + std::to_string(block.size()) +
                     " values is not a whole number of rows of " + std::to_string(channels));
  }
  const std::size_t rows = block.size() / channels;
  Scaler s;
  s.mean.assign(channels, 0.0);
  s.std.assign(channels, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) s.mean[c] += block[r * channels + c];
  }
  for (double& m : s.mean) m /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < channels; ++c) {
      const double d = block[r * channels + c] - s.mean[c];
      s.std[c] += d * d;
    }
  }
  for (double& v : s.std) v = std::max(std::sqrt(v / static_cast<double>(rows)), kStdFloor);
  return s;
}

std::vector<double> standardize(std::span<const double> block, const Scaler& scaler) {
  const std::size_t c = scaler.mean.size();
  if (c == 0 || block.size() % c != 0) throw ShapeError("standardize: block does not match scaler width");
  std::vector<double> out(block.size());
  for (std::size_t i = 0; i < block.size(); ++i) out[i] = (block[i] - scaler.mean[i % c]) / scaler.std[i % c];
  return out;
}

std::vector<double> destandardize(std::span<const double> block, const Scaler& scaler) {
  const std::size_t c = scaler.mean.size();
  if (c == 0 || block.size() % c != 0) throw ShapeError("destandardize: block does not match scaler width");
  std::vector<double> out(block.size());
  for (std::size_t i = 0; i < block.size(); ++i) out[i] = block[i] * scaler.std[i % c] + scaler.mean[i % c];
  return out;
}

StandardizedWindow standardize(const WindowSample& window) {
  return {standardize(window.x, window.scaler), standardize(window.y, window.scaler)};
}

}  // namespace papnf
