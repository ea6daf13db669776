#include "papnf/cli/dataset.hpp"

#include <filesystem>

#include "papnf/serialize.hpp"
#include "papnf/synthetic.hpp"

namespace papnf::cli {

RawSeries load_series(const RunConfig& config) {
  const std::string& d = config.dataset;
  if (d.starts_with("synthetic:")) {
    const std::string kind = d.substr(10);
    if (kind == "ar1_seasonal") {
      synthetic::Ar1SeasonalSpec spec;
      spec.length = config.synthetic_length;
      spec.seed = config.synthetic_seed;
      return synthetic::ar1_seasonal(spec);
    }
    if (kind == "ett_like") return synthetic::ett_like(config.synthetic_length, config.synthetic_seed);
    if (kind == "sinusoid") return synthetic::sinusoid(config.synthetic_length, 1, config.seasonal_period, 1.0, 10.0);
    throw ConfigError("unknown synthetic dataset '" + kind + "' (expected ar1_seasonal, ett_like or sinusoid)");
  }
  if (!std::filesystem::exists(d)) throw ConfigError("dataset file '" + d + "' does not exist");
  return load_csv(d);
}

SplitSpec resolved_split(const RunConfig& config, const RawSeries& series) {
  if (config.split) return *config.split;
  if (config.dataset.starts_with("synthetic:")) {
    const std::size_t t = series.length();
    const std::size_t train = t * 70 / 100;
    const std::size_t val = t * 15 / 100;
    return {train, val, t - train - val};
  }
  const std::string name = std::filesystem::path(config.dataset).filename().string();
  return name.starts_with("ETTm") ? kEttMinuteSplit : kEttHourlySplit;
}

Dataset load_dataset(const RunConfig& config) {
  Dataset d;
  d.series = load_series(config);
  d.split_spec = resolved_split(config, d.series);
  const SeriesSplits parts = split(d.series, d.split_spec);
  d.train = make_windows(parts.train, config.lookback, config.horizon, 1);
  d.val = make_windows(parts.val, config.lookback, config.horizon, 1);
  d.test = make_windows(parts.test, config.lookback, config.horizon, 1);
  d.windows_sha256 = hash_windows(d.train, d.val, d.test);
  return d;
}

const std::vector<WindowSample>& split_windows(const Dataset& data, const std::string& name) {
  if (name == "train") return data.train;
  if (name == "val") return data.val;
  if (name == "test") return data.test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

std::string hash_windows(const std::vector<WindowSample>& train, const std::vector<WindowSample>& val,
                         const std::vector<WindowSample>& test) {
  ParameterList entries;
  auto add = [&](const std::vector<WindowSample>& windows, const std::string& tag) {
    for (const auto& w : windows) {
      const std::string id = tag + std::to_string(w.start);
      entries.push_back({id + ".x", Tensor::from({w.x.size()}, w.x)});
      entries.push_back({id + ".y", Tensor::from({w.y.size()}, w.y)});
    }
  };
  add(train, "train@");
  add(val, "val@");
  add(test, "test@");
  return tensors_sha256(entries);
}

}  // namespace papnf::cli
