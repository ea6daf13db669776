#include "papnf/synthetic.hpp"

#include <cmath>
#include <ctime>
#include <numbers>

#include "papnf/random.hpp"

namespace papnf::synthetic {

std::vector<std::string> hourly_timestamps(std::size_t length) {
  std::tm base{};
  base.tm_year = 2016 - 1900;
  base.tm_mon = 6;
  base.tm_mday = 1;
  const std::time_t start = timegm(&base);
  std::vector<std::string> stamps;
  stamps.reserve(length);
  char buf[32];
  for (std::size_t t = 0; t < length; ++t) {
    const std::time_t now = start + static_cast<std::time_t>(t) * 3600;
    std::tm parts{};
    gmtime_r(&now, &parts);
    std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M:%S", &parts);
    stamps.emplace_back(buf);
  }
  return stamps;
}

RawSeries ar1_seasonal(const Ar1SeasonalSpec& spec) {
  RawSeries s;
  s.timestamps = hourly_timestamps(spec.length);
  for (std::size_t c = 0; c < spec.channels; ++c) s.channel_names.push_back("ch" + std::to_string(c));
  s.values.resize(spec.length * spec.channels);
  Rng rng(derive_seed(spec.seed, "ar1_seasonal"));
  std::vector<double> e(spec.channels, 0.0);
  // burn in so the noise starts from its stationary distribution
  for (int k = 0; k < 200; ++k) {
    for (double& v : e) v = spec.phi * v + spec.noise_sigma * rng.normal();
  }
  const double w = 2.0 * std::numbers::pi / static_cast<double>(spec.period);
  for (std::size_t t = 0; t < spec.length; ++t) {
    for (std::size_t c = 0; c < spec.channels; ++c) {
      e[c] = spec.phi * e[c] + spec.noise_sigma * rng.normal();
      const double phase = 0.7 * static_cast<double>(c);
      s.values[t * spec.channels + c] =
          spec.level + spec.amplitude * std::sin(w * static_cast<double>(t) + phase) + e[c];
    }
  }
  return s;
}

RawSeries sinusoid(std::size_t length, std::size_t channels, std::size_t period, double amplitude,
                   double level) {
  RawSeries s;
  s.timestamps = hourly_timestamps(length);
  for (std::size_t c = 0; c < channels; ++c) s.channel_names.push_back("ch" + std::to_string(c));
  s.values.resize(length * channels);
  const double w = 2.0 * std::numbers::pi / static_cast<double>(period);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      s.values[t * channels + c] =
          level + amplitude * std::sin(w * static_cast<double>(t) + 0.5 * static_cast<double>(c));
    }
  }
  return s;
}

RawSeries ett_like(std::size_t length, std::uint64_t seed) {
  RawSeries s;
  s.timestamps = hourly_timestamps(length);
  s.channel_names = {"HUFL", "HULL", "MUFL", "MULL", "LUFL", "LULL", "OT"};
  constexpr std::size_t kC = 7;
  s.values.resize(length * kC);
  Rng rng(derive_seed(seed, "ett_like"));

  // loadings of (daily, weekly, drift, shared noise) per load channel
  constexpr double kDaily[6] = {2.5, 0.6, 2.0, 0.5, 1.2, 0.4};
  constexpr double kWeekly[6] = {0.8, 0.2, 0.7, 0.2, 0.4, 0.1};
  constexpr double kDrift[6] = {1.0, 0.3, 0.9, 0.25, 0.5, 0.2};
  constexpr double kLevel[6] = {8.0, 2.0, 5.0, 1.0, 3.0, 1.0};
  constexpr double kPhase[6] = {0.0, 0.3, 0.1, 0.4, 0.6, 0.9};

  const double wd = 2.0 * std::numbers::pi / 24.0;
  const double ww = 2.0 * std::numbers::pi / 168.0;
  double drift = 0.0;
  double shared = 0.0;
  double own[kC] = {};
  double ot = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    const double tt = static_cast<double>(t);
    drift = 0.999 * drift + 0.05 * rng.normal();
    shared = 0.9 * shared + 0.25 * rng.normal();
    double load_sum = 0.0;
    for (std::size_t c = 0; c < 6; ++c) {
      own[c] = 0.7 * own[c] + 0.15 * rng.normal();
      const double v = kLevel[c] + kDaily[c] * std::sin(wd * tt + kPhase[c]) +
                       kWeekly[c] * std::sin(ww * tt + kPhase[c]) + kDrift[c] * drift +
                       0.5 * shared + own[c];
      s.values[t * kC + c] = v;
      load_sum += v;
    }
    // oil temperature follows the total load with thermal lag
    ot = 0.97 * ot + 0.03 * (0.4 * load_sum) + 0.05 * rng.normal();
    s.values[t * kC + 6] = ot;
  }
  return s;
}

std::vector<double> pretraining_sequence(std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  const int components = 1 + static_cast<int>(rng.next_u64() % 3);
  std::vector<double> period(components), amp(components), phase(components);
  for (int k = 0; k < components; ++k) {
    period[k] = rng.uniform(4.0, 32.0);
    amp[k] = rng.uniform(0.3, 1.5);
    phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const double phi = rng.uniform(0.5, 0.95);
  const double sigma = rng.uniform(0.05, 0.4);
  std::vector<double> out(length);
  double e = 0.0;
  for (std::size_t t = 0; t < length; ++t) {
    e = phi * e + sigma * rng.normal();
    double v = e;
    for (int k = 0; k < components; ++k) {
      v += amp[k] * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period[k] + phase[k]);
    }
    out[t] = v;
  }
  double mu = 0.0;
  for (double v : out) mu += v;
  mu /= static_cast<double>(length);
  double var = 0.0;
  for (double v : out) var += (v - mu) * (v - mu);
  const double sd = std::max(std::sqrt(var / static_cast<double>(length)), 1e-6);
  for (double& v : out) v = (v - mu) / sd;
  return out;
}

}  // namespace papnf::synthetic
