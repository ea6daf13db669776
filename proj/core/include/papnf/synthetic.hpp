#pragma once

// Synthetic series used by tests, the acceptance suite and backbone pretraining.

#include <cstdint>
#include <vector>

#include "papnf/data.hpp"

namespace papnf::synthetic {

struct Ar1SeasonalSpec {
  std::size_t length = 4000;
  std::size_t channels = 1;
  double phi = 0.8;            // AR(1) coefficient of the noise component
  double noise_sigma = 0.3;    // innovation standard deviation
  std::size_t period = 24;
  double amplitude = 1.0;
  double level = 10.0;
  std::uint64_t seed = 7;
};

/// level + amplitude * sin(2*pi*t/period + phase_c) + e_t with
/// e_t = phi * e_{t-1} + noise_sigma * N(0, 1), one independent e per channel.
RawSeries ar1_seasonal(const Ar1SeasonalSpec& spec);

/// Pure sinusoids (no noise) with the given period; channel c is phase shifted.
RawSeries sinusoid(std::size_t length, std::size_t channels, std::size_t period,
                   double amplitude = 1.0, double level = 0.0);

/// Seven-channel hourly series with the ETTh1 column layout
/// (HUFL, HULL, MUFL, MULL, LUFL, LULL, OT): daily and weekly cycles, a slow
/// random-walk drift and correlated AR(1) noise.
RawSeries ett_like(std::size_t length, std::uint64_t seed);

/// Hourly ISO-8601 timestamps starting at 2016-07-01 00:00:00.
std::vector<std::string> hourly_timestamps(std::size_t length);

/// One standardized pretraining sequence: random sinusoid mixture plus AR(1).
std::vector<double> pretraining_sequence(std::size_t length, std::uint64_t seed);

}  // namespace papnf::synthetic
