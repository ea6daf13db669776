#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>

#include "papnf/tensor.hpp"

namespace papnf {

/// Derive an independent stream seed from a root seed, a purpose label and an
/// index (window id, sample id, epoch ...). Pure function of its inputs, so
/// derived streams do not depend on scheduling or thread count.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0);
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index,
                          std::uint64_t sub_index);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  std::uint64_t next_u64() { return engine_(); }
  void fill_normal(std::span<double> out);
  void fill_uniform(std::span<double> out, double lo, double hi);

  std::mt19937_64& engine() { return engine_; }

  /// Textual engine state (std::mt19937_64 stream format).
  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Uniform(-bound, bound) initialized leaf.
Tensor init_uniform(Shape shape, double bound, Rng& rng, bool requires_grad = true);
/// Glorot-uniform weight of shape [out, in].
Tensor init_glorot(std::size_t out, std::size_t in, Rng& rng, bool requires_grad = true);
/// Standard-normal leaf scaled by `stddev`.
Tensor init_normal(Shape shape, double stddev, Rng& rng, bool requires_grad = true);

}  // namespace papnf
