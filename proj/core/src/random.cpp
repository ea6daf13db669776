#include "papnf/random.hpp"

#include <cmath>
#include <sstream>

namespace papnf {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index) {
  return splitmix64(splitmix64(root ^ fnv1a(label)) + index);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index,
                          std::uint64_t sub_index) {
  return splitmix64(derive_seed(root, label, index) ^ splitmix64(sub_index + 0x632be59bd9b4e019ULL));
}

void Rng::fill_normal(std::span<double> out) {
  for (double& v : out) v = normal_(engine_);
}

void Rng::fill_uniform(std::span<double> out, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : out) v = dist(engine_);
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw std::invalid_argument("Rng::set_state: malformed engine state");
  normal_.reset();
}

Tensor init_uniform(Shape shape, double bound, Rng& rng, bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  rng.fill_uniform(t.mutable_data(), -bound, bound);
  return t;
}

Tensor init_glorot(std::size_t out, std::size_t in, Rng& rng, bool requires_grad) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  return init_uniform({out, in}, bound, rng, requires_grad);
}

Tensor init_normal(Shape shape, double stddev, Rng& rng, bool requires_grad) {
  Tensor t = Tensor::zeros(std::move(shape), requires_grad);
  auto d = t.mutable_data();
  rng.fill_normal(d);
  for (double& v : d) v *= stddev;
  return t;
}

}  // namespace papnf
