#pragma once

// Scalar-loop reference implementations used as test oracles. Nothing here
// calls into the library's math.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), Vec(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

/// y = W x + b with W stored [out][in].
inline Vec affine(const Mat& w, const Vec& x, const Vec& b) {
  Vec y(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    double acc = b.empty() ? 0.0 : b[i];
    for (std::size_t k = 0; k < x.size(); ++k) acc += w[i][k] * x[k];
    y[i] = acc;
  }
  return y;
}

inline Mat to_mat(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
  Mat m(rows, Vec(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m[i][j] = flat[i * cols + j];
  return m;
}

inline Vec layer_norm(const Vec& x, const Vec& gamma, const Vec& beta, double eps = 1e-5) {
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(x.size());
  Vec y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = gamma[i] * (x[i] - mu) / std::sqrt(var + eps) + beta[i];
  return y;
}

inline double gelu(double x) {
  const double c = std::sqrt(2.0 / std::numbers::pi);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

/// tanh via its exponential definition.
inline double tanh_exp(double x) {
  const double e2 = std::exp(2.0 * x);
  return (e2 - 1.0) / (e2 + 1.0);
}

inline double softplus(double x) { return std::log1p(std::exp(x)); }

/// Standard normal CRPS at y for N(mu, sigma^2): sigma (z (2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)).
inline double gaussian_crps(double mu, double sigma, double y) {
  const double z = (y - mu) / sigma;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return sigma * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - 1.0 / std::sqrt(std::numbers::pi));
}

/// Energy-form CRPS by direct double summation.
inline double crps_double_sum(const Vec& x, double y) {
  const double s = static_cast<double>(x.size());
  double a = 0.0, b = 0.0;
  for (double xi : x) a += std::abs(xi - y);
  for (double xi : x)
    for (double xj : x) b += std::abs(xi - xj);
  return a / s - b / (2.0 * s * s);
}

inline Vec uniform_vec(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

}  // namespace oracle
