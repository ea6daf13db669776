#include "papnf/flow.hpp"

#include <cmath>
#include <numeric>

namespace papnf {

namespace {

double dot(std::span<const double> x, std::span<const double> y) {
  return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
}

// Latent batch view: [d_u] becomes [1, d_u].
Tensor as_batch(const Tensor& u) { return u.rank() == 1 ? reshape(u, {1, u.numel()}) : u; }

}  // namespace

FusionLayer::FusionLayer(std::size_t numeric_dim, std::size_t context_dim, std::size_t fusion_dim, Rng& rng)
    : weight(init_glorot(fusion_dim, numeric_dim + context_dim, rng)), bias(Tensor::zeros({fusion_dim}, true)) {}

Tensor FusionLayer::fuse(const Tensor& z, const Tensor& c) const {
  if (z.rank() != 1 || c.rank() != 1 || z.numel() + c.numel() != weight.dim(1)) {
    throw ShapeError("fuse: [z; c] of widths " + shape_str(z.shape()) + " + " + shape_str(c.shape()) +
                     " does not match W_h " + shape_str(weight.shape()));
  }
  return linear(concat_cols({z, c}), weight, bias);
}

void FusionLayer::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "W_h", weight});
  out.push_back({prefix + "b_h", bias});
}

Tensor reparameterize(const Tensor& w, const Tensor& a) {
  const Tensor wa = sum(w * a);
  const Tensor m = add_scalar(softplus(wa), -1.0 + kPlanarMargin);
  Tensor norm2 = sum(square(a));
  if (norm2.item() < kPlanarEps) norm2 = Tensor::scalar(kPlanarEps);
  return w + a * ((m - wa) / norm2);
}

ConditionedPlanarLayer::ConditionedPlanarLayer(std::size_t fusion_dim, std::size_t latent_dim, std::size_t hidden,
                                               Rng& rng)
    : w1(init_glorot(hidden, fusion_dim, rng)),
      b1(Tensor::zeros({hidden}, true)),
      w2(Tensor::zeros({2 * latent_dim + 1, hidden}, true)),
      b2(Tensor::zeros({2 * latent_dim + 1}, true)),
      latent_dim_(latent_dim) {
  // a0 ~ unit direction, w0 parallel to a0 with w0.a0 = softplus^-1(1 - margin),
  // which is where m(w.a) = w.a and hence w_hat = 0.
  std::vector<double> a0(latent_dim);
  rng.fill_normal(a0);
  const double norm2 = dot(a0, a0);
  const double scale_a = 1.0 / std::sqrt(norm2);
  const double x0 = std::log(std::expm1(1.0 - kPlanarMargin));
  auto bias = b2.mutable_data();
  for (std::size_t i = 0; i < latent_dim; ++i) {
    bias[i] = a0[i] * scale_a;
    bias[latent_dim + i] = x0 * a0[i] * scale_a;
  }
}

PlanarParams ConditionedPlanarLayer::parameters_for(const Tensor& h) const {
  const Tensor out = linear(tanh(linear(h, w1, b1)), w2, b2);
  PlanarParams p;
  p.a = slice_cols(out, 0, latent_dim_);
  p.w = slice_cols(out, latent_dim_, 2 * latent_dim_);
  p.b = slice_cols(out, 2 * latent_dim_, 2 * latent_dim_ + 1);
  p.w_hat = reparameterize(p.w, p.a);
  return p;
}

void ConditionedPlanarLayer::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "hyper.W1", w1});
  out.push_back({prefix + "hyper.b1", b1});
  out.push_back({prefix + "hyper.W2", w2});
  out.push_back({prefix + "hyper.b2", b2});
}

Tensor planar_step(const Tensor& u, const PlanarParams& p) {
  const std::size_t d = p.a.numel();
  const Tensor batch = as_batch(u);
  if (batch.rank() != 2 || batch.cols() != d) {
    throw ShapeError("planar_step: latent " + shape_str(u.shape()) + " does not match d_u = " + std::to_string(d));
  }
  const Tensor pre = add(linear(batch, reshape(p.a, {1, d})), p.b);       // [n, 1]
  const Tensor out = batch + matmul(tanh(pre), reshape(p.w_hat, {1, d}));  // [n, d]
  return u.rank() == 1 ? reshape(out, {d}) : out;
}

Tensor flow_forward(const Tensor& u0, const std::vector<PlanarParams>& stack) {
  Tensor u = u0;
  for (const PlanarParams& p : stack) u = planar_step(u, p);
  return u;
}

std::vector<double> planar_inverse(std::span<const double> u_next, const PlanarParams& p) {
  const auto a = p.a.data();
  const auto w_hat = p.w_hat.data();
  const double b = p.b.item();
  const double s = dot(a, w_hat);
  const double target = dot(a, u_next);
  // f(alpha) = alpha + s tanh(alpha + b) - target is strictly increasing
  // (f' >= margin) and its root lies within |s| of target.
  auto f = [&](double x) { return x + s * std::tanh(x + b) - target; };
  double lo = target - std::abs(s) - 1e-12, hi = target + std::abs(s) + 1e-12;
  double x = target;
  for (int it = 0; it < 200; ++it) {
    const double fx = f(x);
    if (fx == 0.0) break;
    if (fx > 0) hi = x; else lo = x;
    const double t = std::tanh(x + b);
    double next = x - fx / (1.0 + s * (1.0 - t * t));
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) <= 1e-15 * (1.0 + std::abs(x))) {
      x = next;
      break;
    }
    x = next;
  }
  const double t = std::tanh(x + b);
  std::vector<double> u(u_next.begin(), u_next.end());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] -= w_hat[i] * t;
  return u;
}

double planar_log_det(std::span<const double> u, const PlanarParams& p) {
  const double t = std::tanh(dot(p.a.data(), u) + p.b.item());
  return std::log(std::abs(1.0 + (1.0 - t * t) * dot(p.a.data(), p.w_hat.data())));
}

ReconstructionHead::ReconstructionHead(std::size_t latent_dim, std::size_t fusion_dim, std::size_t hidden,
                                       std::size_t outputs, Rng& rng)
    : w1(init_glorot(hidden, latent_dim + fusion_dim, rng)),
      b1(Tensor::zeros({hidden}, true)),
      w2(init_glorot(outputs, hidden, rng)),
      b2(Tensor::zeros({outputs}, true)) {}

Tensor ReconstructionHead::reconstruct(const Tensor& u, const Tensor& h) const {
  const Tensor batch = as_batch(u);
  if (h.rank() != 1 || batch.cols() + h.numel() != w1.dim(1)) {
    throw ShapeError("reconstruct: [u; h] widths " + shape_str(u.shape()) + " + " + shape_str(h.shape()) +
                     " do not match " + shape_str(w1.shape()));
  }
  const Tensor input = concat_cols({batch, repeat_rows(h, batch.rows())});
  return linear(tanh(linear(input, w1, b1)), w2, b2);
}

void ReconstructionHead::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "W1", w1});
  out.push_back({prefix + "b1", b1});
  out.push_back({prefix + "W2", w2});
  out.push_back({prefix + "b2", b2});
}

Tensor sample_base(Rng& rng, std::size_t latent_dim) {
  std::vector<double> v(latent_dim);
  rng.fill_normal(v);
  return Tensor::vector(std::move(v));
}

Tensor sample_base(Rng& rng, std::size_t rows, std::size_t latent_dim) {
  std::vector<double> v(rows * latent_dim);
  rng.fill_normal(v);
  return Tensor::matrix(rows, latent_dim, std::move(v));
}

}  // namespace papnf
