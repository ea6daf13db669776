#pragma once

// Conditional decoder: h = W_h [z; c] + b_h, a stack of planar flows whose
// parameters are produced from h by per-layer hypernetworks, and a two-layer
// reconstruction head g([u_T; h]).

#include <cstddef>
#include <vector>

#include "papnf/ensemble.hpp"
#include "papnf/params.hpp"
#include "papnf/random.hpp"

namespace papnf {

class FusionLayer {
 public:
  FusionLayer() = default;
  FusionLayer(std::size_t numeric_dim, std::size_t context_dim, std::size_t fusion_dim, Rng& rng);

  Tensor fuse(const Tensor& z, const Tensor& c) const;
  std::size_t fusion_dim() const { return bias.numel(); }
  void collect(ParameterList& out, const std::string& prefix) const;

  Tensor weight;  // [d_h, d_n + d_c]
  Tensor bias;    // [d_h]
};

/// Lower bound on w_hat . a kept by the reparameterization.
inline constexpr double kPlanarMargin = 1e-4;
/// Floor on |a|^2 in the reparameterization denominator.
inline constexpr double kPlanarEps = 1e-8;

/// Parameters of one planar map u -> u + w_hat tanh(a.u + b).
struct PlanarParams {
  Tensor a;      // [d_u]
  Tensor w;      // [d_u] raw hypernet output
  Tensor w_hat;  // [d_u] reparameterized
  Tensor b;      // scalar
};

/// w_hat = w + (m(w.a) - w.a) a / max(|a|^2, eps), m(x) = -1 + margin + softplus(x).
Tensor reparameterize(const Tensor& w, const Tensor& a);

class ConditionedPlanarLayer {
 public:
  ConditionedPlanarLayer() = default;
  /// The output layer starts at zero weights with a bias placing the map
  /// exactly at the w_hat = 0 point of the reparameterization, so the flow
  /// starts as the identity but every parameter receives gradient.
  ConditionedPlanarLayer(std::size_t fusion_dim, std::size_t latent_dim, std::size_t hidden, Rng& rng);

  PlanarParams parameters_for(const Tensor& h) const;
  std::size_t latent_dim() const { return latent_dim_; }
  void collect(ParameterList& out, const std::string& prefix) const;

  Tensor w1, b1;  // [hidden, d_h], [hidden]
  Tensor w2, b2;  // [2 d_u + 1, hidden], [2 d_u + 1]

 private:
  std::size_t latent_dim_ = 0;
};

/// One planar map applied to a single latent [d_u] or a batch [n, d_u].
Tensor planar_step(const Tensor& u, const PlanarParams& p);
/// Layers applied in order; an empty stack returns u unchanged.
Tensor flow_forward(const Tensor& u0, const std::vector<PlanarParams>& stack);

/// Recover u from u' = planar_step(u, p) by solving the scalar monotone
/// equation alpha + (a.w_hat) tanh(alpha + b) = a.u' for alpha = a.u.
std::vector<double> planar_inverse(std::span<const double> u_next, const PlanarParams& p);
/// log |det J| of one planar map at u (diagnostic only).
double planar_log_det(std::span<const double> u, const PlanarParams& p);

class ReconstructionHead {
 public:
  ReconstructionHead() = default;
  ReconstructionHead(std::size_t latent_dim, std::size_t fusion_dim, std::size_t hidden, std::size_t outputs,
                     Rng& rng);

  /// [n, d_u] latents (or a single [d_u]) with a shared h -> [n, H*C].
  Tensor reconstruct(const Tensor& u, const Tensor& h) const;
  std::size_t outputs() const { return b2.numel(); }
  void collect(ParameterList& out, const std::string& prefix) const;

  Tensor w1, b1;  // [hidden, d_u + d_h]
  Tensor w2, b2;  // [H*C, hidden]
};

/// i.i.d. standard normal latents: [d_u], or [n, d_u] with `rows`.
Tensor sample_base(Rng& rng, std::size_t latent_dim);
Tensor sample_base(Rng& rng, std::size_t rows, std::size_t latent_dim);

}  // namespace papnf
