#pragma once

// Numerical encoding and reprogramming into the backbone's token space.
//
// Two affine paths read the same standardized look-back window:
//   global:   z = W x + b over the whole flattened window (x in R^{L*C})
//   patches:  z_m = W_patch patch_m + b_patch, then e_m = W_p z_m + b_p
// The global z feeds fusion; the per-patch tokens E_rep follow the learnable
// prefix P into the backbone.

#include <cstddef>
#include <span>
#include <vector>

#include "papnf/params.hpp"
#include "papnf/random.hpp"

namespace papnf {

struct PatchConfig {
  std::size_t lookback = 96;
  std::size_t channels = 1;
  std::size_t patch_len = 16;

  /// ceil(lookback / patch_len)
  std::size_t patch_count() const;
  std::size_t patch_width() const { return patch_len * channels; }
  /// Zero-padded steps appended after the last real step.
  std::size_t padding() const { return patch_count() * patch_len - lookback; }
  void validate() const;
};

/// Split an L x C window (row-major) into M patches of p consecutive steps,
/// each flattened row-major; the last patch is zero padded when p does not
/// divide L. Returns a constant [M, p*C] tensor.
Tensor patchify(std::span<const double> window, const PatchConfig& cfg);
/// Inverse of patchify on the first L steps.
std::vector<double> unpatchify(const Tensor& patches, const PatchConfig& cfg);

class NumericalEncoder {
 public:
  NumericalEncoder() = default;
  NumericalEncoder(const PatchConfig& cfg, std::size_t numeric_dim, Rng& rng);

  /// z = W x + b for the flattened window x of length L*C.
  Tensor encode_global(const Tensor& flat_window) const;
  /// Row m: W_patch patch_m + b_patch.
  Tensor encode_patches(const Tensor& patches) const;

  std::size_t numeric_dim() const { return global_bias.numel(); }
  void collect(ParameterList& out, const std::string& prefix) const;

  Tensor patch_weight;   // [d_n, p*C]
  Tensor patch_bias;     // [d_n]
  Tensor global_weight;  // [d_n, L*C]
  Tensor global_bias;    // [d_n]
};

/// Projects numerical embeddings into the d-wide token space: e = W_p z + b_p.
class Reprogrammer {
 public:
  Reprogrammer() = default;
  Reprogrammer(std::size_t numeric_dim, std::size_t token_dim, Rng& rng);

  /// [M, d_n] -> [M, d]; row order is preserved.
  Tensor reprogram(const Tensor& patch_embeddings) const;
  std::size_t token_dim() const { return bias.numel(); }
  void collect(ParameterList& out, const std::string& prefix) const;

  Tensor weight;  // [d, d_n]
  Tensor bias;    // [d]
};

/// K learnable token-space vectors prepended to the reprogrammed sequence.
class PrefixBank {
 public:
  PrefixBank() = default;
  PrefixBank(std::size_t length, std::size_t token_dim, Rng& rng);

  std::size_t length() const { return length_; }
  std::size_t token_dim() const { return token_dim_; }
  /// [K, d]; undefined when K == 0.
  const Tensor& prefix() const { return prefix_; }
  void collect(ParameterList& out, const std::string& prefix) const;

 private:
  std::size_t length_ = 0;
  std::size_t token_dim_ = 0;
  Tensor prefix_;
};

/// X_LLM = [P; E_rep], shape [K + M, d]. With K = 0 the result is E_rep.
Tensor build_llm_input(const PrefixBank& bank, const Tensor& reprogrammed);

}  // namespace papnf
