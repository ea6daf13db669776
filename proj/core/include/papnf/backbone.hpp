#pragma once

// Frozen sequence encoder standing in for a large pretrained language model,
// plus the projected average-pooled context c = mean_n(W_c h_n + b_c).

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "papnf/params.hpp"
#include "papnf/random.hpp"

namespace papnf {

enum class BackboneKind { kFrozenRandom, kFrozenCheckpoint, kIdentity };

std::string to_string(BackboneKind kind);
BackboneKind backbone_kind_from_string(const std::string& text);

struct TransformerConfig {
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t width = 64;
  std::size_t ffn_width = 256;
  std::size_t max_positions = 128;

  void validate() const;
  bool operator==(const TransformerConfig&) const = default;
};

/// Maps an [N, d] token sequence to [N, d] hidden states without touching its
/// own weights.
class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual Tensor forward(const Tensor& tokens) const = 0;
  virtual BackboneKind kind() const = 0;
  virtual std::size_t width() const = 0;
  virtual ParameterList parameters() const { return {}; }
};

class IdentityBackbone final : public Backbone {
 public:
  explicit IdentityBackbone(std::size_t width) : width_(width) {}
  Tensor forward(const Tensor& tokens) const override;
  BackboneKind kind() const override { return BackboneKind::kIdentity; }
  std::size_t width() const override { return width_; }

 private:
  std::size_t width_;
};

/// Pre-norm causal transformer with learned absolute positional embeddings.
/// Weights are frozen (requires_grad = false) unless set_trainable(true) is
/// called, which only the pretraining routine does.
class FrozenTransformer final : public Backbone {
 public:
  struct Layer {
    Tensor ln1_gamma, ln1_beta;
    Tensor wq, wk, wv, wo;  // [d, d]
    Tensor ln2_gamma, ln2_beta;
    Tensor w1, b1;          // [ffn, d], [ffn]
    Tensor w2, b2;          // [d, ffn], [d]
  };

  FrozenTransformer(const TransformerConfig& config, std::uint64_t seed,
                    BackboneKind kind = BackboneKind::kFrozenRandom);

  /// An empty layer stack is the identity map.
  Tensor forward(const Tensor& tokens) const override;
  BackboneKind kind() const override { return kind_; }
  std::size_t width() const override { return config_.width; }
  ParameterList parameters() const override;

  const TransformerConfig& config() const { return config_; }
  void set_trainable(bool trainable);
  void set_kind(BackboneKind kind) { kind_ = kind; }
  /// Replace weights by name; every parameter must be present with its shape.
  void load_parameters(const ParameterList& values);

  /// Attention probabilities of layer `layer`, head `head` for the given
  /// input (diagnostic; rows sum to one).
  Tensor attention_weights(const Tensor& tokens, std::size_t layer, std::size_t head) const;

 private:
  Tensor attention(const Tensor& normed, const Layer& layer) const;

  TransformerConfig config_;
  BackboneKind kind_;
  Tensor positions_;  // [max_positions, d]
  std::vector<Layer> layers_;
  Tensor final_gamma_, final_beta_;
};

/// Write a backbone checkpoint (container header carries the architecture).
void save_backbone(const FrozenTransformer& backbone, const std::filesystem::path& path);
/// Load a frozen backbone, validating the stored architecture against `expected`.
FrozenTransformer load_frozen_checkpoint(const std::filesystem::path& path,
                                         const TransformerConfig& expected);
/// SHA-256 over the serialized weights.
std::string weights_sha256(const Backbone& backbone);

std::string transformer_config_json(const TransformerConfig& config);
TransformerConfig transformer_config_from_json(const std::string& text);

class ContextProjector {
 public:
  ContextProjector() = default;
  ContextProjector(std::size_t token_dim, std::size_t context_dim, Rng& rng);

  /// c = (1/N) sum_n (W_c h_n + b_c) over every row of hidden [N, d].
  Tensor extract_context(const Tensor& hidden) const;
  std::size_t context_dim() const { return bias.numel(); }
  void collect(ParameterList& out, const std::string& prefix) const;

  Tensor weight;  // [d_c, d]
  Tensor bias;    // [d_c]
};

}  // namespace papnf
