#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "papnf/backbone.hpp"
#include "papnf/data.hpp"
#include "papnf/encoder.hpp"
#include "papnf/flow.hpp"

namespace papnf {

struct ModelConfig {
  std::size_t lookback = 96;
  std::size_t horizon = 24;
  std::size_t channels = 1;
  std::size_t patch_len = 16;
  std::size_t numeric_dim = 128;  // d_n
  std::size_t token_dim = 64;     // d
  std::size_t context_dim = 64;   // d_c
  std::size_t fusion_dim = 128;   // d_h
  std::size_t latent_dim = 32;    // d_u
  std::size_t flow_layers = 4;
  std::size_t hypernet_hidden = 64;
  std::size_t head_hidden = 256;
  std::size_t prefix_len = 5;  // K
  std::size_t backbone_layers = 2;
  std::size_t backbone_heads = 4;
  std::size_t backbone_ffn = 256;
  std::size_t backbone_max_positions = 128;
  BackboneKind backbone_kind = BackboneKind::kFrozenRandom;
  /// Context read from [P; E_rep] directly instead of the backbone states.
  bool bypass_backbone = false;
  bool no_global_context = false;
  std::uint64_t seed = 1;

  PatchConfig patch_config() const { return {lookback, channels, patch_len}; }
  TransformerConfig transformer_config() const;
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

std::string model_config_json(const ModelConfig& config);
/// Missing keys keep their defaults; unknown keys raise ConfigError.
ModelConfig model_config_from_json(const std::string& text);

/// Everything computed once per window and shared by all latent draws.
struct Conditioning {
  Tensor z;  // [d_n]
  Tensor c;  // [d_c]
  Tensor h;  // [d_h]
  std::vector<PlanarParams> flows;
  std::size_t llm_rows = 0;  // N = K + M
};

struct CensusEntry {
  std::string name;
  Shape shape;
  bool trainable = false;
};

class PapNfModel {
 public:
  /// `backbone` may be null only when the configuration bypasses it.
  PapNfModel(const ModelConfig& config, std::shared_ptr<const Backbone> backbone);

  /// Builds the backbone named by config.backbone_kind; a frozen_checkpoint
  /// model needs its backbone passed explicitly.
  static PapNfModel create(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const Backbone* backbone() const { return backbone_.get(); }
  std::shared_ptr<const Backbone> shared_backbone() const { return backbone_; }

  /// Token sequence X_LLM = [P; E_rep] for a standardized window (L x C, row-major).
  Tensor llm_input(std::span<const double> x_std) const;
  Conditioning condition(std::span<const double> x_std) const;
  /// Latents [n, d_u] -> standardized trajectories [n, H*C].
  Tensor decode(const Conditioning& cond, const Tensor& u0) const;

  ParameterList trainable_parameters() const;
  ParameterList frozen_parameters() const;
  /// Every tensor on the forward path, in pipeline order.
  std::vector<CensusEntry> census() const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  /// Overwrite trainable tensors by name (checkpoint loading).
  void load_trainable(const ParameterList& values);

  NumericalEncoder encoder;
  Reprogrammer reprogrammer;
  PrefixBank prefix;
  ContextProjector context;
  FusionLayer fusion;
  std::vector<ConditionedPlanarLayer> flow;
  ReconstructionHead head;

 private:
  ParameterList token_path_parameters() const;
  ParameterList decoder_path_parameters() const;

  ModelConfig config_;
  std::shared_ptr<const Backbone> backbone_;
};

/// S draws for one window on the original scale. Draw s uses the stream
/// derive_seed(seed, "sample", window.start, s), so results do not depend on
/// how windows are scheduled.
ForecastEnsemble sample_forecasts(const PapNfModel& model, const WindowSample& window, std::size_t samples,
                                  std::uint64_t seed);

}  // namespace papnf
