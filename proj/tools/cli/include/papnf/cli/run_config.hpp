#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "papnf/data.hpp"
#include "papnf/model.hpp"
#include "papnf/trainer.hpp"

namespace papnf::cli {

inline constexpr int kRunConfigVersion = 1;

/// Everything a command needs. `model` and `train` omit the fields that are
/// resolved from the top level (lookback, horizon, seed) or from the data
/// (channels).
struct RunConfig {
  int version = kRunConfigVersion;
  /// CSV path, or synthetic:ar1_seasonal | synthetic:ett_like | synthetic:sinusoid
  std::string dataset = "synthetic:ar1_seasonal";
  std::size_t synthetic_length = 4000;
  std::uint64_t synthetic_seed = 7;
  std::optional<SplitSpec> split;
  std::size_t lookback = 96;
  std::size_t horizon = 24;
  std::uint64_t seed = 1;
  std::size_t samples = 100;
  std::size_t seasonal_period = 24;
  std::string backbone_checkpoint;
  std::size_t pretrain_steps = 2000;
  std::string output_dir = "runs/default";
  std::vector<std::size_t> prefix_sweep{1, 3, 5, 8, 12};
  ModelConfig model;
  TrainConfig train;
};

/// Unknown keys at any level are collected and reported together.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
/// Key-sorted JSON; stable across runs so it can be hashed.
std::string to_canonical_json(const RunConfig& config);
std::string config_sha256(const RunConfig& config);

/// Apply "section.key=value" where value is JSON (bare words are strings).
void apply_override(RunConfig& config, const std::string& assignment);

ModelConfig resolved_model(const RunConfig& config, std::size_t channels);
TrainConfig resolved_train(const RunConfig& config);

}  // namespace papnf::cli
