#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "papnf/model.hpp"

namespace papnf {

/// Per-window training loss. kMse draws one latent and scores it by MSE;
/// kCrps draws `loss_samples` latents and scores them by the fair sample CRPS.
enum class Objective { kCrps, kMse };

std::string to_string(Objective objective);
Objective objective_from_string(const std::string& text);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 8;
  std::size_t epochs = 15;
  std::uint64_t seed = 1;
  Objective objective = Objective::kCrps;
  std::size_t loss_samples = 4;
  std::size_t val_samples = 16;
  /// 0 trains on every batch of the epoch.
  std::size_t max_batches_per_epoch = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

std::string train_config_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

class Adam {
 public:
  Adam(ParameterList params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Apply one update from the accumulated grads, then clear them.
  void step();
  void zero_grad();
  std::size_t steps() const { return t_; }
  const ParameterList& parameters() const { return params_; }

 private:
  ParameterList params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

/// Mean squared error over all entries.
Tensor loss_reconstruction(const Tensor& prediction, const Tensor& target);
/// Fair sample CRPS of draws [m, n] against target [n], averaged over the n
/// entries: mean_j |X_j - y| - sum_{j<k} |X_j - X_k| / (m (m - 1)).
Tensor loss_crps_samples(const Tensor& draws, const Tensor& target);

/// Training loss of one window under `config.objective`; latents come from
/// the stream derive_seed(config.seed, "train_latent", step, window.start).
Tensor window_loss(const PapNfModel& model, const WindowSample& window, const TrainConfig& config,
                   std::uint64_t step);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  std::size_t steps = 0;
  /// State of the shuffling stream after the last epoch.
  std::string rng_state;
};

/// MSE of the S-sample ensemble mean on the original scale.
double validation_mse(const PapNfModel& model, const std::vector<WindowSample>& windows, std::size_t samples,
                      std::uint64_t seed);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Train for config.epochs epochs and leave `model` at the epoch with the
/// lowest validation MSE.
FitResult fit(PapNfModel& model, const std::vector<WindowSample>& train, const std::vector<WindowSample>& val,
              const TrainConfig& config, const EpochCallback& on_epoch = {});

struct CheckpointInfo {
  double val_mse = 0.0;
  std::string rng_state;
  std::string train_config;  // JSON, may be empty
};

void save_checkpoint(const PapNfModel& model, const CheckpointInfo& info, const std::filesystem::path& path);

struct LoadedCheckpoint {
  PapNfModel model;
  CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
/// As above, but fail with the differing fields when the stored architecture
/// does not match `expected`.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

struct PretrainConfig {
  std::size_t steps = 2000;
  std::size_t sequence_length = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 11;
};

struct PretrainResult {
  std::shared_ptr<FrozenTransformer> backbone;  // frozen, kind frozen_checkpoint
  std::vector<double> losses;                   // one per step
};

/// Next-value regression on synthetic sinusoid + AR sequences through a
/// scalar input embedding and a scalar readout; only the transformer is kept.
PretrainResult pretrain_backbone(const TransformerConfig& config, const PretrainConfig& pretrain);

}  // namespace papnf
