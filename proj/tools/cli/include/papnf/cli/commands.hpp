#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "papnf/cli/dataset.hpp"
#include "papnf/cli/run_config.hpp"
#include "papnf/evaluate.hpp"
#include "papnf/trainer.hpp"

namespace papnf::cli {

/// Bad invocation (missing file, bad window index); exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Create the output directory and write the resolved config into it.
std::filesystem::path prepare_output(const RunConfig& config);
/// Model for `model_config`, loading the backbone checkpoint when the
/// configuration asks for one.
PapNfModel build_model(const RunConfig& config, const ModelConfig& model_config);
std::uint64_t eval_seed(const RunConfig& config);

struct TrainRun {
  FitResult fit;
  std::filesystem::path checkpoint;
};
/// Writes checkpoint.papnf, train_log.csv and config.json.
TrainRun cmd_train(const RunConfig& config);

struct EvalRequest {
  std::string checkpoint;  // empty: <output_dir>/checkpoint.papnf
  std::string split = "test";
  std::optional<std::size_t> samples;
  std::vector<std::size_t> windows;  // fan charts
  bool svg = false;
  std::size_t channel = 0;
};
/// Writes metrics.json, quantiles.csv and one fan_window<N>.svg per window.
EvalResult cmd_eval(const RunConfig& config, const EvalRequest& request);

struct SampleRequest {
  std::string checkpoint;
  std::string split = "test";
  std::optional<std::size_t> samples;
  std::vector<std::size_t> windows;  // empty: every window of the split
};
/// Writes samples.csv (window_id, sample_id, step, channel, value); returns the row count.
std::size_t cmd_sample(const RunConfig& config, const SampleRequest& request);

struct ArmResult {
  std::string arm;
  ModelConfig model;
  MetricsReport report;
  double delta_mse_pct = 0.0;
  double delta_mae_pct = 0.0;
  std::vector<CensusEntry> census;
  std::string windows_sha256;
};

/// (full - arm) / arm in percent, rounded to one decimal.
double relative_delta_pct(double full, double arm);
/// Arms full, no_pap, frozen_random, no_global_context on shared data and
/// seed. Writes ablation.csv, ablation_census.csv and one directory per arm.
std::vector<ArmResult> cmd_ablate(const RunConfig& config, bool parallel_arms = false);

struct SweepRow {
  std::size_t prefix_len = 0;
  std::size_t horizon = 0;
  double mse = 0.0;
  double mae = 0.0;
  double crps = 0.0;
};
/// One train + eval per K, rows ascending in K. Writes prefix_sweep.csv.
std::vector<SweepRow> cmd_sweep_prefix(const RunConfig& config, const std::vector<long long>& prefix_lengths,
                                       bool parallel_arms = false);

struct BaselineRow {
  std::string name;
  MetricsReport report;
  std::optional<double> delta_mse_vs_model_pct;
};
/// Persistence, seasonal-naive and Gaussian-residual on the test split, plus
/// the model when a checkpoint is available. Writes baselines.csv/json.
std::vector<BaselineRow> cmd_baseline(const RunConfig& config, const std::string& checkpoint);

/// Pretrain the configured transformer and write it to `path`.
PretrainResult cmd_pretrain(const RunConfig& config, const std::filesystem::path& path);

/// Command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace papnf::cli
