#include <iostream>

#include "CLI11.hpp"
#include "papnf/cli/commands.hpp"

namespace papnf::cli {

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_option("--config", common.config_path, "Run config (JSON)");
  sub->add_option("--seed", common.seed, "Root seed");
  sub->add_option("--out", common.out, "Output directory");
  sub->add_option("--set", common.overrides, "Override a config value, e.g. model.prefix_len=3")->take_all();
}

RunConfig resolve(const Common& common) {
  RunConfig config = common.config_path.empty() ? RunConfig{} : load_run_config(common.config_path);
  for (const auto& o : common.overrides) apply_override(config, o);
  if (common.seed) config.seed = *common.seed;
  if (!common.out.empty()) config.output_dir = common.out;
  return config;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Prefix-as-prompt normalizing-flow forecaster"};
  app.require_subcommand(1);
  Common common;

  auto* train = app.add_subcommand("train", "Train a model and keep the best validation epoch");
  add_common(train, common);
  std::optional<std::size_t> epochs;
  train->add_option("--epochs", epochs, "Training epochs (default 15)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a split");
  add_common(eval, common);
  EvalRequest eval_req;
  eval->add_option("--checkpoint", eval_req.checkpoint, "Model checkpoint");
  eval->add_option("--split", eval_req.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--samples", eval_req.samples, "Ensemble size S (default 100)");
  eval->add_option("--window", eval_req.windows, "Window index for a fan chart (repeatable)");
  eval->add_flag("--svg", eval_req.svg, "Write fan charts for --window");
  eval->add_option("--channel", eval_req.channel, "Channel drawn in fan charts");

  auto* sample = app.add_subcommand("sample", "Export forecast ensembles as CSV");
  add_common(sample, common);
  SampleRequest sample_req;
  sample->add_option("--checkpoint", sample_req.checkpoint, "Model checkpoint");
  sample->add_option("--split", sample_req.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  sample->add_option("--samples", sample_req.samples, "Ensemble size S");
  sample->add_option("--window", sample_req.windows, "Window index (repeatable; default all)");

  bool parallel_arms = false;
  auto* ablate = app.add_subcommand("ablate", "Train and compare the four ablation arms");
  add_common(ablate, common);
  ablate->add_flag("--parallel-arms", parallel_arms, "Run arms concurrently");

  auto* sweep = app.add_subcommand("sweep-prefix", "Train and evaluate one model per prefix length K");
  add_common(sweep, common);
  std::vector<long long> ks;
  sweep->add_option("--k", ks, "Prefix lengths (default 1,3,5,8,12)")->delimiter(',');
  sweep->add_flag("--parallel-arms", parallel_arms, "Run sweep points concurrently");

  auto* base = app.add_subcommand("baseline", "Evaluate persistence, seasonal-naive and Gaussian-residual baselines");
  add_common(base, common);
  std::string base_ckpt;
  base->add_option("--checkpoint", base_ckpt, "Model checkpoint for the delta column");

  auto* pretrain = app.add_subcommand("pretrain", "Pretrain and save a backbone checkpoint");
  add_common(pretrain, common);
  std::string pretrain_out;
  std::optional<std::size_t> steps;
  pretrain->add_option("--steps", steps, "Optimization steps (default 2000)");
  pretrain->add_option("--output", pretrain_out, "Backbone file (default <out>/backbone.papnf)");

  auto* synth = app.add_subcommand("synth", "Write a synthetic series as CSV");
  std::string synth_kind = "ar1_seasonal", synth_out;
  std::size_t synth_length = 4000;
  std::uint64_t synth_seed = 7;
  synth->add_option("--kind", synth_kind, "ar1_seasonal, ett_like or sinusoid")
      ->check(CLI::IsMember({"ar1_seasonal", "ett_like", "sinusoid"}));
  synth->add_option("--length", synth_length, "Number of rows");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--output", synth_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      RunConfig config;
      config.dataset = "synthetic:" + synth_kind;
      config.synthetic_length = synth_length;
      config.synthetic_seed = synth_seed;
      write_csv(load_series(config), synth_out);
      return 0;
    }
    RunConfig config = resolve(common);
    if (train->parsed()) {
      if (epochs) apply_override(config, "train.epochs=" + std::to_string(*epochs));
      cmd_train(config);
    } else if (eval->parsed()) {
      cmd_eval(config, eval_req);
    } else if (sample->parsed()) {
      std::cerr << cmd_sample(config, sample_req) << " rows\n";
    } else if (ablate->parsed()) {
      cmd_ablate(config, parallel_arms);
    } else if (sweep->parsed()) {
      cmd_sweep_prefix(config, ks, parallel_arms);
    } else if (base->parsed()) {
      cmd_baseline(config, base_ckpt);
    } else if (pretrain->parsed()) {
      if (steps) config.pretrain_steps = *steps;
      const std::filesystem::path path =
          pretrain_out.empty() ? prepare_output(config) / "backbone.papnf" : std::filesystem::path(pretrain_out);
      const PretrainResult r = cmd_pretrain(config, path);
      std::cerr << "pretraining loss " << r.losses.front() << " -> " << r.losses.back() << ", saved "
                << path.string() << "\n";
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "papnf: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {  // ConfigError, ShapeError
    std::cerr << "papnf: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "papnf: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace papnf::cli
