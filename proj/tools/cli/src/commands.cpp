#include "papnf/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "json.hpp"
#include "papnf/cli/csv.hpp"
#include "papnf/cli/svg.hpp"
#include "papnf/parallel.hpp"

namespace papnf::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string shape_text(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) out += (i ? "x" : "") + std::to_string(shape[i]);
  return out;
}

void write_train_log(const fs::path& path, const FitResult& fit) {
  CsvWriter csv(path);
  csv.row({"epoch", "train_loss", "val_mse"});
  for (const auto& r : fit.history) {
    csv.row({std::to_string(r.epoch), format_number(r.train_loss), format_number(r.val_mse)});
  }
}

fs::path checkpoint_path(const RunConfig& config, const std::string& explicit_path) {
  const fs::path path = explicit_path.empty() ? fs::path(config.output_dir) / "checkpoint.papnf" : fs::path(explicit_path);
  if (!fs::exists(path)) throw UsageError("checkpoint '" + path.string() + "' does not exist");
  return path;
}

PapNfModel load_model_for(const RunConfig& config, const fs::path& path, const Dataset& data) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  const ModelConfig& mc = loaded.model.config();
  if (mc.lookback != config.lookback || mc.horizon != config.horizon || mc.channels != data.series.channels()) {
    throw ConfigError("checkpoint expects L=" + std::to_string(mc.lookback) + ", H=" + std::to_string(mc.horizon) +
                      ", C=" + std::to_string(mc.channels) + " but the config gives L=" +
                      std::to_string(config.lookback) + ", H=" + std::to_string(config.horizon) +
                      ", C=" + std::to_string(data.series.channels()));
  }
  return std::move(loaded.model);
}

const WindowSample& window_at(const std::vector<WindowSample>& windows, std::size_t index) {
  if (index >= windows.size()) {
    throw UsageError("window " + std::to_string(index) + " out of range (split has " +
                     std::to_string(windows.size()) + " windows)");
  }
  return windows[index];
}

void write_quantiles(const fs::path& path, const std::vector<QuantileRow>& rows) {
  CsvWriter csv(path);
  csv.row({"window_id", "step", "channel", "q05", "q10", "q50", "q90", "q95", "truth"});
  for (const auto& r : rows) {
    csv.row({std::to_string(r.window_id), std::to_string(r.step), std::to_string(r.channel), format_number(r.q05),
             format_number(r.q10), format_number(r.q50), format_number(r.q90), format_number(r.q95),
             format_number(r.truth)});
  }
}

FanChart fan_chart(const WindowSample& w, const ForecastEnsemble& e, std::size_t channel) {
  FanChart chart;
  chart.title = "window " + std::to_string(w.id) + ", channel " + std::to_string(channel);
  for (std::size_t t = 0; t < w.lookback; ++t) chart.history.push_back(w.x[t * w.channels + channel]);
  for (std::size_t h = 0; h < w.horizon; ++h) {
    const auto s = e.sorted_point(h, channel);
    chart.truth.push_back(w.y[h * w.channels + channel]);
    chart.median.push_back(quantile_sorted(s, 0.5));
    chart.lo95.push_back(quantile_sorted(s, 0.025));
    chart.hi95.push_back(quantile_sorted(s, 0.975));
    chart.lo90.push_back(quantile_sorted(s, 0.05));
    chart.hi90.push_back(quantile_sorted(s, 0.95));
    chart.lo80.push_back(quantile_sorted(s, 0.10));
    chart.hi80.push_back(quantile_sorted(s, 0.90));
  }
  return chart;
}

struct ArmOutcome {
  FitResult fit;
  EvalResult eval;
  std::vector<CensusEntry> census;
};

ArmOutcome train_and_evaluate(const RunConfig& config, const Dataset& data, PapNfModel model, const fs::path& dir,
                              const std::string& label) {
  fs::create_directories(dir);
  const TrainConfig tc = resolved_train(config);
  ArmOutcome out;
  out.census = model.census();
  out.fit = fit(model, data.train, data.val, tc, [&](const EpochRecord& r) {
    std::cerr << label << "epoch " << r.epoch << "/" << tc.epochs << " train_loss=" << r.train_loss
              << " val_mse=" << r.val_mse << "\n";
  });
  save_checkpoint(model, {out.fit.best_val_mse, out.fit.rng_state, train_config_json(tc)}, dir / "checkpoint.papnf");
  write_train_log(dir / "train_log.csv", out.fit);
  EvalOptions opts;
  opts.keep_quantiles = false;
  out.eval = evaluate_model(model, data.test, config.samples, eval_seed(config), opts);
  write_text(dir / "metrics.json", to_json(out.eval.report) + "\n");
  return out;
}

// Run `body` for every arm, sequentially or across threads, and report the
// failing arm by name.
void for_each_arm(std::size_t n, const std::vector<std::string>& names, bool parallel,
                  const std::function<void(std::size_t)>& body) {
  auto guarded = [&](std::size_t i) {
    try {
      body(i);
    } catch (const NumericError& e) {
      throw NumericError("arm '" + names[i] + "' failed: " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError("arm '" + names[i] + "' failed: " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("arm '" + names[i] + "' failed: " + e.what());
    }
  };
  parallel_for(n, guarded, parallel ? worker_count() : 1);
}

std::string report_summary(const MetricsReport& r) {
  return "mse=" + format_number(r.mse) + " mae=" + format_number(r.mae) + " crps=" + format_number(r.crps_mean) +
         " wcrps=" + format_number(r.weighted_crps) + " cov90=" + format_number(r.coverage90);
}

}  // namespace

fs::path prepare_output(const RunConfig& config) {
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  write_text(dir / "config.json", to_canonical_json(config));
  return dir;
}

std::uint64_t eval_seed(const RunConfig& config) { return derive_seed(config.seed, "eval"); }

PapNfModel build_model(const RunConfig& config, const ModelConfig& mc) {
  const bool needs_backbone = !mc.bypass_backbone && !mc.no_global_context;
  if (needs_backbone && mc.backbone_kind == BackboneKind::kFrozenCheckpoint) {
    if (config.backbone_checkpoint.empty()) {
      throw ConfigError("backbone_kind frozen_checkpoint needs backbone_checkpoint (see `papnf pretrain`)");
    }
    if (!fs::exists(config.backbone_checkpoint)) {
      throw UsageError("backbone checkpoint '" + config.backbone_checkpoint + "' does not exist");
    }
    auto backbone = std::make_shared<FrozenTransformer>(
        load_frozen_checkpoint(config.backbone_checkpoint, mc.transformer_config()));
    return PapNfModel(mc, backbone);
  }
  return PapNfModel::create(mc);
}

TrainRun cmd_train(const RunConfig& config) {
  const fs::path dir = prepare_output(config);
  const Dataset data = load_dataset(config);
  PapNfModel model = build_model(config, resolved_model(config, data.series.channels()));
  const TrainConfig tc = resolved_train(config);
  TrainRun run;
  run.fit = fit(model, data.train, data.val, tc, [&](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << "/" << tc.epochs << " train_loss=" << r.train_loss
              << " val_mse=" << r.val_mse << "\n";
  });
  run.checkpoint = dir / "checkpoint.papnf";
  save_checkpoint(model, {run.fit.best_val_mse, run.fit.rng_state, train_config_json(tc)}, run.checkpoint);
  write_train_log(dir / "train_log.csv", run.fit);
  std::cerr << "best epoch " << run.fit.best_epoch << " val_mse=" << run.fit.best_val_mse << " -> "
            << run.checkpoint.string() << "\n";
  return run;
}

EvalResult cmd_eval(const RunConfig& config, const EvalRequest& request) {
  const fs::path ckpt = checkpoint_path(config, request.checkpoint);
  const fs::path dir = prepare_output(config);
  const Dataset data = load_dataset(config);
  const PapNfModel model = load_model_for(config, ckpt, data);
  const auto& windows = split_windows(data, request.split);
  const std::size_t samples = request.samples.value_or(config.samples);
  EvalResult result = evaluate_model(model, windows, samples, eval_seed(config));
  write_text(dir / "metrics.json", to_json(result.report) + "\n");
  write_quantiles(dir / "quantiles.csv", result.quantiles);
  if (request.svg) {
    if (request.channel >= data.series.channels()) throw UsageError("channel out of range");
    for (std::size_t index : request.windows) {
      const WindowSample& w = window_at(windows, index);
      const ForecastEnsemble e = sample_forecasts(model, w, samples, eval_seed(config));
      write_text(dir / ("fan_window" + std::to_string(index) + ".svg"),
                 render_fan_chart(fan_chart(w, e, request.channel)));
    }
  }
  std::cerr << request.split << ": " << report_summary(result.report) << "\n";
  return result;
}

std::size_t cmd_sample(const RunConfig& config, const SampleRequest& request) {
  const fs::path ckpt = checkpoint_path(config, request.checkpoint);
  const fs::path dir = prepare_output(config);
  const Dataset data = load_dataset(config);
  const PapNfModel model = load_model_for(config, ckpt, data);
  const auto& windows = split_windows(data, request.split);
  std::vector<std::size_t> indices = request.windows;
  if (indices.empty()) {
    indices.resize(windows.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
  }
  const std::size_t samples = request.samples.value_or(config.samples);
  CsvWriter csv(dir / "samples.csv");
  csv.row({"window_id", "sample_id", "step", "channel", "value"});
  std::size_t rows = 0;
  for (std::size_t index : indices) {
    const WindowSample& w = window_at(windows, index);
    const ForecastEnsemble e = sample_forecasts(model, w, samples, eval_seed(config));
    for (std::size_t s = 0; s < e.samples(); ++s) {
      for (std::size_t h = 0; h < e.horizon(); ++h) {
        for (std::size_t c = 0; c < e.channels(); ++c, ++rows) {
          csv.row({std::to_string(w.id), std::to_string(s), std::to_string(h), std::to_string(c),
                   format_number(e.at(s, h, c))});
        }
      }
    }
  }
  return rows;
}

double relative_delta_pct(double full, double arm) {
  return std::round((full - arm) / arm * 100.0 * 10.0) / 10.0;
}

std::vector<ArmResult> cmd_ablate(const RunConfig& config, bool parallel_arms) {
  const fs::path dir = prepare_output(config);
  const Dataset reference = load_dataset(config);
  const ModelConfig base = resolved_model(config, reference.series.channels());

  RunConfig full_config = config;
  if (full_config.backbone_checkpoint.empty()) {
    const fs::path backbone_path = dir / "backbone.papnf";
    std::cerr << "pretraining backbone for the full arm -> " << backbone_path.string() << "\n";
    cmd_pretrain(config, backbone_path);
    full_config.backbone_checkpoint = backbone_path.string();
  }

  std::vector<ArmResult> arms(4);
  arms[0].arm = "full";
  arms[0].model = base;
  arms[0].model.backbone_kind = BackboneKind::kFrozenCheckpoint;
  arms[1].arm = "no_pap";
  arms[1].model = arms[0].model;
  arms[1].model.prefix_len = 0;
  arms[1].model.bypass_backbone = true;
  arms[2].arm = "frozen_random";
  arms[2].model = base;
  arms[2].model.backbone_kind = BackboneKind::kFrozenRandom;
  arms[3].arm = "no_global_context";
  arms[3].model = arms[0].model;
  arms[3].model.no_global_context = true;

  std::vector<std::string> names;
  for (const auto& a : arms) names.push_back(a.arm);
  for_each_arm(arms.size(), names, parallel_arms, [&](std::size_t i) {
    ArmResult& arm = arms[i];
    const Dataset data = load_dataset(config);
    arm.windows_sha256 = data.windows_sha256;
    if (arm.windows_sha256 != reference.windows_sha256) throw std::runtime_error("data windows differ from the reference");
    const ArmOutcome outcome =
        train_and_evaluate(full_config, data, build_model(full_config, arm.model), dir / arm.arm, "[" + arm.arm + "] ");
    arm.report = outcome.eval.report;
    arm.census = outcome.census;
  });

  for (auto& arm : arms) {
    arm.delta_mse_pct = relative_delta_pct(arms[0].report.mse, arm.report.mse);
    arm.delta_mae_pct = relative_delta_pct(arms[0].report.mae, arm.report.mae);
  }
  CsvWriter table(dir / "ablation.csv");
  table.row({"arm", "mse", "mae", "delta_mse_pct", "delta_mae_pct"});
  for (const auto& arm : arms) {
    table.row({arm.arm, format_number(arm.report.mse), format_number(arm.report.mae),
               format_number(arm.delta_mse_pct), format_number(arm.delta_mae_pct)});
  }
  CsvWriter census(dir / "ablation_census.csv");
  census.row({"arm", "tensor", "shape", "trainable"});
  for (const auto& arm : arms) {
    for (const auto& e : arm.census) census.row({arm.arm, e.name, shape_text(e.shape), e.trainable ? "1" : "0"});
  }
  nlohmann::json summary;
  summary["windows_sha256"] = reference.windows_sha256;
  for (const auto& arm : arms) {
    summary["arms"][arm.arm] = nlohmann::json::parse(to_json(arm.report));
    std::cerr << arm.arm << ": " << report_summary(arm.report) << "\n";
  }
  write_text(dir / "ablation.json", summary.dump(2) + "\n");
  return arms;
}

std::vector<SweepRow> cmd_sweep_prefix(const RunConfig& config, const std::vector<long long>& prefix_lengths,
                                       bool parallel_arms) {
  std::vector<std::size_t> ks;
  if (prefix_lengths.empty()) {
    ks = config.prefix_sweep;
  } else {
    for (long long k : prefix_lengths) {
      if (k < 0) throw ConfigError("prefix length " + std::to_string(k) + " is negative");
      ks.push_back(static_cast<std::size_t>(k));
    }
  }
  if (ks.empty()) throw ConfigError("prefix sweep needs at least one K");
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  const fs::path dir = prepare_output(config);
  const Dataset data = load_dataset(config);
  std::vector<SweepRow> rows(ks.size());
  std::vector<std::string> names;
  for (std::size_t k : ks) names.push_back("K=" + std::to_string(k));
  for_each_arm(ks.size(), names, parallel_arms, [&](std::size_t i) {
    ModelConfig mc = resolved_model(config, data.series.channels());
    mc.prefix_len = ks[i];
    const ArmOutcome outcome =
        train_and_evaluate(config, data, build_model(config, mc), dir / ("K" + std::to_string(ks[i])), "[" + names[i] + "] ");
    rows[i] = {ks[i], config.horizon, outcome.eval.report.mse, outcome.eval.report.mae, outcome.eval.report.crps_mean};
  });
  CsvWriter csv(dir / "prefix_sweep.csv");
  csv.row({"K", "horizon", "mse", "mae", "crps"});
  for (const auto& r : rows) {
    csv.row({std::to_string(r.prefix_len), std::to_string(r.horizon), format_number(r.mse), format_number(r.mae),
             format_number(r.crps)});
  }
  return rows;
}

std::vector<BaselineRow> cmd_baseline(const RunConfig& config, const std::string& checkpoint) {
  const fs::path dir = prepare_output(config);
  const Dataset data = load_dataset(config);
  const std::uint64_t seed = eval_seed(config);
  EvalOptions opts;
  opts.keep_quantiles = false;

  std::optional<MetricsReport> model_report;
  const fs::path default_ckpt = fs::path(config.output_dir) / "checkpoint.papnf";
  if (!checkpoint.empty() || fs::exists(default_ckpt)) {
    const PapNfModel model = load_model_for(config, checkpoint_path(config, checkpoint), data);
    model_report = evaluate_model(model, data.test, config.samples, seed, opts).report;
  }

  auto point = [](std::vector<double> values, const WindowSample& w) {
    return ForecastEnsemble(1, w.horizon, w.channels, std::move(values));
  };
  std::vector<BaselineRow> rows;
  rows.push_back({"persistence",
                  evaluate(data.test, [&](const WindowSample& w) { return point(baseline::persistence(w), w); }, opts)
                      .report,
                  std::nullopt});
  rows.push_back({"seasonal_naive",
                  evaluate(data.test,
                           [&](const WindowSample& w) { return point(baseline::seasonal_naive(w, config.seasonal_period), w); },
                           opts)
                      .report,
                  std::nullopt});
  rows.push_back({"gaussian_residual",
                  evaluate(data.test,
                           [&](const WindowSample& w) { return baseline::gaussian_residual(w, config.samples, seed); },
                           opts)
                      .report,
                  std::nullopt});
  if (model_report) {
    for (auto& r : rows) r.delta_mse_vs_model_pct = relative_delta_pct(model_report->mse, r.report.mse);
    rows.insert(rows.begin(), {"model", *model_report, 0.0});
  }

  CsvWriter csv(dir / "baselines.csv");
  csv.row({"forecaster", "mse", "mae", "crps_mean", "weighted_crps", "coverage90", "delta_mse_model_vs_row_pct"});
  nlohmann::json reports;
  for (const auto& r : rows) {
    csv.row({r.name, format_number(r.report.mse), format_number(r.report.mae), format_number(r.report.crps_mean),
             format_number(r.report.weighted_crps), format_number(r.report.coverage90),
             r.delta_mse_vs_model_pct ? format_number(*r.delta_mse_vs_model_pct) : ""});
    reports[r.name] = nlohmann::json::parse(to_json(r.report));
    std::cerr << r.name << ": " << report_summary(r.report) << "\n";
  }
  write_text(dir / "baselines.json", reports.dump(2) + "\n");
  return rows;
}

PretrainResult cmd_pretrain(const RunConfig& config, const fs::path& path) {
  ModelConfig mc = config.model;
  PretrainConfig pc;
  pc.steps = config.pretrain_steps;
  pc.seed = derive_seed(config.seed, "pretrain");
  PretrainResult result = pretrain_backbone(mc.transformer_config(), pc);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_backbone(*result.backbone, path);
  CsvWriter csv(fs::path(path).replace_extension(".loss.csv"));
  csv.row({"step", "loss"});
  for (std::size_t i = 0; i < result.losses.size(); ++i) csv.row({std::to_string(i), format_number(result.losses[i])});
  return result;
}

}  // namespace papnf::cli
