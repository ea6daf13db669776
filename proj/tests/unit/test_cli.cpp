#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "papnf/cli/commands.hpp"
#include "papnf/cli/csv.hpp"
#include "papnf/cli/dataset.hpp"
#include "papnf/cli/run_config.hpp"
#include "papnf/cli/svg.hpp"

using namespace papnf;
using namespace papnf::cli;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::vector<std::string> out;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

constexpr const char* kTinyConfig = R"({
  "dataset": "synthetic:ar1_seasonal",
  "synthetic_length": 360,
  "lookback": 32,
  "horizon": 8,
  "samples": 20,
  "pretrain_steps": 20,
  "model": {"patch_len": 8, "numeric_dim": 16, "token_dim": 16, "context_dim": 8, "fusion_dim": 16,
            "latent_dim": 4, "flow_layers": 2, "hypernet_hidden": 8, "head_hidden": 16, "prefix_len": 3,
            "backbone_heads": 2, "backbone_ffn": 32, "backbone_max_positions": 32},
  "train": {"epochs": 2, "batch_size": 8}
})";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("papnf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = parse_run_config(kTinyConfig);
    config.output_dir = (dir / "run").string();
  }
  void TearDown() override { fs::remove_all(dir); }

  int invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "papnf");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    testing::internal::CaptureStdout();
    testing::internal::CaptureStderr();
    const int code = run(static_cast<int>(argv.size()), argv.data());
    testing::internal::GetCapturedStdout();
    last_stderr = testing::internal::GetCapturedStderr();
    return code;
  }

  fs::path write_config(const std::string& text) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir;
  RunConfig config;
  std::string last_stderr;
};

}  // namespace

TEST(RunConfigTest, CanonicalFormIsStable) {
  const RunConfig a = parse_run_config(kTinyConfig);
  const std::string text = to_canonical_json(a);
  EXPECT_EQ(to_canonical_json(parse_run_config(text)), text);
  EXPECT_EQ(config_sha256(a), config_sha256(parse_run_config(text)));
  const auto j = nlohmann::json::parse(text);
  std::vector<std::string> keys;
  for (const auto& item : j.items()) keys.push_back(item.key());
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_EQ(j.at("version").get<int>(), 1);
}

TEST(RunConfigTest, UnknownKeysListedTogether) {
  try {
    parse_run_config(R"({"lookbak": 3, "model": {"prefix": 2}, "train": {"lr": 1}})");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* key : {"lookbak", "model.prefix", "train.lr"}) EXPECT_NE(msg.find(key), std::string::npos) << msg;
  }
}

TEST(RunConfigTest, DefaultsFollowProtocol) {
  const RunConfig c = parse_run_config("{}");
  EXPECT_EQ(c.train.epochs, 15u);
  EXPECT_EQ(c.samples, 100u);
  EXPECT_EQ(c.model.prefix_len, 5u);
  EXPECT_EQ(c.prefix_sweep, (std::vector<std::size_t>{1, 3, 5, 8, 12}));
}

TEST(RunConfigTest, OverridesApply) {
  RunConfig c = parse_run_config("{}");
  apply_override(c, "model.prefix_len=3");
  apply_override(c, "train.objective=mse");
  apply_override(c, "lookback=48");
  EXPECT_EQ(c.model.prefix_len, 3u);
  EXPECT_EQ(c.train.objective, Objective::kMse);
  EXPECT_EQ(c.lookback, 48u);
  EXPECT_EQ(resolved_model(c, 2).lookback, 48u);
  EXPECT_EQ(resolved_model(c, 2).channels, 2u);
  EXPECT_THROW(apply_override(c, "model.nope=1"), ConfigError);
}

TEST(Csv, EscapingFollowsRfc4180) {
  EXPECT_EQ(csv_field("plain"), "plain");
  EXPECT_EQ(csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_field("two\nlines"), "\"two\nlines\"");
  EXPECT_EQ(csv_record({"x", "y,z"}), "x,\"y,z\"\r\n");
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Ablation, RelativeDeltaMatchesTableStyle) {
  EXPECT_DOUBLE_EQ(relative_delta_pct(0.366, 0.388), -5.7);
  EXPECT_DOUBLE_EQ(relative_delta_pct(0.4, 0.4), 0.0);
}

TEST(Svg, FanChartHasBandsAndLines) {
  FanChart c;
  c.title = "w<0>";
  c.history = {1, 2, 3};
  c.truth = c.median = c.lo95 = c.hi95 = c.lo90 = c.hi90 = c.lo80 = c.hi80 = {3, 4};
  const std::string svg = render_fan_chart(c);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("w&lt;0&gt;"), std::string::npos);
  EXPECT_GE(std::count(svg.begin(), svg.end(), '\n'), 5);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(DatasetTest, SplitDefaults) {
  RunConfig c = parse_run_config("{}");
  c.dataset = std::string(PAPNF_FIXTURE_DIR) + "/etth1_head.csv";
  const RawSeries s = load_series(c);
  EXPECT_EQ(s.channels(), 7u);
  const SplitSpec hourly = resolved_split(c, s);
  EXPECT_EQ(hourly.train_len, kEttHourlySplit.train_len);
  c.dataset = "data/ETTm1.csv";
  EXPECT_EQ(resolved_split(c, s).train_len, kEttMinuteSplit.train_len);
  c.dataset = "synthetic:ar1_seasonal";
  const SplitSpec syn = resolved_split(c, RawSeries{.timestamps = std::vector<std::string>(1000)});
  EXPECT_EQ(syn.train_len + syn.val_len + syn.test_len, 1000u);
}

TEST_F(CliTest, TrainWritesArtifactsDeterministically) {
  const TrainRun first = cmd_train(config);
  const fs::path out = config.output_dir;
  for (const char* f : {"checkpoint.papnf", "train_log.csv", "config.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto log = lines(out / "train_log.csv");
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0], "epoch,train_loss,val_mse");
  EXPECT_EQ(parse_run_config(slurp(out / "config.json")).train.epochs, 2u);
  const std::string log_text = slurp(out / "train_log.csv");
  cmd_train(config);
  EXPECT_EQ(slurp(out / "train_log.csv"), log_text);
  EXPECT_EQ(slurp(out / "checkpoint.papnf"), slurp(first.checkpoint));
}

TEST_F(CliTest, EvalDefaultsAndIsRepeatable) {
  cmd_train(config);
  RunConfig c = config;
  c.samples = parse_run_config("{}").samples;
  EvalRequest req;
  req.windows = {0};
  req.svg = true;
  const EvalResult r = cmd_eval(c, req);
  EXPECT_EQ(r.report.samples, 100u);
  const fs::path out = c.output_dir;
  const std::string json_text = slurp(out / "metrics.json");
  EXPECT_TRUE(fs::exists(out / "quantiles.csv"));
  EXPECT_TRUE(fs::exists(out / "fan_window0.svg"));
  std::size_t svgs = 0;
  for (const auto& e : fs::directory_iterator(out)) svgs += e.path().extension() == ".svg";
  EXPECT_EQ(svgs, 1u);
  EXPECT_EQ(lines(out / "quantiles.csv")[0], "window_id,step,channel,q05,q10,q50,q90,q95,truth");
  cmd_eval(c, req);
  EXPECT_EQ(slurp(out / "metrics.json"), json_text);
}

TEST_F(CliTest, SampleExportsEveryDraw) {
  cmd_train(config);
  SampleRequest req;
  req.windows = {0, 2};
  req.samples = 3;
  EXPECT_EQ(cmd_sample(config, req), 2u * 3 * 8);
  const auto rows = lines(fs::path(config.output_dir) / "samples.csv");
  EXPECT_EQ(rows[0], "window_id,sample_id,step,channel,value");
  EXPECT_EQ(rows.size(), 1u + 48);
}

TEST_F(CliTest, AblateProducesFourArmsOnSharedWindows) {
  const auto arms = cmd_ablate(config);
  ASSERT_EQ(arms.size(), 4u);
  EXPECT_EQ(arms[0].arm, "full");
  EXPECT_EQ(arms[0].delta_mse_pct, 0.0);
  std::set<std::string> names, hashes;
  for (const auto& a : arms) {
    names.insert(a.arm);
    hashes.insert(a.windows_sha256);
  }
  EXPECT_EQ(names, (std::set<std::string>{"full", "no_pap", "frozen_random", "no_global_context"}));
  EXPECT_EQ(hashes.size(), 1u);
  const auto table = lines(fs::path(config.output_dir) / "ablation.csv");
  ASSERT_EQ(table.size(), 5u);
  EXPECT_EQ(table[0], "arm,mse,mae,delta_mse_pct,delta_mae_pct");

  auto tensor_names = [](const ArmResult& a) {
    std::set<std::string> out;
    for (const auto& e : a.census) out.insert(e.name.starts_with("backbone.") ? "backbone.*" : e.name);
    return out;
  };
  const auto& full = arms[0];
  const auto& no_pap = *std::find_if(arms.begin(), arms.end(), [](const ArmResult& a) { return a.arm == "no_pap"; });
  std::set<std::string> removed;
  const auto kept = tensor_names(no_pap);
  for (const auto& n : tensor_names(full))
    if (!kept.count(n)) removed.insert(n);
  EXPECT_EQ(removed, (std::set<std::string>{"prefix.P", "backbone.*"}));
}

TEST_F(CliTest, SweepSortsAndValidates) {
  const auto rows = cmd_sweep_prefix(config, {5, 0, 3, 3});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].prefix_len, 0u);
  EXPECT_EQ(rows[1].prefix_len, 3u);
  EXPECT_EQ(rows[2].prefix_len, 5u);
  EXPECT_EQ(lines(fs::path(config.output_dir) / "prefix_sweep.csv").size(), 4u);
  EXPECT_THROW(cmd_sweep_prefix(config, {2, -1}), ConfigError);
}

TEST_F(CliTest, BaselinesOnSinusoid) {
  config.dataset = "synthetic:sinusoid";
  const auto rows = cmd_baseline(config, "");
  ASSERT_EQ(rows.size(), 3u);
  const auto& seasonal =
      *std::find_if(rows.begin(), rows.end(), [](const BaselineRow& r) { return r.name == "seasonal_naive"; });
  EXPECT_NEAR(seasonal.report.mse, 0.0, 1e-20);
}

TEST_F(CliTest, BaselineDeltaColumnWithModel) {
  const TrainRun t = cmd_train(config);
  const auto rows = cmd_baseline(config, t.checkpoint.string());
  ASSERT_EQ(rows.size(), 4u);
  const auto model = std::find_if(rows.begin(), rows.end(), [](const BaselineRow& r) { return r.name == "model"; });
  ASSERT_NE(model, rows.end());
  for (const auto& r : rows) EXPECT_TRUE(r.delta_mse_vs_model_pct.has_value()) << r.name;
  EXPECT_EQ(*model->delta_mse_vs_model_pct, 0.0);
  EXPECT_NE(lines(fs::path(config.output_dir) / "baselines.csv")[0].find("delta"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  const fs::path cfg = write_config(kTinyConfig);
  const std::string out = (dir / "cli").string();
  EXPECT_EQ(invoke({"eval", "--config", cfg.string(), "--out", out, "--checkpoint", (dir / "missing.papnf").string()}), 2);
  EXPECT_EQ(invoke({"train", "--config", write_config(R"({"lookbak": 3})").string(), "--out", out}), 2);
  EXPECT_NE(last_stderr.find("lookbak"), std::string::npos) << last_stderr;
  EXPECT_EQ(invoke({"sweep-prefix", "--config", write_config(kTinyConfig).string(), "--out", out, "--k", "1,-2"}), 2);
  EXPECT_EQ(invoke({"frobnicate"}), 2);
  EXPECT_EQ(invoke({"train", "--config", cfg.string(), "--out", out, "--epochs", "1"}), 0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "checkpoint.papnf"));
  EXPECT_EQ(invoke({"eval", "--config", cfg.string(), "--out", out}), 0);
}

TEST_F(CliTest, NumericFailureExitsOne) {
  std::ofstream(dir / "nan.csv") << "date,a\n";
  {
    std::ofstream csv(dir / "nan.csv", std::ios::app);
    for (int i = 0; i < 200; ++i) csv << "t" << (1000 + i) << "," << (i == 60 ? "1e308" : std::to_string(i % 7)) << "\n";
  }
  std::string cfg = kTinyConfig;
  cfg.replace(cfg.find("synthetic:ar1_seasonal"), 22, (dir / "nan.csv").string());
  cfg.replace(cfg.find("\"synthetic_length\": 360,"), 24, "\"split\": {\"train\": 120, \"val\": 40, \"test\": 40},");
  EXPECT_EQ(invoke({"train", "--config", write_config(cfg).string(), "--out", (dir / "nan_run").string()}), 1)
      << last_stderr;
  EXPECT_NE(last_stderr.find("non-finite"), std::string::npos) << last_stderr;
}
