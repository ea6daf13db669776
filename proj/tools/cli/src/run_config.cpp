#include "papnf/cli/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "papnf/serialize.hpp"

namespace papnf::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kResolvedModelKeys{"lookback", "horizon", "channels", "seed"};

json model_section(const ModelConfig& model) {
  json j = json::parse(model_config_json(model));
  for (const auto& k : kResolvedModelKeys) j.erase(k);
  return j;
}

json train_section(const TrainConfig& train) {
  json j = json::parse(train_config_json(train));
  j.erase("seed");
  return j;
}

json to_json(const RunConfig& c) {
  json j;
  j["version"] = c.version;
  j["dataset"] = c.dataset;
  j["synthetic_length"] = c.synthetic_length;
  j["synthetic_seed"] = c.synthetic_seed;
  j["split"] = c.split ? json{{"train", c.split->train_len}, {"val", c.split->val_len}, {"test", c.split->test_len}}
                       : json(nullptr);
  j["lookback"] = c.lookback;
  j["horizon"] = c.horizon;
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["seasonal_period"] = c.seasonal_period;
  j["backbone_checkpoint"] = c.backbone_checkpoint;
  j["pretrain_steps"] = c.pretrain_steps;
  j["output_dir"] = c.output_dir;
  j["prefix_sweep"] = c.prefix_sweep;
  j["model"] = model_section(c.model);
  j["train"] = train_section(c.train);
  return j;
}

void collect_unknown(const json& given, const json& reference, const std::string& prefix,
                     std::vector<std::string>& unknown) {
  for (const auto& item : given.items()) {
    if (!reference.contains(item.key())) unknown.push_back(prefix + item.key());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");

  const RunConfig defaults;
  const json reference = to_json(defaults);
  std::vector<std::string> unknown;
  collect_unknown(j, reference, "", unknown);
  if (j.contains("model") && j["model"].is_object()) collect_unknown(j["model"], reference["model"], "model.", unknown);
  if (j.contains("train") && j["train"].is_object()) collect_unknown(j["train"], reference["train"], "train.", unknown);
  if (j.contains("split") && j["split"].is_object()) {
    collect_unknown(j["split"], json{{"train", 0}, {"val", 0}, {"test", 0}}, "split.", unknown);
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown config keys: " + list);
  }

  RunConfig c;
  try {
    c.version = j.value("version", kRunConfigVersion);
    if (c.version != kRunConfigVersion) {
      throw ConfigError("config version " + std::to_string(c.version) + " is not supported (expected " +
                        std::to_string(kRunConfigVersion) + ")");
    }
    c.dataset = j.value("dataset", c.dataset);
    c.synthetic_length = j.value("synthetic_length", c.synthetic_length);
    c.synthetic_seed = j.value("synthetic_seed", c.synthetic_seed);
    if (j.contains("split") && !j["split"].is_null()) {
      const json& s = j["split"];
      c.split = SplitSpec{s.at("train").get<std::size_t>(), s.at("val").get<std::size_t>(),
                          s.at("test").get<std::size_t>()};
    }
    c.lookback = j.value("lookback", c.lookback);
    c.horizon = j.value("horizon", c.horizon);
    c.seed = j.value("seed", c.seed);
    c.samples = j.value("samples", c.samples);
    c.seasonal_period = j.value("seasonal_period", c.seasonal_period);
    c.backbone_checkpoint = j.value("backbone_checkpoint", c.backbone_checkpoint);
    c.pretrain_steps = j.value("pretrain_steps", c.pretrain_steps);
    c.output_dir = j.value("output_dir", c.output_dir);
    if (j.contains("prefix_sweep")) {
      c.prefix_sweep.clear();
      for (const json& k : j["prefix_sweep"]) {
        if (!k.is_number_integer() || k.get<long long>() < 0) {
          throw ConfigError("prefix_sweep entries must be non-negative integers, got " + k.dump());
        }
        c.prefix_sweep.push_back(k.get<std::size_t>());
      }
    }
    if (j.contains("model")) {
      json merged = reference["model"];
      merged.update(j["model"]);
      c.model = model_config_from_json(merged.dump());
    }
    if (j.contains("train")) {
      json merged = reference["train"];
      merged.update(j["train"]);
      c.train = train_config_from_json(merged.dump());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  if (c.samples == 0) throw ConfigError("samples must be positive");
  c.train.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

std::string to_canonical_json(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_sha256(const RunConfig& config) { return sha256_hex(to_json(config).dump()); }

void apply_override(RunConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json j = to_json(config);
  json* node = &j;
  std::stringstream parts(path);
  std::string part;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) keys.push_back(part);
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    json& next = (*node)[keys[i]];
    if (next.is_null()) next = json::object();
    if (!next.is_object()) throw ConfigError("override '" + path + "': '" + keys[i] + "' is not a section");
    node = &next;
  }
  (*node)[keys.back()] = value;
  config = parse_run_config(j.dump());
}

ModelConfig resolved_model(const RunConfig& config, std::size_t channels) {
  ModelConfig m = config.model;
  m.lookback = config.lookback;
  m.horizon = config.horizon;
  m.channels = channels;
  m.seed = config.seed;
  m.validate();
  return m;
}

TrainConfig resolved_train(const RunConfig& config) {
  TrainConfig t = config.train;
  t.seed = config.seed;
  t.validate();
  return t;
}

}  // namespace papnf::cli
