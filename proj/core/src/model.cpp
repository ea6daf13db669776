#include "papnf/model.hpp"

#include <map>
#include <set>

#include "json.hpp"

namespace papnf {

using nlohmann::json;

TransformerConfig ModelConfig::transformer_config() const {
  return {backbone_layers, backbone_heads, token_dim, backbone_ffn, backbone_max_positions};
}

void ModelConfig::validate() const {
  if (lookback == 0 || horizon == 0 || channels == 0) throw ConfigError("lookback, horizon and channels must be positive");
  patch_config().validate();
  if (numeric_dim == 0 || token_dim == 0 || context_dim == 0 || fusion_dim == 0 || latent_dim == 0 ||
      hypernet_hidden == 0 || head_hidden == 0) {
    throw ConfigError("model widths must be positive");
  }
  if (!bypass_backbone) {
    transformer_config().validate();
    const std::size_t rows = prefix_len + patch_config().patch_count();
    if (backbone_kind != BackboneKind::kIdentity && backbone_layers > 0 && rows > backbone_max_positions) {
      throw ConfigError("K + M = " + std::to_string(rows) + " exceeds backbone_max_positions " +
                        std::to_string(backbone_max_positions));
    }
  }
}

namespace {

#define PAPNF_MODEL_FIELDS(X)                                                                            \
  X(lookback) X(horizon) X(channels) X(patch_len) X(numeric_dim) X(token_dim) X(context_dim) X(fusion_dim) \
  X(latent_dim) X(flow_layers) X(hypernet_hidden) X(head_hidden) X(prefix_len) X(backbone_layers)          \
  X(backbone_heads) X(backbone_ffn) X(backbone_max_positions) X(bypass_backbone) X(no_global_context) X(seed)

json to_json(const ModelConfig& c) {
  json j;
#define PAPNF_PUT(name) j[#name] = c.name;
  PAPNF_MODEL_FIELDS(PAPNF_PUT)
#undef PAPNF_PUT
  j["backbone_kind"] = to_string(c.backbone_kind);
  return j;
}

}  // namespace

std::string model_config_json(const ModelConfig& config) { return to_json(config).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  ModelConfig c;
  std::set<std::string> known{"backbone_kind"};
  try {
#define PAPNF_GET(name)                                              \
  known.insert(#name);                                               \
  if (j.contains(#name)) j.at(#name).get_to(c.name);
    PAPNF_MODEL_FIELDS(PAPNF_GET)
#undef PAPNF_GET
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  if (j.contains("backbone_kind")) c.backbone_kind = backbone_kind_from_string(j.at("backbone_kind").get<std::string>());
  for (const auto& item : j.items()) {
    if (!known.contains(item.key())) throw ConfigError("model config: unknown key '" + item.key() + "'");
  }
  return c;
}

PapNfModel::PapNfModel(const ModelConfig& config, std::shared_ptr<const Backbone> backbone)
    : config_(config), backbone_(std::move(backbone)) {
  config_.validate();
  const bool uses_backbone = !config_.bypass_backbone && !config_.no_global_context;
  if (uses_backbone) {
    if (!backbone_) throw ConfigError("model requires a backbone unless bypass_backbone or no_global_context is set");
    if (backbone_->width() != config_.token_dim) {
      throw ShapeError("backbone width " + std::to_string(backbone_->width()) + " != token_dim " +
                       std::to_string(config_.token_dim));
    }
  }
  // Independent stream per component: switching one component off (K = 0,
  // no backbone) leaves the initial values of all others unchanged.
  auto stream = [&](std::uint64_t index) { return Rng(derive_seed(config_.seed, "init", index)); };
  Rng r0 = stream(0), r1 = stream(1), r2 = stream(2), r3 = stream(3), r4 = stream(4), r6 = stream(6);
  encoder = NumericalEncoder(config_.patch_config(), config_.numeric_dim, r0);
  reprogrammer = Reprogrammer(config_.numeric_dim, config_.token_dim, r1);
  prefix = PrefixBank(config_.prefix_len, config_.token_dim, r2);
  context = ContextProjector(config_.token_dim, config_.context_dim, r3);
  fusion = FusionLayer(config_.numeric_dim, config_.context_dim, config_.fusion_dim, r4);
  for (std::size_t t = 0; t < config_.flow_layers; ++t) {
    Rng r = Rng(derive_seed(config_.seed, "init_flow", t));
    flow.emplace_back(config_.fusion_dim, config_.latent_dim, config_.hypernet_hidden, r);
  }
  head = ReconstructionHead(config_.latent_dim, config_.fusion_dim, config_.head_hidden,
                            config_.horizon * config_.channels, r6);
}

PapNfModel PapNfModel::create(const ModelConfig& config) {
  config.validate();
  std::shared_ptr<const Backbone> backbone;
  if (!config.bypass_backbone && !config.no_global_context) {
    switch (config.backbone_kind) {
      case BackboneKind::kFrozenRandom:
        backbone = std::make_shared<FrozenTransformer>(config.transformer_config(), derive_seed(config.seed, "backbone"));
        break;
      case BackboneKind::kIdentity:
        backbone = std::make_shared<IdentityBackbone>(config.token_dim);
        break;
      case BackboneKind::kFrozenCheckpoint:
        throw ConfigError("a frozen_checkpoint backbone must be loaded from a file");
    }
  }
  return PapNfModel(config, std::move(backbone));
}

Tensor PapNfModel::llm_input(std::span<const double> x_std) const {
  const Tensor patches = patchify(x_std, config_.patch_config());
  return build_llm_input(prefix, reprogrammer.reprogram(encoder.encode_patches(patches)));
}

Conditioning PapNfModel::condition(std::span<const double> x_std) const {
  const std::size_t expected = config_.lookback * config_.channels;
  if (x_std.size() != expected) {
    throw ShapeError("window holds " + std::to_string(x_std.size()) + " values, model expects " +
                     std::to_string(expected));
  }
  Conditioning cond;
  cond.z = encoder.encode_global(Tensor::vector({x_std.begin(), x_std.end()}));
  if (config_.no_global_context) {
    cond.c = Tensor::zeros({config_.context_dim});
  } else {
    const Tensor tokens = llm_input(x_std);
    cond.llm_rows = tokens.rows();
    cond.c = context.extract_context(config_.bypass_backbone ? tokens : backbone_->forward(tokens));
  }
  cond.h = fusion.fuse(cond.z, cond.c);
  cond.flows.reserve(flow.size());
  for (const auto& layer : flow) cond.flows.push_back(layer.parameters_for(cond.h));
  return cond;
}

Tensor PapNfModel::decode(const Conditioning& cond, const Tensor& u0) const {
  return head.reconstruct(flow_forward(u0, cond.flows), cond.h);
}

ParameterList PapNfModel::token_path_parameters() const {
  ParameterList out;
  if (config_.no_global_context) return out;
  out.push_back({"encoder.W_patch", encoder.patch_weight});
  out.push_back({"encoder.b_patch", encoder.patch_bias});
  reprogrammer.collect(out, "reprogram.");
  if (config_.prefix_len > 0) prefix.collect(out, "prefix.");
  return out;
}

ParameterList PapNfModel::decoder_path_parameters() const {
  ParameterList out;
  if (!config_.no_global_context) context.collect(out, "context.");
  out.push_back({"encoder.W", encoder.global_weight});
  out.push_back({"encoder.b", encoder.global_bias});
  fusion.collect(out, "fusion.");
  for (std::size_t t = 0; t < flow.size(); ++t) flow[t].collect(out, "flow" + std::to_string(t) + ".");
  head.collect(out, "head.");
  return out;
}

ParameterList PapNfModel::trainable_parameters() const {
  ParameterList out = token_path_parameters();
  ParameterList rest = decoder_path_parameters();
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

ParameterList PapNfModel::frozen_parameters() const {
  if (!backbone_ || config_.bypass_backbone || config_.no_global_context) return {};
  return backbone_->parameters();
}

std::vector<CensusEntry> PapNfModel::census() const {
  std::vector<CensusEntry> out;
  for (const auto& nt : token_path_parameters()) out.push_back({nt.name, nt.tensor.shape(), true});
  for (const auto& nt : frozen_parameters()) out.push_back({nt.name, nt.tensor.shape(), false});
  for (const auto& nt : decoder_path_parameters()) out.push_back({nt.name, nt.tensor.shape(), true});
  return out;
}

std::vector<std::vector<double>> PapNfModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto& nt : trainable_parameters()) out.emplace_back(nt.tensor.data().begin(), nt.tensor.data().end());
  return out;
}

void PapNfModel::restore(const std::vector<std::vector<double>>& values) {
  ParameterList params = trainable_parameters();
  if (values.size() != params.size()) throw ShapeError("snapshot does not match the model's parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_data();
    if (dst.size() != values[i].size()) throw ShapeError("snapshot tensor '" + params[i].name + "' has wrong size");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

void PapNfModel::load_trainable(const ParameterList& values) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : values) by_name[nt.name] = &nt.tensor;
  for (auto& nt : trainable_parameters()) {
    auto it = by_name.find(nt.name);
    if (it == by_name.end()) throw ParseError("checkpoint: missing tensor '" + nt.name + "'");
    if (it->second->shape() != nt.tensor.shape()) {
      throw ShapeError("checkpoint: tensor '" + nt.name + "' has shape " + shape_str(it->second->shape()) +
                       ", model expects " + shape_str(nt.tensor.shape()));
    }
    auto dst = nt.tensor.mutable_data();
    std::copy(it->second->data().begin(), it->second->data().end(), dst.begin());
  }
}

ForecastEnsemble sample_forecasts(const PapNfModel& model, const WindowSample& window, std::size_t samples,
                                  std::uint64_t seed) {
  if (samples == 0) throw ConfigError("sample count must be at least 1");
  NoGradGuard no_grad;
  const ModelConfig& cfg = model.config();
  const StandardizedWindow std_window = standardize(window);
  const Conditioning cond = model.condition(std_window.x);
  std::vector<double> latents(samples * cfg.latent_dim);
  for (std::size_t s = 0; s < samples; ++s) {
    Rng rng(derive_seed(seed, "sample", window.start, s));
    rng.fill_normal(std::span<double>(latents).subspan(s * cfg.latent_dim, cfg.latent_dim));
  }
  const Tensor out = model.decode(cond, Tensor::matrix(samples, cfg.latent_dim, std::move(latents)));
  return ForecastEnsemble(samples, cfg.horizon, cfg.channels, destandardize(out.data(), window.scaler));
}

}  // namespace papnf
