#include "papnf/backbone.hpp"

#include <cmath>
#include <map>

#include "json.hpp"
#include "papnf/serialize.hpp"

namespace papnf {

using nlohmann::json;

std::string to_string(BackboneKind kind) {
  switch (kind) {
    case BackboneKind::kFrozenRandom: return "frozen_random";
    case BackboneKind::kFrozenCheckpoint: return "frozen_checkpoint";
    case BackboneKind::kIdentity: return "identity";
  }
  return "unknown";
}

BackboneKind backbone_kind_from_string(const std::string& text) {
  if (text == "frozen_random") return BackboneKind::kFrozenRandom;
  if (text == "frozen_checkpoint") return BackboneKind::kFrozenCheckpoint;
  if (text == "identity") return BackboneKind::kIdentity;
  throw ConfigError("unknown backbone kind '" + text +
                    "' (expected frozen_random, frozen_checkpoint or identity)");
}

void TransformerConfig::validate() const {
  if (width == 0 || heads == 0 || width % heads != 0) {
    throw ConfigError("transformer width " + std::to_string(width) + " must be a positive multiple of heads " +
                      std::to_string(heads));
  }
  if (layers > 0 && (ffn_width == 0 || max_positions == 0)) {
    throw ConfigError("transformer ffn_width and max_positions must be positive");
  }
}

Tensor IdentityBackbone::forward(const Tensor& tokens) const {
  if (tokens.rank() != 2 || tokens.cols() != width_) {
    throw ShapeError("identity backbone: expected [N, " + std::to_string(width_) + "], got " +
                     shape_str(tokens.shape()));
  }
  return tokens;
}

FrozenTransformer::FrozenTransformer(const TransformerConfig& config, std::uint64_t seed, BackboneKind kind)
    : config_(config), kind_(kind) {
  config_.validate();
  Rng rng(derive_seed(seed, "backbone_init"));
  const std::size_t d = config_.width;
  auto ones = [](std::size_t n) { return Tensor::full({n}, 1.0); };
  positions_ = init_normal({config_.max_positions, d}, 0.3, rng, false);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    Layer layer;
    layer.ln1_gamma = ones(d);
    layer.ln1_beta = Tensor::zeros({d});
    layer.wq = init_glorot(d, d, rng, false);
    layer.wk = init_glorot(d, d, rng, false);
    layer.wv = init_glorot(d, d, rng, false);
    layer.wo = init_glorot(d, d, rng, false);
    layer.ln2_gamma = ones(d);
    layer.ln2_beta = Tensor::zeros({d});
    layer.w1 = init_glorot(config_.ffn_width, d, rng, false);
    layer.b1 = Tensor::zeros({config_.ffn_width});
    layer.w2 = init_glorot(d, config_.ffn_width, rng, false);
    layer.b2 = Tensor::zeros({d});
    layers_.push_back(std::move(layer));
  }
  final_gamma_ = ones(d);
  final_beta_ = Tensor::zeros({d});
}

Tensor FrozenTransformer::attention(const Tensor& normed, const Layer& layer) const {
  const std::size_t head_dim = config_.width / config_.heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  const Tensor q = linear(normed, layer.wq);
  const Tensor k = linear(normed, layer.wk);
  const Tensor v = linear(normed, layer.wv);
  std::vector<Tensor> heads;
  heads.reserve(config_.heads);
  for (std::size_t h = 0; h < config_.heads; ++h) {
    const std::size_t lo = h * head_dim, hi = lo + head_dim;
    const Tensor scores = scale(linear(slice_cols(q, lo, hi), slice_cols(k, lo, hi)), inv_sqrt);
    heads.push_back(matmul(softmax_rows(scores, /*causal=*/true), slice_cols(v, lo, hi)));
  }
  return linear(concat_cols(heads), layer.wo);
}

Tensor FrozenTransformer::forward(const Tensor& tokens) const {
  if (tokens.rank() != 2 || tokens.cols() != config_.width) {
    throw ShapeError("transformer: expected [N, " + std::to_string(config_.width) + "], got " +
                     shape_str(tokens.shape()));
  }
  if (layers_.empty()) return tokens;
  const std::size_t n = tokens.rows();
  if (n == 0 || n > config_.max_positions) {
    throw ShapeError("transformer: sequence length " + std::to_string(n) + " outside [1, " +
                     std::to_string(config_.max_positions) + "]");
  }
  Tensor x = tokens + slice_rows(positions_, 0, n);
  for (const Layer& layer : layers_) {
    x = x + attention(layer_norm(x, layer.ln1_gamma, layer.ln1_beta), layer);
    const Tensor hidden = gelu(linear(layer_norm(x, layer.ln2_gamma, layer.ln2_beta), layer.w1, layer.b1));
    x = x + linear(hidden, layer.w2, layer.b2);
  }
  return layer_norm(x, final_gamma_, final_beta_);
}

Tensor FrozenTransformer::attention_weights(const Tensor& tokens, std::size_t layer_index,
                                            std::size_t head) const {
  if (layer_index >= layers_.size() || head >= config_.heads) {
    throw std::out_of_range("attention_weights: layer/head out of range");
  }
  const std::size_t n = tokens.rows();
  const std::size_t head_dim = config_.width / config_.heads;
  Tensor x = tokens + slice_rows(positions_, 0, n);
  for (std::size_t l = 0;; ++l) {
    const Layer& layer = layers_[l];
    const Tensor normed = layer_norm(x, layer.ln1_gamma, layer.ln1_beta);
    if (l == layer_index) {
      const std::size_t lo = head * head_dim, hi = lo + head_dim;
      const Tensor q = slice_cols(linear(normed, layer.wq), lo, hi);
      const Tensor k = slice_cols(linear(normed, layer.wk), lo, hi);
      return softmax_rows(scale(linear(q, k), 1.0 / std::sqrt(static_cast<double>(head_dim))), true);
    }
    x = x + attention(normed, layer);
    x = x + linear(gelu(linear(layer_norm(x, layer.ln2_gamma, layer.ln2_beta), layer.w1, layer.b1)),
                   layer.w2, layer.b2);
  }
}

ParameterList FrozenTransformer::parameters() const {
  ParameterList out;
  out.push_back({"backbone.positions", positions_});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    const std::string p = "backbone.layer" + std::to_string(l) + ".";
    out.push_back({p + "ln1_gamma", L.ln1_gamma});
    out.push_back({p + "ln1_beta", L.ln1_beta});
    out.push_back({p + "wq", L.wq});
    out.push_back({p + "wk", L.wk});
    out.push_back({p + "wv", L.wv});
    out.push_back({p + "wo", L.wo});
    out.push_back({p + "ln2_gamma", L.ln2_gamma});
    out.push_back({p + "ln2_beta", L.ln2_beta});
    out.push_back({p + "w1", L.w1});
    out.push_back({p + "b1", L.b1});
    out.push_back({p + "w2", L.w2});
    out.push_back({p + "b2", L.b2});
  }
  out.push_back({"backbone.final_gamma", final_gamma_});
  out.push_back({"backbone.final_beta", final_beta_});
  return out;
}

void FrozenTransformer::set_trainable(bool trainable) {
  for (auto& [name, t] : parameters()) {
    Tensor handle = t;
    handle.set_requires_grad(trainable);
  }
}

void FrozenTransformer::load_parameters(const ParameterList& values) {
  std::map<std::string, const Tensor*> by_name;
  for (const auto& nt : values) by_name[nt.name] = &nt.tensor;
  for (auto& [name, t] : parameters()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError("backbone checkpoint: missing tensor '" + name + "'");
    const Tensor& src = *it->second;
    if (src.shape() != t.shape()) {
      throw ShapeError("backbone checkpoint: tensor '" + name + "' has shape " + shape_str(src.shape()) +
                       ", expected " + shape_str(t.shape()));
    }
    Tensor handle = t;
    auto dst = handle.mutable_data();
    std::copy(src.data().begin(), src.data().end(), dst.begin());
  }
}

std::string transformer_config_json(const TransformerConfig& c) {
  json j = {{"layers", c.layers},
            {"heads", c.heads},
            {"width", c.width},
            {"ffn_width", c.ffn_width},
            {"max_positions", c.max_positions}};
  return j.dump();
}

TransformerConfig transformer_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  TransformerConfig c;
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.ffn_width = j.at("ffn_width").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  return c;
}

void save_backbone(const FrozenTransformer& backbone, const std::filesystem::path& path) {
  json header = {{"kind", "backbone"},
                 {"format_version", 1},
                 {"architecture", json::parse(transformer_config_json(backbone.config()))}};
  const auto params = backbone.parameters();
  write_container(path, header.dump(), params);
}

FrozenTransformer load_frozen_checkpoint(const std::filesystem::path& path, const TransformerConfig& expected) {
  const Container c = read_container(path);
  json header;
  try {
    header = json::parse(c.header);
  } catch (const json::exception& e) {
    throw ParseError(std::string("backbone checkpoint: malformed header: ") + e.what());
  }
  if (header.value("kind", "") != "backbone") {
    throw ParseError("backbone checkpoint: header kind is '" + header.value("kind", "") + "', expected 'backbone'");
  }
  const TransformerConfig stored = transformer_config_from_json(header.at("architecture").dump());
  if (!(stored == expected)) {
    throw ConfigError("backbone checkpoint architecture " + transformer_config_json(stored) +
                      " does not match configured " + transformer_config_json(expected));
  }
  FrozenTransformer backbone(stored, 0, BackboneKind::kFrozenCheckpoint);
  backbone.load_parameters(c.tensors);
  return backbone;
}

std::string weights_sha256(const Backbone& backbone) {
  const auto params = backbone.parameters();
  return tensors_sha256(params);
}

ContextProjector::ContextProjector(std::size_t token_dim, std::size_t context_dim, Rng& rng)
    : weight(init_glorot(context_dim, token_dim, rng)), bias(Tensor::zeros({context_dim}, true)) {}

Tensor ContextProjector::extract_context(const Tensor& hidden) const {
  if (hidden.rank() != 2 || hidden.rows() == 0) {
    throw ShapeError("extract_context: need at least one hidden state, got " + shape_str(hidden.shape()));
  }
  return mean_rows(linear(hidden, weight, bias));
}

void ContextProjector::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "W_c", weight});
  out.push_back({prefix + "b_c", bias});
}

}  // namespace papnf
