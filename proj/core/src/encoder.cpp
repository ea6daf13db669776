#include "papnf/encoder.hpp"

#include <cmath>

namespace papnf {

std::size_t PatchConfig::patch_count() const { return (lookback + patch_len - 1) / patch_len; }

void PatchConfig::validate() const {
  if (patch_len == 0) throw ConfigError("patch_len must be at least 1");
  if (lookback == 0 || channels == 0) throw ConfigError("lookback and channels must be positive");
}

Tensor patchify(std::span<const double> window, const PatchConfig& cfg) {
  cfg.validate();
  if (window.size() != cfg.lookback * cfg.channels) {
    throw ShapeError("patchify: window has " + std::to_string(window.size()) + " values, expected " +
                     std::to_string(cfg.lookback * cfg.channels));
  }
  const std::size_t m = cfg.patch_count();
  const std::size_t width = cfg.patch_width();
  std::vector<double> out(m * width, 0.0);
  // row-major flattening makes patch m the contiguous range [m*p*C, (m+1)*p*C)
  std::copy(window.begin(), window.end(), out.begin());
  return Tensor::matrix(m, width, std::move(out));
}

std::vector<double> unpatchify(const Tensor& patches, const PatchConfig& cfg) {
  if (patches.rank() != 2 || patches.rows() != cfg.patch_count() || patches.cols() != cfg.patch_width()) {
    throw ShapeError("unpatchify: patches " + shape_str(patches.shape()) + " do not match config");
  }
  auto d = patches.data();
  return {d.begin(), d.begin() + static_cast<std::ptrdiff_t>(cfg.lookback * cfg.channels)};
}

NumericalEncoder::NumericalEncoder(const PatchConfig& cfg, std::size_t numeric_dim, Rng& rng) {
  cfg.validate();
  const std::size_t flat = cfg.lookback * cfg.channels;
  patch_weight = init_uniform({numeric_dim, cfg.patch_width()},
                              1.0 / std::sqrt(static_cast<double>(cfg.patch_width())), rng);
  patch_bias = Tensor::zeros({numeric_dim}, true);
  global_weight = init_uniform({numeric_dim, flat}, 1.0 / std::sqrt(static_cast<double>(flat)), rng);
  global_bias = Tensor::zeros({numeric_dim}, true);
}

Tensor NumericalEncoder::encode_global(const Tensor& flat_window) const {
  if (flat_window.rank() != 1 || flat_window.numel() != global_weight.cols()) {
    throw ShapeError("encode_global: input " + shape_str(flat_window.shape()) + " does not match W " +
                     shape_str(global_weight.shape()));
  }
  return linear(flat_window, global_weight, global_bias);
}

Tensor NumericalEncoder::encode_patches(const Tensor& patches) const {
  return linear(patches, patch_weight, patch_bias);
}

void NumericalEncoder::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "W_patch", patch_weight});
  out.push_back({prefix + "b_patch", patch_bias});
  out.push_back({prefix + "W", global_weight});
  out.push_back({prefix + "b", global_bias});
}

Reprogrammer::Reprogrammer(std::size_t numeric_dim, std::size_t token_dim, Rng& rng)
    : weight(init_glorot(token_dim, numeric_dim, rng)), bias(Tensor::zeros({token_dim}, true)) {}

Tensor Reprogrammer::reprogram(const Tensor& patch_embeddings) const {
  return linear(patch_embeddings, weight, bias);
}

void Reprogrammer::collect(ParameterList& out, const std::string& prefix) const {
  out.push_back({prefix + "W_p", weight});
  out.push_back({prefix + "b_p", bias});
}

PrefixBank::PrefixBank(std::size_t length, std::size_t token_dim, Rng& rng)
    : length_(length), token_dim_(token_dim) {
  if (length_ > 0) prefix_ = init_normal({length_, token_dim_}, 1.0, rng);
}

void PrefixBank::collect(ParameterList& out, const std::string& prefix) const {
  if (length_ > 0) out.push_back({prefix + "P", prefix_});
}

Tensor build_llm_input(const PrefixBank& bank, const Tensor& reprogrammed) {
  if (reprogrammed.rank() != 2) {
    throw ShapeError("build_llm_input: E_rep must be a matrix, got " + shape_str(reprogrammed.shape()));
  }
  if (bank.length() == 0) return reprogrammed;
  if (bank.token_dim() != reprogrammed.cols()) {
    throw ShapeError("build_llm_input: prefix width " + std::to_string(bank.token_dim()) +
                     " differs from token width " + std::to_string(reprogrammed.cols()));
  }
  return concat_rows({bank.prefix(), reprogrammed});
}

}  // namespace papnf
