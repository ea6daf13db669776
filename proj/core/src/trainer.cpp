#include "papnf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "papnf/parallel.hpp"
#include "papnf/serialize.hpp"
#include "papnf/synthetic.hpp"

namespace papnf {

using nlohmann::json;

namespace {
constexpr int kCheckpointVersion = 1;
constexpr const char* kModelFormat = "papnf-model";
}  // namespace

std::string to_string(Objective objective) { return objective == Objective::kCrps ? "crps" : "mse"; }

Objective objective_from_string(const std::string& text) {
  if (text == "crps") return Objective::kCrps;
  if (text == "mse") return Objective::kMse;
  throw ConfigError("unknown objective '" + text + "' (expected crps or mse)");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0 && learning_rate <= 1e-3)) {
    throw ConfigError("learning_rate " + std::to_string(learning_rate) + " outside [0, 1e-3]");
  }
  if (batch_size < 1 || batch_size > 16) throw ConfigError("batch_size must lie in [1, 16]");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (val_samples == 0) throw ConfigError("val_samples must be positive");
  if (objective == Objective::kCrps && loss_samples < 2) throw ConfigError("the crps objective needs loss_samples >= 2");
}

std::string train_config_json(const TrainConfig& c) {
  json j = {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
            {"epochs", c.epochs},               {"seed", c.seed},
            {"objective", to_string(c.objective)}, {"loss_samples", c.loss_samples},
            {"val_samples", c.val_samples},     {"max_batches_per_epoch", c.max_batches_per_epoch},
            {"beta1", c.beta1},                 {"beta2", c.beta2},
            {"adam_eps", c.adam_eps}};
  return j.dump();
}

TrainConfig train_config_from_json(const std::string& text) {
  const json j = json::parse(text);
  TrainConfig c;
  for (const auto& item : j.items()) {
    const std::string& k = item.key();
    const json& v = item.value();
    if (k == "learning_rate") c.learning_rate = v.get<double>();
    else if (k == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (k == "epochs") c.epochs = v.get<std::size_t>();
    else if (k == "seed") c.seed = v.get<std::uint64_t>();
    else if (k == "objective") c.objective = objective_from_string(v.get<std::string>());
    else if (k == "loss_samples") c.loss_samples = v.get<std::size_t>();
    else if (k == "val_samples") c.val_samples = v.get<std::size_t>();
    else if (k == "max_batches_per_epoch") c.max_batches_per_epoch = v.get<std::size_t>();
    else if (k == "beta1") c.beta1 = v.get<double>();
    else if (k == "beta2") c.beta2 = v.get<double>();
    else if (k == "adam_eps") c.adam_eps = v.get<double>();
    else throw ConfigError("train config: unknown key '" + k + "'");
  }
  return c;
}

Adam::Adam(ParameterList params, double learning_rate, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& nt : params_) {
    if (!nt.tensor.requires_grad()) throw ConfigError("optimizer given frozen tensor '" + nt.name + "'");
    m_.emplace_back(nt.tensor.numel(), 0.0);
    v_.emplace_back(nt.tensor.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& tensor = params_[p].tensor;
    if (!tensor.has_grad()) continue;
    const auto g = tensor.grad();
    auto x = tensor.mutable_data();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      x[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& nt : params_) nt.tensor.zero_grad();
}

Tensor loss_reconstruction(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw ShapeError("loss_reconstruction: prediction " + shape_str(prediction.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  return mean(square(prediction - target));
}

Tensor loss_crps_samples(const Tensor& draws, const Tensor& target) {
  if (draws.rank() != 2 || target.rank() != 1 || draws.cols() != target.numel()) {
    throw ShapeError("loss_crps_samples: draws " + shape_str(draws.shape()) + " vs target " +
                     shape_str(target.shape()));
  }
  const std::size_t m = draws.rows();
  const std::size_t n = draws.cols();
  if (m < 2) throw ShapeError("loss_crps_samples needs at least two draws");
  const Tensor accuracy = mean(abs(draws - repeat_rows(target, m)));
  // Row (j, k) of the difference operator picks X_j - X_k for j < k.
  const std::size_t pairs = m * (m - 1) / 2;
  std::vector<double> diff(pairs * m, 0.0);
  std::size_t row = 0;
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = j + 1; k < m; ++k, ++row) {
      diff[row * m + j] = 1.0;
      diff[row * m + k] = -1.0;
    }
  }
  const Tensor spread = sum(abs(matmul(Tensor::matrix(pairs, m, std::move(diff)), draws)));
  return accuracy - scale(spread, 1.0 / static_cast<double>(m * (m - 1) * n));
}

Tensor window_loss(const PapNfModel& model, const WindowSample& window, const TrainConfig& config,
                   std::uint64_t step) {
  const ModelConfig& mc = model.config();
  const StandardizedWindow w = standardize(window);
  const Conditioning cond = model.condition(w.x);
  const std::size_t draws = config.objective == Objective::kMse ? 1 : config.loss_samples;
  Rng rng(derive_seed(config.seed, "train_latent", step, window.start));
  const Tensor out = model.decode(cond, sample_base(rng, draws, mc.latent_dim));
  const Tensor target = Tensor::vector(w.y);
  if (config.objective == Objective::kMse) return loss_reconstruction(reshape(out, {out.numel()}), target);
  return loss_crps_samples(out, target);
}

double validation_mse(const PapNfModel& model, const std::vector<WindowSample>& windows, std::size_t samples,
                      std::uint64_t seed) {
  if (windows.empty()) throw ConfigError("validation split has no windows");
  std::vector<double> sse(windows.size(), 0.0);
  parallel_for(windows.size(), [&](std::size_t i) {
    const ForecastEnsemble ens = sample_forecasts(model, windows[i], samples, seed);
    const auto mu = ens.mean();
    double acc = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) acc += (mu[k] - windows[i].y[k]) * (mu[k] - windows[i].y[k]);
    sse[i] = acc;
  });
  const double total = std::accumulate(sse.begin(), sse.end(), 0.0);
  return total / static_cast<double>(windows.size() * windows.front().y.size());
}

FitResult fit(PapNfModel& model, const std::vector<WindowSample>& train, const std::vector<WindowSample>& val,
              const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train.empty()) throw ConfigError("training split has no windows");
  if (val.empty()) throw ConfigError("validation split has no windows");

  Adam optimizer(model.trainable_parameters(), config.learning_rate, config.beta1, config.beta2, config.adam_eps);
  Rng shuffler(derive_seed(config.seed, "shuffle"));
  const std::uint64_t val_seed = derive_seed(config.seed, "validation");
  std::vector<std::size_t> order(train.size());
  std::deque<double> recent;

  FitResult result;
  std::vector<std::vector<double>> best;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffler.engine());
    std::size_t batches = (order.size() + config.batch_size - 1) / config.batch_size;
    if (config.max_batches_per_epoch > 0) batches = std::min(batches, config.max_batches_per_epoch);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * config.batch_size;
      const std::size_t hi = std::min(lo + config.batch_size, order.size());
      const double weight = 1.0 / static_cast<double>(hi - lo);
      for (std::size_t i = lo; i < hi; ++i) {
        const Tensor loss = window_loss(model, train[order[i]], config, result.steps);
        const double value = loss.item();
        recent.push_back(value);
        if (recent.size() > 10) recent.pop_front();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite training loss at epoch " << epoch << ", batch " << b << " (window start "
              << train[order[i]].start << "); recent losses:";
          for (double r : recent) msg << ' ' << r;
          throw NumericError(msg.str());
        }
        backward(scale(loss, weight));
        loss_sum += value;
        ++loss_count;
      }
      optimizer.step();
      ++result.steps;
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(loss_count),
                       validation_mse(model, val, config.val_samples, val_seed)};
    if (!std::isfinite(record.val_mse)) {
      throw NumericError("non-finite validation MSE after epoch " + std::to_string(epoch));
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    if (result.best_epoch == 0 || record.val_mse < result.best_val_mse) {
      result.best_epoch = epoch;
      result.best_val_mse = record.val_mse;
      best = model.snapshot();
    }
  }
  model.restore(best);
  result.rng_state = shuffler.state();
  return result;
}

void save_checkpoint(const PapNfModel& model, const CheckpointInfo& info, const std::filesystem::path& path) {
  ParameterList tensors = model.trainable_parameters();
  const ParameterList frozen = model.frozen_parameters();
  tensors.insert(tensors.end(), frozen.begin(), frozen.end());
  json header = {{"format", kModelFormat},
                 {"version", kCheckpointVersion},
                 {"model", json::parse(model_config_json(model.config()))},
                 {"val_mse", info.val_mse},
                 {"rng_state", info.rng_state},
                 {"backbone_sha256", tensors_sha256(frozen)}};
  if (!info.train_config.empty()) header["train"] = json::parse(info.train_config);
  write_container(path, header.dump(), tensors);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  Container c = read_container(path);
  json header;
  try {
    header = json::parse(c.header);
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  if (header.value("format", "") != kModelFormat) {
    throw ParseError("'" + path.string() + "' is not a model checkpoint");
  }
  const int version = header.value("version", -1);
  if (version != kCheckpointVersion) {
    throw ParseError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                     std::to_string(kCheckpointVersion) + ")");
  }
  const ModelConfig cfg = model_config_from_json(header.at("model").dump());

  ParameterList backbone_tensors, trainable;
  for (auto& nt : c.tensors) (nt.name.starts_with("backbone.") ? backbone_tensors : trainable).push_back(nt);

  std::shared_ptr<const Backbone> backbone;
  if (!cfg.bypass_backbone && !cfg.no_global_context) {
    if (cfg.backbone_kind == BackboneKind::kIdentity) {
      backbone = std::make_shared<IdentityBackbone>(cfg.token_dim);
    } else {
      auto transformer = std::make_shared<FrozenTransformer>(cfg.transformer_config(), 0, cfg.backbone_kind);
      transformer->load_parameters(backbone_tensors);
      backbone = transformer;
    }
    if (tensors_sha256(backbone->parameters()) != header.value("backbone_sha256", "")) {
      throw ParseError("checkpoint backbone weights do not match their recorded hash");
    }
  }
  PapNfModel model(cfg, backbone);
  model.load_trainable(trainable);
  CheckpointInfo info;
  info.val_mse = header.value("val_mse", 0.0);
  info.rng_state = header.value("rng_state", "");
  if (header.contains("train")) info.train_config = header.at("train").dump();
  return {std::move(model), std::move(info)};
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  const json have = json::parse(model_config_json(loaded.model.config()));
  const json want = json::parse(model_config_json(expected));
  std::string diffs;
  for (const auto& item : want.items()) {
    if (item.key() == "seed") continue;
    if (have.at(item.key()) != item.value()) {
      diffs += (diffs.empty() ? "" : ", ") + item.key() + " (checkpoint " + have.at(item.key()).dump() +
               ", expected " + item.value().dump() + ")";
    }
  }
  if (!diffs.empty()) throw ConfigError("checkpoint architecture mismatch: " + diffs);
  return loaded;
}

PretrainResult pretrain_backbone(const TransformerConfig& config, const PretrainConfig& pretrain) {
  if (pretrain.steps == 0 || pretrain.sequence_length < 2) throw ConfigError("pretraining needs steps and sequences of length >= 2");
  auto backbone = std::make_shared<FrozenTransformer>(config, derive_seed(pretrain.seed, "pretrain_init"),
                                                      BackboneKind::kFrozenCheckpoint);
  backbone->set_trainable(true);
  Rng rng(derive_seed(pretrain.seed, "pretrain_io"));
  const std::size_t d = config.width;
  const Tensor w_in = init_normal({d, 1}, 1.0, rng);
  const Tensor b_in = Tensor::zeros({d}, true);
  const Tensor w_out = init_glorot(1, d, rng);
  const Tensor b_out = Tensor::zeros({1}, true);

  ParameterList params = backbone->parameters();
  params.push_back({"embed.W", w_in});
  params.push_back({"embed.b", b_in});
  params.push_back({"readout.W", w_out});
  params.push_back({"readout.b", b_out});
  Adam optimizer(params, pretrain.learning_rate);

  PretrainResult result;
  const std::size_t n = pretrain.sequence_length - 1;
  for (std::size_t step = 0; step < pretrain.steps; ++step) {
    const auto seq = synthetic::pretraining_sequence(pretrain.sequence_length, derive_seed(pretrain.seed, "corpus", step));
    const Tensor inputs = Tensor::matrix(n, 1, {seq.begin(), seq.end() - 1});
    const Tensor target = Tensor::vector({seq.begin() + 1, seq.end()});
    const Tensor hidden = backbone->forward(linear(inputs, w_in, b_in));
    const Tensor loss = loss_reconstruction(reshape(linear(hidden, w_out, b_out), {n}), target);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericError("backbone pretraining diverged at step " + std::to_string(step));
    }
    result.losses.push_back(value);
    backward(loss);
    optimizer.step();
  }
  backbone->set_trainable(false);
  result.backbone = backbone;
  return result;
}

}  // namespace papnf
