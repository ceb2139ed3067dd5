#pragma once

#include <bit>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lrnoise/augment.hpp"
#include "lrnoise/config.hpp"
#include "lrnoise/metrics.hpp"
#include "lrnoise/optim.hpp"
#include "lrnoise/weights_io.hpp"

namespace lrnoise {

struct TrainingHistory {
  std::vector<double> train_loss;
  std::vector<double> train_acc;
  std::vector<double> test_acc;
  double wall_seconds = 0.0;

  std::size_t epochs() const noexcept { return train_loss.size(); }
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::size_t epoch)
      : std::runtime_error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

struct TrainedModel {
  Network<float> net;
  TrainingHistory history;
};

inline std::string model_name(const ModelConfig& m) {
  if (m.family == "resnet") return "resnet" + std::to_string(6 * m.n + 2);
  std::string s = "mlp";
  for (auto w : m.widths) s += "-" + std::to_string(w);
  return s;
}

inline Network<float> build_model(const ModelConfig& m, const Dataset<float>& data) {
  const Shape in = data.train.example_shape();
  if (m.family == "resnet") return build_resnet<float>(m.n, data.classes, in);
  return build_mlp<float>(shape_size(in), m.widths, data.classes);
}

/// Root of every random stream used to train one model. Depends on the
/// master seed and the learning rate only, so rows that differ only in
/// optimizer start from the same initialization and batch order.
inline RngStream training_stream(std::uint64_t seed, double alpha) {
  return RngStream(seed, fnv1a64("train")).derive(std::bit_cast<std::uint64_t>(alpha));
}

/// Minibatch training with a fixed learning rate. Cross-entropy loss, batch
/// statistics for batchnorm, reshuffle each epoch.
inline TrainedModel train_model(const ExperimentConfig& cfg, const Dataset<float>& data,
                                const OptimizerConfig& opt, std::size_t epochs) {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  opt.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const RngStream root = training_stream(cfg.seed, opt.alpha);
  TrainedModel out{build_model(cfg.model, data), {}};
  out.net.initialize(root.derive("init"));
  const bool images = data.train.inputs.rank() == 4;
  if (cfg.augmentation && !images) throw ConfigError("augmentation requires image-shaped inputs");
  OptimizerState<float> state;
  const std::size_t n = data.train.size();
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle = root.derive("shuffle").derive(epoch);
    for (std::size_t i = n; i-- > 1;) std::swap(order[i], order[shuffle.below(i + 1)]);
    RngStream aug_rng = root.derive("augment").derive(epoch);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      Batch<float> batch = gather(
          data.train, std::span<const std::size_t>(order.data() + begin, end - begin));
      if (cfg.augmentation) batch = augment(batch, aug_rng);
      auto lg = out.net.loss_and_grads(batch, Mode::train);
      if (!std::isfinite(lg.loss)) throw DivergenceError(epoch + 1);
      out.net.update_running_stats(lg.batch_stats);
      step(opt, state, out.net, lg.grads);
      loss_sum += lg.loss * static_cast<double>(end - begin);
      hits += count_correct(lg.logits, batch.labels);
    }
    out.history.train_loss.push_back(loss_sum / static_cast<double>(n));
    out.history.train_acc.push_back(static_cast<double>(hits) / static_cast<double>(n));
    out.history.test_acc.push_back(accuracy(out.net, data.test));
  }
  out.history.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline nlohmann::json to_json(const TrainingHistory& h) {
  return {{"train_loss", h.train_loss},
          {"train_acc", h.train_acc},
          {"test_acc", h.test_acc},
          {"wall_seconds", h.wall_seconds}};
}

/// Hash of everything that determines a trained model, used to name cached
/// weight files.
inline std::uint64_t training_key(const ExperimentConfig& cfg, const OptimizerConfig& opt,
                                  std::size_t epochs) {
  nlohmann::json j = to_json(cfg);
  nlohmann::json key = {{"model", j["model"]},
                        {"dataset", j["dataset"]},
                        {"batch_size", cfg.batch_size},
                        {"augmentation", cfg.augmentation},
                        {"seed", cfg.seed},
                        {"epochs", epochs},
                        {"optimizer",
                         {{"kind", std::string(to_string(opt.kind))},
                          {"alpha", opt.alpha},
                          {"momentum", opt.momentum},
                          {"beta1", opt.beta1},
                          {"beta2", opt.beta2},
                          {"epsilon", opt.epsilon}}}};
  return fnv1a64(key.dump());
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 0xF];
  return s;
}

/// Trains (or reuses cached weights from `cache_dir`, when non-empty).
/// Cached models come back with an empty history.
inline TrainedModel train_or_load(const ExperimentConfig& cfg, const Dataset<float>& data,
                                  const OptimizerConfig& opt, std::size_t epochs,
                                  const std::filesystem::path& cache_dir) {
  if (cache_dir.empty()) return train_model(cfg, data, opt, epochs);
  const auto path = cache_dir / (hex64(training_key(cfg, opt, epochs)) + ".nrwt");
  if (std::filesystem::exists(path)) {
    TrainedModel cached{build_model(cfg.model, data), {}};
    load_weights(cached.net, path);
    return cached;
  }
  auto trained = train_model(cfg, data, opt, epochs);
  std::filesystem::create_directories(cache_dir);
  save_weights(trained.net, path);
  return trained;
}

/// Trains with the first configured learning rate and writes weights.nrwt
/// and history.json to output_dir (when set).
inline TrainedModel run_training(const ExperimentConfig& cfg, const Dataset<float>& data) {
  validate(cfg);
  OptimizerConfig opt = cfg.optimizer;
  opt.alpha = cfg.learning_rates.front();
  auto result = train_model(cfg, data, opt, cfg.epochs_for(opt.kind));
  if (!cfg.output_dir.empty()) {
    const std::filesystem::path dir(cfg.output_dir);
    std::filesystem::create_directories(dir);
    save_weights(result.net, dir / "weights.nrwt");
    std::ofstream(dir / "history.json") << to_json(result.history).dump(2) << '\n';
  }
  return result;
}

inline TrainedModel run_training(const ExperimentConfig& cfg) {
  return run_training(cfg, load_dataset(cfg.dataset));
}

}  // namespace lrnoise
