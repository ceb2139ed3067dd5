#pragma once

#include <filesystem>
#include <string>

#include "lrnoise/config.hpp"
#include "lrnoise/noise.hpp"
#include "lrnoise/report.hpp"
#include "lrnoise/train.hpp"

namespace lrnoise {

/// Noise settings for every row of an experiment. All rows share one noise
/// stream (common random numbers), so row differences come from the models.
inline NoiseSpec noise_spec_for(const ExperimentConfig& cfg) {
  NoiseSpec spec;
  spec.include_biases = cfg.noise.include_biases;
  spec.include_batchnorm = cfg.noise.include_batchnorm;
  spec.trials = cfg.noise.trials;
  spec.rng = RngStream(cfg.seed, fnv1a64("noise"));
  spec.threads = 0;
  return spec;
}

/// Trains one model (or loads it from the cache) and measures its noise curve.
inline SweepRow evaluate_row(const ExperimentConfig& cfg, const Dataset<float>& data,
                             const OptimizerConfig& opt, std::size_t epochs) {
  const std::filesystem::path cache =
      cfg.output_dir.empty() ? std::filesystem::path{} : std::filesystem::path(cfg.output_dir) / "cache";
  auto trained = train_or_load(cfg, data, opt, epochs, cache);
  SweepRow row;
  row.model = model_name(cfg.model);
  row.dataset = data.name;
  row.learning_rate = opt.alpha;
  row.optimizer = std::string(to_string(opt.kind));
  row.seed = cfg.seed;
  row.result = noise_sweep(trained.net, data.test, cfg.noise.etas, noise_spec_for(cfg));
  row.history = std::move(trained.history);
  return row;
}

namespace detail {

inline void flush(const ExperimentConfig& cfg, const SweepReport& report) {
  if (!cfg.output_dir.empty()) emit_report(report, cfg.output_dir);
}

}  // namespace detail

/// One row per configured learning rate, all with the configured optimizer.
/// With output_dir set, the report files are rewritten after every row.
inline SweepReport sweep_learning_rates(const ExperimentConfig& cfg, const Dataset<float>& data) {
  validate(cfg);
  SweepReport report;
  for (double alpha : cfg.learning_rates) {
    OptimizerConfig opt = cfg.optimizer;
    opt.alpha = alpha;
    report.rows.push_back(evaluate_row(cfg, data, opt, cfg.epochs_for(opt.kind)));
    detail::flush(cfg, report);
  }
  return report;
}

/// One row per configured optimizer kind at the first learning rate.
inline SweepReport sweep_optimizers(const ExperimentConfig& cfg, const Dataset<float>& data) {
  validate(cfg);
  if (cfg.optimizers.empty()) throw ConfigError("optimizers must not be empty");
  SweepReport report;
  for (auto kind : cfg.optimizers) {
    OptimizerConfig opt = cfg.optimizer;
    opt.kind = kind;
    opt.alpha = cfg.learning_rates.front();
    report.rows.push_back(evaluate_row(cfg, data, opt, cfg.epochs_for(kind)));
    detail::flush(cfg, report);
  }
  return report;
}

}  // namespace lrnoise
