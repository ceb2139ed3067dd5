#pragma once

// Experiment configuration and its strict JSON mapping. Unknown keys at any
// level are rejected so a typo never silently falls back to a default.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lrnoise/data.hpp"
#include "lrnoise/noise.hpp"
#include "lrnoise/optim.hpp"

namespace lrnoise {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  std::string family = "mlp";  // "mlp" or "resnet"
  std::size_t n = 1;           // resnet blocks per stage (depth 6n + 2)
  std::vector<std::size_t> widths = {32};  // mlp hidden widths
};

struct DatasetConfig {
  std::string source = "synthetic";  // "synthetic", "cifar10" or "csv"
  // synthetic
  std::size_t classes = 4;
  std::size_t dim = 16;
  std::size_t per_class = 250;
  double separation = 3.0;
  std::uint64_t seed = 7;
  std::vector<std::size_t> image_shape;  // optional HWC reshape of synthetic vectors
  // cifar10
  std::string dir;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  bool mean_subtract = true;
  // csv
  std::string train;
  std::string test;
};

struct NoiseConfig {
  std::vector<double> etas = {0.0, 0.01, 0.05, 0.10, 0.20, 0.30, 0.40};
  std::size_t trials = 20;
  bool include_biases = false;
  bool include_batchnorm = false;
};

inline const std::vector<double> kDefaultLearningRates = {0.0005, 0.000625, 0.00075,
                                                        0.001,  0.00125,  0.0015};

struct ExperimentConfig {
  ModelConfig model;
  DatasetConfig dataset;
  std::vector<double> learning_rates = kDefaultLearningRates;
  OptimizerConfig optimizer;  // alpha is taken from learning_rates
  std::vector<OptimizerKind> optimizers = {OptimizerKind::sgd,  OptimizerKind::sgd_momentum,
                                           OptimizerKind::sgd_nesterov, OptimizerKind::adam,
                                           OptimizerKind::nadam, OptimizerKind::adamax};
  std::map<std::string, std::size_t> optimizer_epochs;  // per-kind epoch override
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  bool augmentation = false;
  std::uint64_t seed = 1;
  NoiseConfig noise;
  std::string output_dir;

  std::size_t epochs_for(OptimizerKind kind) const {
    auto it = optimizer_epochs.find(std::string(to_string(kind)));
    return it == optimizer_epochs.end() ? epochs : it->second;
  }
};

namespace detail {

using nlohmann::json;

inline void require_object(const json& j, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename V>
void read(const json& j, const char* key, V& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  if (c.model.family != "mlp" && c.model.family != "resnet")
    throw ConfigError("model.family must be 'mlp' or 'resnet'");
  if (c.model.family == "resnet" && c.model.n == 0) throw ConfigError("model.n must be >= 1");
  for (auto w : c.model.widths)
    if (w == 0) throw ConfigError("model.widths entries must be positive");
  if (c.dataset.source != "synthetic" && c.dataset.source != "cifar10" && c.dataset.source != "csv")
    throw ConfigError("dataset.source must be 'synthetic', 'cifar10' or 'csv'");
  if (c.learning_rates.empty()) throw ConfigError("learning_rates must not be empty");
  for (double a : c.learning_rates)
    if (!(a > 0.0)) throw ConfigError("learning_rates must all be > 0");
  if (c.epochs == 0) throw ConfigError("epochs must be >= 1");
  for (const auto& [k, e] : c.optimizer_epochs) {
    optimizer_kind_from_string(k);
    if (e == 0) throw ConfigError("optimizer_epochs." + k + " must be >= 1");
  }
  if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (c.noise.trials == 0) throw ConfigError("noise.trials must be >= 1");
  if (c.noise.etas.empty()) throw ConfigError("noise.etas must not be empty");
  for (double e : c.noise.etas)
    if (!(e >= 0.0)) throw ConfigError("noise.etas must be >= 0");
  OptimizerConfig probe = c.optimizer;
  probe.alpha = c.learning_rates.front();
  try {
    probe.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("optimizer: ") + e.what());
  }
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using detail::read;
  ExperimentConfig c;
  detail::require_object(j, "config",
                         {"model", "dataset", "learning_rates", "optimizer", "optimizers",
                          "optimizer_epochs", "epochs", "batch_size", "augmentation", "seed",
                          "noise", "output_dir"});
  if (j.contains("model")) {
    const auto& m = j["model"];
    detail::require_object(m, "model", {"family", "n", "widths"});
    read(m, "family", c.model.family, "model");
    read(m, "n", c.model.n, "model");
    read(m, "widths", c.model.widths, "model");
  }
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    detail::require_object(d, "dataset",
                           {"source", "classes", "dim", "per_class", "separation", "seed",
                            "image_shape", "dir", "train_limit", "test_limit", "mean_subtract",
                            "train", "test"});
    auto& o = c.dataset;
    read(d, "source", o.source, "dataset");
    read(d, "classes", o.classes, "dataset");
    read(d, "dim", o.dim, "dataset");
    read(d, "per_class", o.per_class, "dataset");
    read(d, "separation", o.separation, "dataset");
    read(d, "seed", o.seed, "dataset");
    read(d, "image_shape", o.image_shape, "dataset");
    read(d, "dir", o.dir, "dataset");
    read(d, "train_limit", o.train_limit, "dataset");
    read(d, "test_limit", o.test_limit, "dataset");
    read(d, "mean_subtract", o.mean_subtract, "dataset");
    read(d, "train", o.train, "dataset");
    read(d, "test", o.test, "dataset");
  }
  read(j, "learning_rates", c.learning_rates, "config");
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    detail::require_object(o, "optimizer", {"kind", "momentum", "beta1", "beta2", "epsilon"});
    std::string kind(to_string(c.optimizer.kind));
    read(o, "kind", kind, "optimizer");
    try {
      c.optimizer.kind = optimizer_kind_from_string(kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("optimizer.kind: ") + e.what());
    }
    read(o, "momentum", c.optimizer.momentum, "optimizer");
    read(o, "beta1", c.optimizer.beta1, "optimizer");
    read(o, "beta2", c.optimizer.beta2, "optimizer");
    read(o, "epsilon", c.optimizer.epsilon, "optimizer");
  }
  if (j.contains("optimizers")) {
    std::vector<std::string> names;
    read(j, "optimizers", names, "config");
    c.optimizers.clear();
    for (const auto& n : names) {
      try {
        c.optimizers.push_back(optimizer_kind_from_string(n));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("optimizers: ") + e.what());
      }
    }
  }
  read(j, "optimizer_epochs", c.optimizer_epochs, "config");
  read(j, "epochs", c.epochs, "config");
  read(j, "batch_size", c.batch_size, "config");
  read(j, "augmentation", c.augmentation, "config");
  read(j, "seed", c.seed, "config");
  if (j.contains("noise")) {
    const auto& n = j["noise"];
    detail::require_object(n, "noise", {"etas", "trials", "include_biases", "include_batchnorm"});
    read(n, "etas", c.noise.etas, "noise");
    read(n, "trials", c.noise.trials, "noise");
    read(n, "include_biases", c.noise.include_biases, "noise");
    read(n, "include_batchnorm", c.noise.include_batchnorm, "noise");
  }
  read(j, "output_dir", c.output_dir, "config");
  validate(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["model"] = {{"family", c.model.family}, {"n", c.model.n}, {"widths", c.model.widths}};
  const auto& d = c.dataset;
  j["dataset"] = {{"source", d.source},       {"classes", d.classes},
                  {"dim", d.dim},             {"per_class", d.per_class},
                  {"separation", d.separation}, {"seed", d.seed},
                  {"image_shape", d.image_shape}, {"dir", d.dir},
                  {"train_limit", d.train_limit}, {"test_limit", d.test_limit},
                  {"mean_subtract", d.mean_subtract}, {"train", d.train},
                  {"test", d.test}};
  j["learning_rates"] = c.learning_rates;
  j["optimizer"] = {{"kind", std::string(to_string(c.optimizer.kind))},
                    {"momentum", c.optimizer.momentum},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"epsilon", c.optimizer.epsilon}};
  std::vector<std::string> kinds;
  for (auto k : c.optimizers) kinds.emplace_back(to_string(k));
  j["optimizers"] = kinds;
  j["optimizer_epochs"] = c.optimizer_epochs;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["augmentation"] = c.augmentation;
  j["seed"] = c.seed;
  j["noise"] = {{"etas", c.noise.etas},
                {"trials", c.noise.trials},
                {"include_biases", c.noise.include_biases},
                {"include_batchnorm", c.noise.include_batchnorm}};
  j["output_dir"] = c.output_dir;
  return j;
}

/// Materializes the configured dataset.
inline Dataset<float> load_dataset(const DatasetConfig& d) {
  Dataset<float> ds;
  if (d.source == "synthetic") {
    ds = generate_synthetic({d.classes, d.dim, d.per_class, d.separation, d.seed});
    if (!d.image_shape.empty()) {
      if (shape_size(d.image_shape) != d.dim || d.image_shape.size() != 3)
        throw ConfigError("dataset.image_shape must be HWC with product == dim");
      for (Batch<float>* b : {&ds.train, &ds.test}) {
        Shape s{b->size()};
        s.insert(s.end(), d.image_shape.begin(), d.image_shape.end());
        b->inputs = b->inputs.reshaped(s);
      }
    }
  } else if (d.source == "cifar10") {
    ds = load_cifar10_binary(d.dir, {d.train_limit, d.test_limit, d.mean_subtract});
  } else {
    ds.train = read_csv_batch(d.train);
    ds.test = read_csv_batch(d.test);
    int max_label = 0;
    for (const auto* b : {&ds.train, &ds.test})
      for (int y : b->labels) {
        if (y < 0) throw ConfigError("csv dataset has a negative label");
        max_label = std::max(max_label, y);
      }
    ds.classes = d.classes ? std::max<std::size_t>(d.classes, max_label + 1) : max_label + 1;
    ds.name = "csv-" + std::filesystem::path(d.train).stem().string();
  }
  ds.train.validate(ds.classes);
  ds.test.validate(ds.classes);
  return ds;
}

}  // namespace lrnoise
