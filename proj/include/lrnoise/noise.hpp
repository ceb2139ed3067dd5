#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "lrnoise/init.hpp"
#include "lrnoise/metrics.hpp"
#include "lrnoise/network.hpp"
#include "lrnoise/rng.hpp"

namespace lrnoise {

/// Additive white Gaussian weight noise. `eta` is the noise form factor
/// (1/SNR): each selected tensor w receives N(0, (eta * std(w))^2) noise.
struct NoiseSpec {
  double eta = 0.0;
  bool include_biases = false;
  bool include_batchnorm = false;
  std::size_t trials = 20;
  RngStream rng{};
  unsigned threads = 1;  // 0 = hardware concurrency

  void validate() const {
    if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be >= 0");
    if (trials == 0) throw std::invalid_argument("trials must be >= 1");
  }
};

struct NoiseTrialResult {
  double eta = 0.0;
  std::size_t trials = 0;
  std::vector<double> per_trial_acc;  // indexed by trial; empty when read back from CSV
  double mean_acc = 0.0;
  double std_acc = 0.0;  // population std across trials
};

struct NoiseSweepResult {
  double baseline_acc = 0.0;
  std::vector<NoiseTrialResult> points;
  std::vector<double> normalized;
  std::optional<double> avg_normalized;  // absent when every eta is 0
};

inline const std::vector<double> kDefaultEtas = {0.01, 0.05, 0.10, 0.20, 0.30, 0.40};

/// sigma_noise = eta * sigma_w, with sigma_w the population std of `weights`.
template <typename T>
double noise_sigma(const Tensor<T>& weights, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("noise_sigma: eta must be >= 0");
  return eta * tensor_std(weights);
}

inline bool receives_noise(ParamRole role, const NoiseSpec& spec) {
  switch (role) {
    case ParamRole::weight: return true;
    case ParamRole::bias: return spec.include_biases;
    case ParamRole::bn_gamma:
    case ParamRole::bn_beta: return spec.include_batchnorm;
    default: return false;
  }
}

/// Copy of `net` with every selected tensor perturbed independently. The
/// draws for a tensor come from the sub-stream (rng, trial_index, name), so
/// a trial is reproducible on its own. eta == 0 yields an exact copy.
template <typename T>
Network<T> inject_noise(const Network<T>& net, const NoiseSpec& spec, std::size_t trial_index) {
  spec.validate();
  Network<T> out = net;
  if (spec.eta == 0.0) return out;
  const RngStream trial = spec.rng.derive(static_cast<std::uint64_t>(trial_index));
  for (auto& [name, t] : out.params()) {
    if (!receives_noise(net.role(name), spec)) continue;
    const double sigma = noise_sigma(t, spec.eta);
    if (sigma == 0.0) continue;
    RngStream draw = trial.derive(name);
    for (auto& v : t.values()) v = static_cast<T>(static_cast<double>(v) + sigma * draw.normal());
  }
  return out;
}

/// Accuracy of one perturbed copy.
template <typename T>
double evaluate_trial(const Network<T>& net, const Batch<T>& test, const NoiseSpec& spec,
                      std::size_t trial_index) {
  return accuracy(inject_noise(net, spec, trial_index), test);
}

inline double mean_of(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty list");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double population_std(std::span<const double> xs) {
  const double m = mean_of(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

/// Runs spec.trials independent inject-then-evaluate trials. Trials may run
/// on several threads; results are stored by trial index, so the outcome
/// does not depend on scheduling.
template <typename T>
NoiseTrialResult evaluate_under_noise(const Network<T>& net, const Batch<T>& test,
                                      const NoiseSpec& spec) {
  spec.validate();
  if (test.empty()) throw std::invalid_argument("evaluate_under_noise: empty test set");
  NoiseTrialResult r;
  r.eta = spec.eta;
  r.trials = spec.trials;
  r.per_trial_acc.assign(spec.trials, 0.0);
  unsigned workers = spec.threads ? spec.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, spec.trials));
  if (workers <= 1) {
    for (std::size_t i = 0; i < spec.trials; ++i) r.per_trial_acc[i] = evaluate_trial(net, test, spec, i);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < spec.trials; i += workers)
          r.per_trial_acc[i] = evaluate_trial(net, test, spec, i);
      });
  }
  r.mean_acc = mean_of(r.per_trial_acc);
  r.std_acc = population_std(r.per_trial_acc);
  return r;
}

/// A^x = a^x / a_0.
inline double normalized_accuracy(double a_x, double a_0) {
  if (!(a_0 > 0.0)) throw std::invalid_argument("normalized_accuracy: baseline must be > 0");
  return a_x / a_0;
}

/// Mean of the normalized accuracies at the non-baseline noise levels.
inline double average_normalized_accuracy(std::span<const double> normalized) {
  if (normalized.empty()) throw std::invalid_argument("average_normalized_accuracy: empty list");
  return mean_of(normalized);
}

/// Baseline accuracy plus one multi-trial point per eta. eta == 0 entries
/// reuse the baseline (a single noiseless evaluation, no sampling).
template <typename T>
NoiseSweepResult noise_sweep(const Network<T>& net, const Batch<T>& test,
                             const std::vector<double>& etas, const NoiseSpec& spec_template) {
  if (etas.empty()) throw std::invalid_argument("noise_sweep: no noise levels");
  NoiseSweepResult out;
  out.baseline_acc = accuracy(net, test);
  std::vector<double> non_baseline;
  for (double eta : etas) {
    NoiseSpec spec = spec_template;
    spec.eta = eta;
    spec.validate();
    NoiseTrialResult point;
    if (eta == 0.0) {
      point.eta = 0.0;
      point.trials = 1;
      point.per_trial_acc = {out.baseline_acc};
      point.mean_acc = out.baseline_acc;
    } else {
      point = evaluate_under_noise(net, test, spec);
    }
    const double a = normalized_accuracy(point.mean_acc, out.baseline_acc);
    out.normalized.push_back(a);
    if (eta != 0.0) non_baseline.push_back(a);
    out.points.push_back(std::move(point));
  }
  if (!non_baseline.empty()) out.avg_normalized = average_normalized_accuracy(non_baseline);
  return out;
}

}  // namespace lrnoise
