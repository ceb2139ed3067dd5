#pragma once

// Minibatch gradient noise at a fixed parameter point x. With per-example
// gradients g_i, full-data gradient g_D = mean_i g_i and
//   C = mean_i ||g_i - g_D||^2,
// the minibatch update noise E||alpha g_B - alpha g_D||^2 equals
// alpha^2 C / |B| for i.i.d. (with-replacement) batches and
// alpha^2 (C / |B|) (N - |B|) / (N - 1) for without-replacement batches.
//
// All gradients are eval-mode (batchnorm running statistics), which makes
// the loss a plain mean of per-example losses. Flattening follows the
// lexicographic order of parameter names.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "lrnoise/network.hpp"
#include "lrnoise/rng.hpp"

namespace lrnoise {

enum class Sampling { with_replacement, without_replacement };

inline std::string_view to_string(Sampling s) {
  return s == Sampling::with_replacement ? "with" : "without";
}

inline Sampling sampling_from_string(std::string_view s) {
  if (s == "with" || s == "with_replacement") return Sampling::with_replacement;
  if (s == "without" || s == "without_replacement") return Sampling::without_replacement;
  throw std::invalid_argument("sampling must be 'with' or 'without', got '" + std::string(s) + "'");
}

struct GradNoiseConfig {
  double alpha = 1e-3;
  std::size_t batch_size = 8;
  std::size_t sample_count = 10000;  // M minibatches
  Sampling sampling = Sampling::with_replacement;
  RngStream rng{};
};

struct GradNoiseReport {
  double full_grad_norm = 0.0;
  double C = 0.0;
  double empirical_noise_power = 0.0;
  double theoretical_bound = 0.0;  // alpha^2 C / |B|
  double expected_noise_power = 0.0;  // exact expectation under the sampling mode
  double tolerance = 0.0;  // slack tau applied to the bound
  bool bound_satisfied = false;
  double relative_gap = 0.0;  // (bound - empirical) / bound, 0 when bound is 0
};

using FlatGrad = std::vector<double>;

template <typename T>
FlatGrad flatten(const ParamMap<T>& grads) {
  FlatGrad out;
  for (const auto& [name, g] : grads)
    for (T v : g.values()) out.push_back(static_cast<double>(v));
  return out;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline double squared_norm(std::span<const double> a) {
  return std::inner_product(a.begin(), a.end(), a.begin(), 0.0);
}

/// Gradient of the mean loss over the minibatch `batch`, flattened.
template <typename T>
FlatGrad batch_gradient(const Network<T>& net, const Batch<T>& batch) {
  return flatten(net.loss_and_grads(batch, Mode::eval).grads);
}

/// Gradient of the mean loss over every example, accumulated in chunks.
template <typename T>
FlatGrad full_gradient(const Network<T>& net, const Batch<T>& data, std::size_t chunk = 512) {
  if (data.empty()) throw std::invalid_argument("full_gradient: empty dataset");
  if (data.size() <= chunk) return batch_gradient(net, data);
  FlatGrad total;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const std::size_t end = std::min(data.size(), begin + chunk);
    FlatGrad g = batch_gradient(net, slice(data, begin, end));
    const double w = static_cast<double>(end - begin);
    if (total.empty()) total.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) total[i] += w * g[i];
  }
  for (auto& v : total) v /= static_cast<double>(data.size());
  return total;
}

template <typename T>
std::vector<FlatGrad> per_example_gradients(const Network<T>& net, const Batch<T>& data) {
  std::vector<FlatGrad> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t idx[] = {i};
    out.push_back(batch_gradient(net, gather(data, std::span<const std::size_t>(idx))));
  }
  return out;
}

inline FlatGrad mean_gradient(std::span<const FlatGrad> grads) {
  if (grads.empty()) throw std::invalid_argument("mean_gradient: empty set");
  FlatGrad m(grads.front().size(), 0.0);
  for (const auto& g : grads)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += g[i];
  for (auto& v : m) v /= static_cast<double>(grads.size());
  return m;
}

/// C = mean_i ||g_i - mean(g)||^2 from explicit per-example gradients.
inline double deviation_constant(std::span<const FlatGrad> per_example) {
  const FlatGrad mean = mean_gradient(per_example);
  double c = 0.0;
  for (const auto& g : per_example) c += squared_distance(g, mean);
  return c / static_cast<double>(per_example.size());
}

template <typename T>
double deviation_constant(const Network<T>& net, const Batch<T>& data) {
  if (data.empty()) throw std::invalid_argument("deviation_constant: empty dataset");
  const auto per = per_example_gradients(net, data);
  const FlatGrad full = full_gradient(net, data);
  double c = 0.0;
  for (const auto& g : per) c += squared_distance(g, full);
  return c / static_cast<double>(per.size());
}

/// Draws one minibatch of indices into [0, n). Without-replacement batches
/// come back sorted.
inline std::vector<std::size_t> sample_batch(RngStream& rng, std::size_t n, std::size_t b,
                                             Sampling sampling) {
  std::vector<std::size_t> idx;
  if (sampling == Sampling::with_replacement) {
    idx.resize(b);
    for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
  } else {
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t k = 0; k < b; ++k) {
      const std::size_t j = k + static_cast<std::size_t>(rng.below(n - k));
      std::swap(pool[k], pool[j]);
    }
    idx.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(b));
    // A batch is a set; dataset order makes the full batch reproduce g_D bit for bit.
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

inline void validate(const GradNoiseConfig& cfg, std::size_t dataset_size) {
  if (dataset_size == 0) throw std::invalid_argument("grad-noise: empty dataset");
  if (cfg.batch_size == 0) throw std::invalid_argument("grad-noise: batch_size must be >= 1");
  if (cfg.sample_count == 0) throw std::invalid_argument("grad-noise: sample_count must be >= 1");
  if (cfg.sampling == Sampling::without_replacement && cfg.batch_size > dataset_size)
    throw std::invalid_argument("grad-noise: batch_size " + std::to_string(cfg.batch_size) +
                                " exceeds dataset size " + std::to_string(dataset_size) +
                                " under without-replacement sampling");
}

/// Monte-Carlo mean over M minibatches of ||alpha g_B - alpha g_D||^2,
/// computed as alpha^2 * mean ||g_B - g_D||^2. Each minibatch gradient is a
/// genuine forward/backward pass over the sampled batch.
template <typename T>
double empirical_noise_power(const Network<T>& net, const Batch<T>& data,
                             const GradNoiseConfig& cfg) {
  validate(cfg, data.size());
  const FlatGrad full = full_gradient(net, data);
  RngStream rng = cfg.rng;
  double acc = 0.0;
  for (std::size_t m = 0; m < cfg.sample_count; ++m) {
    const auto idx = sample_batch(rng, data.size(), cfg.batch_size, cfg.sampling);
    const FlatGrad g = batch_gradient(net, gather(data, std::span<const std::size_t>(idx)));
    acc += squared_distance(g, full);
  }
  return cfg.alpha * cfg.alpha * (acc / static_cast<double>(cfg.sample_count));
}

/// Exact expected noise power for the configured sampling mode.
inline double expected_noise_power(double alpha, double C, std::size_t batch, std::size_t n,
                                   Sampling sampling) {
  const double base = alpha * alpha * C / static_cast<double>(batch);
  if (sampling == Sampling::with_replacement || n <= 1) return base;
  return base * static_cast<double>(n - batch) / static_cast<double>(n - 1);
}

template <typename T>
GradNoiseReport check_bound(const Network<T>& net, const Batch<T>& data, const GradNoiseConfig& cfg) {
  validate(cfg, data.size());
  GradNoiseReport r;
  r.full_grad_norm = std::sqrt(squared_norm(full_gradient(net, data)));
  r.C = deviation_constant(net, data);
  r.empirical_noise_power = empirical_noise_power(net, data, cfg);
  r.theoretical_bound = cfg.alpha * cfg.alpha * r.C / static_cast<double>(cfg.batch_size);
  r.expected_noise_power =
      expected_noise_power(cfg.alpha, r.C, cfg.batch_size, data.size(), cfg.sampling);
  r.tolerance = cfg.sampling == Sampling::with_replacement
                    ? 3.0 / std::sqrt(static_cast<double>(cfg.sample_count))
                    : 0.0;
  r.bound_satisfied = r.empirical_noise_power <= r.theoretical_bound * (1.0 + r.tolerance);
  r.relative_gap = r.theoretical_bound > 0.0
                       ? (r.theoretical_bound - r.empirical_noise_power) / r.theoretical_bound
                       : 0.0;
  return r;
}

}  // namespace lrnoise
