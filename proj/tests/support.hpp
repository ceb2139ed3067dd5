#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lrnoise/lrnoise.hpp"

namespace lrnoise::testing {

template <typename T>
Batch<T> random_batch(std::size_t n, const Shape& example, std::size_t classes, std::uint64_t seed) {
  RngStream rng(seed, 99);
  Shape shape{n};
  shape.insert(shape.end(), example.begin(), example.end());
  Batch<T> b{Tensor<T>(shape), std::vector<int>(n)};
  for (auto& v : b.inputs.values()) v = static_cast<T>(rng.normal());
  for (auto& y : b.labels) y = static_cast<int>(rng.below(classes));
  return b;
}

template <typename T>
Network<T> initialized(Network<T> net, std::uint64_t seed) {
  net.initialize(RngStream(seed));
  return net;
}

/// Gives batchnorm layers non-trivial scale, shift and running statistics
/// so that eval-mode gradients exercise every term.
template <typename T>
void randomize_batchnorm(Network<T>& net, std::uint64_t seed) {
  RngStream rng(seed, 5);
  for (auto& [name, t] : net.params()) {
    const auto role = net.role(name);
    for (auto& v : t.values()) {
      if (role == ParamRole::bn_gamma) v = static_cast<T>(rng.uniform(0.5, 1.5));
      if (role == ParamRole::bn_beta || role == ParamRole::bn_running_mean)
        v = static_cast<T>(rng.uniform(-0.3, 0.3));
      if (role == ParamRole::bn_running_var) v = static_cast<T>(rng.uniform(0.5, 2.0));
    }
  }
}

struct GradProbe {
  std::string name;
  std::size_t index;
  double analytic;
  double numeric;
  double rel_error;
};

/// Central finite differences on `count` random trainable coordinates.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline std::vector<GradProbe> finite_difference_check(const Network<double>& net,
                                                      const Batch<double>& batch, Mode mode,
                                                      std::size_t count, std::uint64_t seed,
                                                      double h = 1e-5, double floor = 1e-6) {
  const auto grads = net.loss_and_grads(batch, mode).grads;
  const auto names = net.trainable_names();
  RngStream rng(seed, 17);
  std::vector<GradProbe> out;
  Network<double> probe = net;
  for (std::size_t k = 0; k < count; ++k) {
    const std::string& name = names[rng.below(names.size())];
    auto& w = probe.param(name);
    const std::size_t i = rng.below(w.size());
    const double saved = w[i];
    w[i] = saved + h;
    const double up = probe.loss_and_grads(batch, mode).loss;
    w[i] = saved - h;
    const double down = probe.loss_and_grads(batch, mode).loss;
    w[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double analytic = grads.at(name)[i];
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    out.push_back({name, i, analytic, numeric, std::abs(analytic - numeric) / denom});
  }
  return out;
}

inline double max_rel_error(const std::vector<GradProbe>& probes) {
  double m = 0.0;
  for (const auto& p : probes) m = std::max(m, p.rel_error);
  return m;
}

/// Small convolutional residual network (under 1k parameters) with both an
/// identity and a strided, channel-padded shortcut.
template <typename T>
Network<T> tiny_residual_net(std::size_t classes = 3) {
  Network<T> net({4, 4, 2}, classes);
  net.add(conv3x3_layer("c1", 2, 4));
  net.add(batchnorm_layer("bn1", 4));
  net.add(relu_layer("r1"));
  net.add(conv3x3_layer("c2", 4, 4));
  net.add(batchnorm_layer("bn2", 4));
  net.add(residual_add_layer("add1", "r1"));
  net.add(relu_layer("r2"));
  net.add(conv3x3_layer("c3", 4, 6, 2));
  net.add(batchnorm_layer("bn3", 6));
  net.add(residual_add_layer("add2", "r2"));
  net.add(relu_layer("r3"));
  net.add(global_avg_pool_layer("pool"));
  net.add(softmax_head("head", 6, classes));
  return net;
}

}  // namespace lrnoise::testing
