#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lrnoise/network.hpp"

namespace lrnoise {

enum class OptimizerKind { sgd, sgd_momentum, sgd_nesterov, adam, nadam, adamax };

inline constexpr std::array<std::string_view, 6> kOptimizerNames = {
    "sgd", "sgd_momentum", "sgd_nesterov", "adam", "nadam", "adamax"};

inline std::string_view to_string(OptimizerKind kind) {
  return kOptimizerNames[static_cast<std::size_t>(kind)];
}

inline std::string valid_optimizer_list() {
  std::string out;
  for (auto n : kOptimizerNames) {
    if (!out.empty()) out += ", ";
    out += n;
  }
  return out;
}

inline OptimizerKind optimizer_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kOptimizerNames.size(); ++i)
    if (kOptimizerNames[i] == name) return static_cast<OptimizerKind>(i);
  throw std::invalid_argument("unknown optimizer '" + std::string(name) +
                              "'; valid kinds: " + valid_optimizer_list());
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double alpha = 1e-2;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha))
      throw std::invalid_argument("learning rate must be positive");
    auto unit = [](double v) { return v >= 0.0 && v < 1.0; };
    if (!unit(momentum)) throw std::invalid_argument("momentum must be in [0, 1)");
    if (!unit(beta1) || !unit(beta2)) throw std::invalid_argument("betas must be in [0, 1)");
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  }
};

/// Per-parameter slot tensors: velocity for the SGD family, first moment and
/// second moment (or infinity norm for adamax) for the adaptive family.
template <typename T>
struct OptimizerState {
  std::uint64_t step_count = 0;
  std::map<std::string, std::vector<Tensor<T>>> slots;
};

namespace detail {

inline std::size_t slot_count(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::sgd: return 0;
    case OptimizerKind::sgd_momentum:
    case OptimizerKind::sgd_nesterov: return 1;
    default: return 2;
  }
}

/// Applies one update to `w`; `t` is the 1-based step used for bias correction.
template <typename T>
void update_tensor(const OptimizerConfig& cfg, std::vector<Tensor<T>>& slots, Tensor<T>& w,
                   const Tensor<T>& g, std::uint64_t t) {
  const T alpha = static_cast<T>(cfg.alpha);
  const std::size_t n = w.size();
  switch (cfg.kind) {
    case OptimizerKind::sgd:
      for (std::size_t i = 0; i < n; ++i) w[i] -= alpha * g[i];
      break;
    case OptimizerKind::sgd_momentum: {
      const T mu = static_cast<T>(cfg.momentum);
      auto& v = slots[0];
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = mu * v[i] + g[i];
        w[i] -= alpha * v[i];
      }
      break;
    }
    case OptimizerKind::sgd_nesterov: {
      const T mu = static_cast<T>(cfg.momentum);
      auto& v = slots[0];
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = mu * v[i] + g[i];
        w[i] -= alpha * (mu * v[i] + g[i]);
      }
      break;
    }
    case OptimizerKind::adam:
    case OptimizerKind::nadam: {
      const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
      const T eps = static_cast<T>(cfg.epsilon);
      const double td = static_cast<double>(t);
      const T c1 = static_cast<T>(1.0 - std::pow(cfg.beta1, td));
      const T c2 = static_cast<T>(1.0 - std::pow(cfg.beta2, td));
      auto& m = slots[0];
      auto& v = slots[1];
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (T{1} - b1) * g[i];
        v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
        const T m_hat = m[i] / c1;
        const T v_hat = v[i] / c2;
        // Nadam looks one step ahead: the bias-corrected momentum is decayed
        // once more and the current gradient is added back in.
        const T direction = cfg.kind == OptimizerKind::adam
                                ? m_hat
                                : b1 * m_hat + (T{1} - b1) * g[i] / c1;
        w[i] -= alpha * direction / (std::sqrt(v_hat) + eps);
      }
      break;
    }
    case OptimizerKind::adamax: {
      const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
      const T eps = static_cast<T>(cfg.epsilon);
      const T lr = static_cast<T>(cfg.alpha / (1.0 - std::pow(cfg.beta1, static_cast<double>(t))));
      auto& m = slots[0];
      auto& u = slots[1];
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (T{1} - b1) * g[i];
        u[i] = std::max(b2 * u[i], std::abs(g[i]));
        w[i] -= lr * m[i] / (u[i] + eps);
      }
      break;
    }
  }
}

template <typename T>
std::vector<Tensor<T>>& slots_for(const OptimizerConfig& cfg, OptimizerState<T>& state,
                                  const std::string& name, const Tensor<T>& w) {
  auto& slots = state.slots[name];
  if (slots.empty())
    slots.assign(slot_count(cfg.kind), Tensor<T>(w.shape()));
  for (const auto& s : slots) s.require_same_shape(w);
  return slots;
}

}  // namespace detail

/// One optimizer update over a named parameter set. `grads` must have
/// exactly the keys of `params` with matching shapes.
template <typename T>
void step(const OptimizerConfig& cfg, OptimizerState<T>& state, ParamMap<T>& params,
          const ParamMap<T>& grads) {
  cfg.validate();
  if (params.size() != grads.size())
    throw std::invalid_argument("optimizer: params and grads have different key sets");
  for (const auto& [name, w] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) throw std::invalid_argument("optimizer: no gradient for '" + name + "'");
    w.require_same_shape(it->second);
  }
  const std::uint64_t t = state.step_count + 1;
  for (auto& [name, w] : params)
    detail::update_tensor(cfg, detail::slots_for(cfg, state, name, w), w, grads.at(name), t);
  state.step_count = t;
}

/// Network overload: `grads` must cover exactly the trainable parameters.
template <typename T>
void step(const OptimizerConfig& cfg, OptimizerState<T>& state, Network<T>& net,
          const ParamMap<T>& grads) {
  cfg.validate();
  const auto names = net.trainable_names();
  if (names.size() != grads.size())
    throw std::invalid_argument("optimizer: gradient set does not match trainable parameters");
  for (const auto& name : names) {
    auto it = grads.find(name);
    if (it == grads.end()) throw std::invalid_argument("optimizer: no gradient for '" + name + "'");
    net.param(name).require_same_shape(it->second);
  }
  const std::uint64_t t = state.step_count + 1;
  for (const auto& name : names) {
    auto& w = net.param(name);
    detail::update_tensor(cfg, detail::slots_for(cfg, state, name, w), w, grads.at(name), t);
  }
  state.step_count = t;
}

}  // namespace lrnoise
