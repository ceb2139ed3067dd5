#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lrnoise/rng.hpp"
#include "lrnoise/tensor.hpp"

namespace lrnoise {

template <typename T>
double tensor_mean(const Tensor<T>& t) {
  if (t.size() == 0) throw std::invalid_argument("tensor_mean: empty tensor");
  double sum = 0.0;
  for (T v : t.values()) sum += static_cast<double>(v);
  return sum / static_cast<double>(t.size());
}

/// Population standard deviation (divides by the element count). Two-pass
/// in double precision regardless of T.
template <typename T>
double tensor_std(const Tensor<T>& t) {
  if (t.size() == 0) throw std::invalid_argument("tensor_std: empty tensor");
  const double mean = tensor_mean(t);
  double ss = 0.0;
  for (T v : t.values()) {
    const double d = static_cast<double>(v) - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(t.size()));
}

/// i.i.d. N(mean, sigma^2) entries. sigma == 0 returns the constant tensor
/// without consuming the stream.
template <typename T = float>
Tensor<T> gaussian_sample(RngStream& rng, double mean, double sigma, Shape shape) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_sample: sigma must be >= 0");
  Tensor<T> out(std::move(shape), static_cast<T>(mean));
  if (sigma == 0.0) return out;
  for (auto& v : out.values()) v = static_cast<T>(mean + sigma * rng.normal());
  return out;
}

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  if (fan_in == 0 || fan_out == 0)
    throw std::invalid_argument("glorot_uniform_init: fan_in and fan_out must be >= 1");
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Entries uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out)).
template <typename T = float>
Tensor<T> glorot_uniform_init(RngStream& rng, std::size_t fan_in, std::size_t fan_out,
                              Shape shape) {
  const double limit = glorot_limit(fan_in, fan_out);
  Tensor<T> out(std::move(shape));
  // Largest representable T not above L; rounding to float may overshoot.
  T hi = static_cast<T>(limit);
  if (static_cast<double>(hi) > limit) hi = std::nextafter(hi, T{0});
  for (auto& v : out.values())
    v = std::clamp(static_cast<T>(rng.uniform(-limit, limit)), -hi, hi);
  return out;
}

}  // namespace lrnoise
