#pragma once

#include <cstddef>
#include <stdexcept>

#include "lrnoise/batch.hpp"
#include "lrnoise/rng.hpp"

namespace lrnoise {

struct AugmentPolicy {
  double flip_prob = 0.5;
  std::size_t max_shift = 4;  // pixels, each axis
};

namespace detail {

inline void require_images(const Shape& s) {
  if (s.size() != 4) throw std::invalid_argument("augment: expects NHWC image batches, got " + shape_string(s));
}

/// out(y, x) = in(y + dy, x' + dx) with x' mirrored when `flip`; zero outside.
template <typename T>
void transform_image(const T* in, T* out, std::size_t h, std::size_t w, std::size_t c, bool flip,
                     std::ptrdiff_t dy, std::ptrdiff_t dx) {
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      T* o = out + (y * w + x) * c;
      const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y) + dy;
      const std::ptrdiff_t sx0 = static_cast<std::ptrdiff_t>(flip ? w - 1 - x : x) + dx;
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h) || sx0 < 0 || sx0 >= static_cast<std::ptrdiff_t>(w)) {
        for (std::size_t k = 0; k < c; ++k) o[k] = T{0};
        continue;
      }
      const T* s = in + (static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx0)) * c;
      for (std::size_t k = 0; k < c; ++k) o[k] = s[k];
    }
}

}  // namespace detail

template <typename T>
Tensor<T> flip_horizontal(const Tensor<T>& images) {
  detail::require_images(images.shape());
  Tensor<T> out(images.shape());
  const std::size_t h = images.dim(1), w = images.dim(2), c = images.dim(3), img = h * w * c;
  for (std::size_t i = 0; i < images.dim(0); ++i)
    detail::transform_image(images.data() + i * img, out.data() + i * img, h, w, c, true, 0, 0);
  return out;
}

/// Random horizontal flip and random translation (zero padding then crop),
/// drawn independently per example. Labels are untouched.
template <typename T>
Batch<T> augment(const Batch<T>& batch, RngStream& rng, const AugmentPolicy& policy = {}) {
  detail::require_images(batch.inputs.shape());
  Batch<T> out{Tensor<T>(batch.inputs.shape()), batch.labels};
  const std::size_t h = batch.inputs.dim(1), w = batch.inputs.dim(2), c = batch.inputs.dim(3);
  const std::size_t img = h * w * c;
  const auto span = static_cast<std::ptrdiff_t>(policy.max_shift);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const bool flip = policy.flip_prob > 0.0 && rng.uniform() < policy.flip_prob;
    std::ptrdiff_t dy = 0, dx = 0;
    if (span > 0) {
      dy = static_cast<std::ptrdiff_t>(rng.below(2 * policy.max_shift + 1)) - span;
      dx = static_cast<std::ptrdiff_t>(rng.below(2 * policy.max_shift + 1)) - span;
    }
    detail::transform_image(batch.inputs.data() + i * img, out.inputs.data() + i * img, h, w, c,
                            flip, dy, dx);
  }
  return out;
}

}  // namespace lrnoise
