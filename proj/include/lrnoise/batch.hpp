#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "lrnoise/tensor.hpp"

namespace lrnoise {

/// Examples stacked along axis 0 plus their integer class labels.
template <typename T>
struct Batch {
  Tensor<T> inputs;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }

  /// Per-example input shape (inputs shape without the batch axis).
  Shape example_shape() const { return Shape(inputs.shape().begin() + 1, inputs.shape().end()); }

  void validate(std::size_t class_count) const {
    if (inputs.rank() < 2 || inputs.dim(0) != labels.size())
      throw std::invalid_argument("batch inputs/labels length mismatch");
    for (int y : labels)
      if (y < 0 || static_cast<std::size_t>(y) >= class_count)
        throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                    std::to_string(class_count) + ")");
  }
};

template <typename T>
Batch<T> gather(const Batch<T>& src, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("gather: no indices");
  const std::size_t stride = src.inputs.size() / src.size();
  Shape shape = src.inputs.shape();
  shape[0] = indices.size();
  std::vector<T> data(indices.size() * stride);
  std::vector<int> labels(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const std::size_t j = indices[i];
    if (j >= src.size()) throw std::out_of_range("gather: index out of range");
    std::copy_n(src.inputs.data() + j * stride, stride, data.begin() + i * stride);
    labels[i] = src.labels[j];
  }
  return {Tensor<T>(std::move(shape), std::move(data)), std::move(labels)};
}

template <typename T>
Batch<T> slice(const Batch<T>& src, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> idx(end - begin);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = begin + i;
  return gather(src, std::span<const std::size_t>(idx));
}

template <typename T>
Batch<T> concat(const Batch<T>& a, const Batch<T>& b) {
  if (a.example_shape() != b.example_shape())
    throw std::invalid_argument("concat: example shapes differ");
  Shape shape = a.inputs.shape();
  shape[0] = a.size() + b.size();
  std::vector<T> data(a.inputs.values().begin(), a.inputs.values().end());
  data.insert(data.end(), b.inputs.values().begin(), b.inputs.values().end());
  std::vector<int> labels = a.labels;
  labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  return {Tensor<T>(std::move(shape), std::move(data)), std::move(labels)};
}

}  // namespace lrnoise
