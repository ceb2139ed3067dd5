#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "lrnoise/batch.hpp"
#include "lrnoise/network.hpp"

namespace lrnoise {

/// Index of the largest entry in each row; ties go to the lowest index.
template <typename T>
std::vector<std::size_t> argmax_rows(const Tensor<T>& logits) {
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.size() / n;
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = logits.data() + i * k;
    out[i] = static_cast<std::size_t>(std::max_element(row, row + k) - row);
  }
  return out;
}

template <typename T>
std::size_t count_correct(const Tensor<T>& logits, const std::vector<int>& labels) {
  const auto pred = argmax_rows(logits);
  if (pred.size() != labels.size()) throw std::invalid_argument("label count mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    hits += pred[i] == static_cast<std::size_t>(labels[i]);
  return hits;
}

template <typename T>
double accuracy_from_logits(const Tensor<T>& logits, const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("accuracy: empty data");
  return static_cast<double>(count_correct(logits, labels)) / static_cast<double>(labels.size());
}

/// Eval-mode classification accuracy over `data`, evaluated in chunks.
template <typename T>
double accuracy(const Network<T>& net, const Batch<T>& data, std::size_t chunk = 512) {
  if (data.empty()) throw std::invalid_argument("accuracy: empty data");
  if (data.size() <= chunk) return accuracy_from_logits(net.forward(data.inputs), data.labels);
  std::size_t hits = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += chunk) {
    const Batch<T> part = slice(data, begin, std::min(data.size(), begin + chunk));
    hits += count_correct(net.forward(part.inputs), part.labels);
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

}  // namespace lrnoise
