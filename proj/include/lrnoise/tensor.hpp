#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstring>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lrnoise {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline void check_shape(const Shape& shape) {
  if (shape.empty())
    throw std::invalid_argument("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0)
      throw std::invalid_argument("tensor dimensions must be positive, got " +
                                  shape_string(shape));
}

/// Dense row-major array. A default-constructed tensor is an empty
/// placeholder (no shape, no data); every other tensor satisfies
/// size() == product(shape()).
template <typename T>
class Tensor {
 public:
  static_assert(std::is_floating_point_v<T>);
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}, std::string name = {})
      : shape_(std::move(shape)), name_(std::move(name)) {
    check_shape(shape_);
    data_.assign(shape_size(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data, std::string name = {})
      : shape_(std::move(shape)), data_(std::move(data)), name_(std::move(name)) {
    check_shape(shape_);
    if (data_.size() != shape_size(shape_))
      throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  const std::string& name() const noexcept { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }

  /// Same data viewed under a different shape of equal element count.
  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_, name_);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out), name_);
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](T v) { return std::isfinite(v); });
  }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other);
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator*=(T scale) {
    for (auto& v : data_) v *= scale;
    return *this;
  }

  void require_same_shape(const Tensor& other) const {
    if (shape_ != other.shape_)
      throw std::invalid_argument("shape mismatch: " + shape_string(shape_) + " vs " +
                                  shape_string(other.shape_));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
  std::string name_;
};

/// Shape and raw bytes identical. Distinguishes +0/-0 and NaN payloads.
template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0);
}

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
  a += b;
  return a;
}

}  // namespace lrnoise
