#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lrnoise/batch.hpp"
#include "lrnoise/init.hpp"
#include "lrnoise/kernels.hpp"
#include "lrnoise/layers.hpp"
#include "lrnoise/rng.hpp"
#include "lrnoise/tensor.hpp"

namespace lrnoise {

enum class Mode { train, eval };

template <typename T>
using ParamMap = std::map<std::string, Tensor<T>>;

/// Batch mean/variance observed per batchnorm layer during a train-mode pass.
template <typename T>
struct BatchStats {
  std::string layer_id;
  std::vector<T> mean, var;
};

template <typename T>
struct LossAndGrads {
  double loss = 0.0;
  ParamMap<T> grads;  // one entry per trainable parameter
  Tensor<T> logits;
  std::vector<BatchStats<T>> batch_stats;  // empty in eval mode
};

/// Numerically stable mean categorical cross-entropy over softmax(logits).
/// Writes d(loss)/d(logits) into `dlogits` when non-null.
template <typename T>
double softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& labels,
                             Tensor<T>* dlogits = nullptr) {
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.size() / n;
  if (labels.size() != n) throw std::invalid_argument("cross-entropy: label count mismatch");
  if (dlogits) *dlogits = Tensor<T>(logits.shape());
  double total = 0.0;
  std::vector<double> p(k);
  for (std::size_t i = 0; i < n; ++i) {
    const T* z = logits.data() + i * k;
    const std::size_t top = static_cast<std::size_t>(std::max_element(z, z + k) - z);
    const double zmax = z[top];
    double rest = 0.0;  // sum of exp(z_j - zmax) over j != top
    for (std::size_t j = 0; j < k; ++j) {
      p[j] = std::exp(static_cast<double>(z[j]) - zmax);
      if (j != top) rest += p[j];
    }
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= k) throw std::invalid_argument("cross-entropy: label out of range");
    total += (zmax - static_cast<double>(z[y])) + std::log1p(rest);
    if (dlogits) {
      const double denom = 1.0 + rest;
      T* d = dlogits->data() + i * k;
      for (std::size_t j = 0; j < k; ++j)
        d[j] = static_cast<T>((p[j] / denom - (j == y ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  return total / static_cast<double>(n);
}

/// Sequential layer graph with named parameter tensors ("<id>/weight",
/// "<id>/bias", "<id>/gamma", "<id>/beta", "<id>/running_mean",
/// "<id>/running_var"). Eval-mode methods are const and safe to call
/// concurrently; running statistics change only via update_running_stats.
template <typename T>
class Network {
 public:
  static constexpr T kBatchNormEps = T(1e-5);
  static constexpr T kBatchNormMomentum = T(0.9);

  Network() = default;
  Network(Shape input_shape, std::size_t class_count)
      : input_shape_(std::move(input_shape)), class_count_(class_count) {
    check_shape(input_shape_);
    if (class_count_ == 0) throw std::invalid_argument("class_count must be positive");
  }

  const Shape& input_shape() const noexcept { return input_shape_; }
  std::size_t class_count() const noexcept { return class_count_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const ParamMap<T>& params() const noexcept { return params_; }
  ParamMap<T>& params() noexcept { return params_; }

  const Tensor<T>& param(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter '" + name + "'");
    return it->second;
  }
  Tensor<T>& param(const std::string& name) {
    return const_cast<Tensor<T>&>(std::as_const(*this).param(name));
  }
  ParamRole role(const std::string& name) const { return roles_.at(name); }

  /// Trainable parameter names in lexicographic order.
  std::vector<std::string> trainable_names() const {
    std::vector<std::string> out;
    for (const auto& [name, role] : roles_)
      if (is_trainable(role)) out.push_back(name);
    return out;
  }

  std::size_t parameter_count(bool trainable_only = true) const {
    std::size_t total = 0;
    for (const auto& [name, t] : params_)
      if (!trainable_only || is_trainable(roles_.at(name))) total += t.size();
    return total;
  }

  /// Number of dense, convolution, and head layers (the "depth" of a ResNet).
  std::size_t weighted_layer_count() const {
    return static_cast<std::size_t>(
        std::count_if(layers_.begin(), layers_.end(), [](const auto& l) { return l.has_weights(); }));
  }

  Shape output_shape() const { return shapes_.empty() ? input_shape_ : shapes_.back(); }

  /// Appends a layer, checking it against the current output shape and
  /// allocating its parameters (zero weights, unit batchnorm scale).
  void add(LayerSpec spec) {
    if (spec.id.empty() || spec.id == "input") throw std::invalid_argument("invalid layer id '" + spec.id + "'");
    for (const auto& l : layers_)
      if (l.id == spec.id) throw std::invalid_argument("duplicate layer id '" + spec.id + "'");
    const Shape in = output_shape();
    Shape out;
    switch (spec.kind) {
      case LayerKind::dense:
      case LayerKind::softmax_head: {
        if (spec.in != shape_size(in))
          throw std::invalid_argument(spec.id + ": expects " + std::to_string(spec.in) +
                                      " input features, got " + shape_string(in));
        if (spec.out == 0) throw std::invalid_argument(spec.id + ": out must be positive");
        out = {spec.out};
        add_param(spec.id + "/weight", {spec.in, spec.out}, ParamRole::weight);
        add_param(spec.id + "/bias", {spec.out}, ParamRole::bias);
        break;
      }
      case LayerKind::conv2d_3x3: {
        if (in.size() != 3 || in[2] != spec.in)
          throw std::invalid_argument(spec.id + ": expects HWC input with " +
                                      std::to_string(spec.in) + " channels, got " + shape_string(in));
        if (spec.out == 0) throw std::invalid_argument(spec.id + ": out must be positive");
        if (spec.stride != 1 && spec.stride != 2)
          throw std::invalid_argument(spec.id + ": stride must be 1 or 2");
        out = {(in[0] - 1) / spec.stride + 1, (in[1] - 1) / spec.stride + 1, spec.out};
        add_param(spec.id + "/weight", {3, 3, spec.in, spec.out}, ParamRole::weight);
        add_param(spec.id + "/bias", {spec.out}, ParamRole::bias);
        break;
      }
      case LayerKind::relu:
        out = in;
        break;
      case LayerKind::batchnorm: {
        if (spec.in == 0) spec.in = spec.out = in.back();
        if (spec.in != in.back())
          throw std::invalid_argument(spec.id + ": channel count mismatch");
        out = in;
        add_param(spec.id + "/gamma", {spec.in}, ParamRole::bn_gamma, T{1});
        add_param(spec.id + "/beta", {spec.in}, ParamRole::bn_beta);
        add_param(spec.id + "/running_mean", {spec.in}, ParamRole::bn_running_mean);
        add_param(spec.id + "/running_var", {spec.in}, ParamRole::bn_running_var, T{1});
        break;
      }
      case LayerKind::global_avg_pool:
        if (in.size() != 3) throw std::invalid_argument(spec.id + ": expects HWC input");
        out = {in[2]};
        break;
      case LayerKind::residual_add: {
        const auto src = shape_of(spec.source);
        if (!src) throw std::invalid_argument(spec.id + ": unknown source '" + spec.source + "'");
        shortcut_geometry(*src, in, 1);  // throws on incompatible shapes
        out = in;
        break;
      }
    }
    layers_.push_back(std::move(spec));
    shapes_.push_back(std::move(out));
  }

  /// Glorot-uniform weights (each from its own sub-stream keyed by parameter
  /// name), zero biases and shifts, unit scales, fresh running statistics.
  void initialize(const RngStream& rng) {
    for (const auto& l : layers_) {
      if (l.has_weights()) {
        const std::string name = l.id + "/weight";
        auto& w = params_.at(name);
        const std::size_t fan_in = l.kind == LayerKind::conv2d_3x3 ? 9 * l.in : l.in;
        const std::size_t fan_out = l.kind == LayerKind::conv2d_3x3 ? 9 * l.out : l.out;
        auto sub = rng.derive(name);
        w = glorot_uniform_init<T>(sub, fan_in, fan_out, w.shape());
        w.set_name(name);
        params_.at(l.id + "/bias").fill(T{0});
      } else if (l.kind == LayerKind::batchnorm) {
        params_.at(l.id + "/gamma").fill(T{1});
        params_.at(l.id + "/beta").fill(T{0});
        params_.at(l.id + "/running_mean").fill(T{0});
        params_.at(l.id + "/running_var").fill(T{1});
      }
    }
  }

  /// Logits for a stacked input batch. Eval mode uses batchnorm running
  /// statistics, train mode uses the batch's own statistics (without
  /// updating the running values).
  Tensor<T> forward(const Tensor<T>& inputs, Mode mode = Mode::eval) const {
    Tape tape;
    run_forward(inputs, mode, tape);
    return std::move(tape.outputs.back());
  }

  /// Mean cross-entropy over the batch and its exact gradient with respect
  /// to every trainable parameter.
  LossAndGrads<T> loss_and_grads(const Batch<T>& batch, Mode mode = Mode::eval) const {
    if (batch.empty()) throw std::invalid_argument("loss_and_grads: empty batch");
    batch.validate(output_width());
    Tape tape;
    run_forward(batch.inputs, mode, tape);
    LossAndGrads<T> result;
    Tensor<T> dlogits;
    result.loss = softmax_cross_entropy(tape.outputs.back(), batch.labels, &dlogits);
    result.grads = backward(batch.inputs, tape, std::move(dlogits));
    result.logits = std::move(tape.outputs.back());
    if (mode == Mode::train)
      for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].kind == LayerKind::batchnorm)
          result.batch_stats.push_back({layers_[i].id, tape.bn[i].mean, tape.bn[i].var});
    return result;
  }

  /// running <- momentum * running + (1 - momentum) * batch.
  void update_running_stats(const std::vector<BatchStats<T>>& stats) {
    for (const auto& s : stats) {
      auto& rm = param(s.layer_id + "/running_mean");
      auto& rv = param(s.layer_id + "/running_var");
      for (std::size_t k = 0; k < rm.size(); ++k) {
        rm[k] = kBatchNormMomentum * rm[k] + (T{1} - kBatchNormMomentum) * s.mean[k];
        rv[k] = kBatchNormMomentum * rv[k] + (T{1} - kBatchNormMomentum) * s.var[k];
      }
    }
  }

  template <typename U>
  Network<U> cast() const {
    Network<U> out(input_shape_, class_count_);
    for (const auto& l : layers_) out.add(l);
    for (const auto& [name, t] : params_) out.param(name) = t.template cast<U>();
    return out;
  }

 private:
  struct Tape {
    std::vector<Tensor<T>> outputs;
    std::vector<kernels::BatchNormCache<T>> bn;
    Mode mode = Mode::eval;
  };

  std::size_t output_width() const { return shape_size(output_shape()); }

  void add_param(const std::string& name, Shape shape, ParamRole role, T fill = T{0}) {
    params_.emplace(name, Tensor<T>(std::move(shape), fill, name));
    roles_.emplace(name, role);
  }

  std::optional<Shape> shape_of(const std::string& id) const {
    if (id == "input") return input_shape_;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i].id == id) return shapes_[i];
    return std::nullopt;
  }

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i].id == id) return i;
    return layers_.size();  // "input"
  }

  static Shape as_hwc(const Shape& s) {
    if (s.size() == 3) return s;
    return {1, 1, shape_size(s)};
  }

  static kernels::ShortcutGeometry shortcut_geometry(const Shape& src_shape, const Shape& dst_shape,
                                                     std::size_t n) {
    const Shape s = as_hwc(src_shape), d = as_hwc(dst_shape);
    std::size_t stride = 0;
    for (std::size_t cand : {1u, 2u})
      if ((s[0] - 1) / cand + 1 == d[0] && (s[1] - 1) / cand + 1 == d[1]) {
        stride = cand;
        break;
      }
    if (stride == 0 || s[2] > d[2] || (src_shape.size() != dst_shape.size()) ||
        (src_shape.size() != 3 && src_shape != dst_shape))
      throw std::invalid_argument("residual shapes incompatible: " + shape_string(src_shape) +
                                  " -> " + shape_string(dst_shape));
    return {n, s[0], s[1], s[2], d[0], d[1], d[2], stride, (d[2] - s[2]) / 2};
  }

  void run_forward(const Tensor<T>& inputs, Mode mode, Tape& tape) const {
    if (layers_.empty()) throw std::logic_error("network has no layers");
    if (inputs.rank() != input_shape_.size() + 1 ||
        !std::equal(input_shape_.begin(), input_shape_.end(), inputs.shape().begin() + 1))
      throw std::invalid_argument("forward: input shape " + shape_string(inputs.shape()) +
                                  " does not match network input " + shape_string(input_shape_));
    const std::size_t n = inputs.dim(0);
    tape.mode = mode;
    tape.outputs.clear();
    tape.outputs.reserve(layers_.size());
    tape.bn.assign(layers_.size(), {});
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& l = layers_[i];
      const Tensor<T>& x = i == 0 ? inputs : tape.outputs[i - 1];
      Shape out_shape{n};
      out_shape.insert(out_shape.end(), shapes_[i].begin(), shapes_[i].end());
      Tensor<T> y(out_shape);
      switch (l.kind) {
        case LayerKind::dense:
        case LayerKind::softmax_head:
          kernels::dense_forward(x.data(), param(l.id + "/weight").data(),
                                 param(l.id + "/bias").data(), y.data(), n, l.in, l.out);
          break;
        case LayerKind::conv2d_3x3: {
          const auto g = kernels::conv_geometry(n, x.dim(1), x.dim(2), l.in, l.out, l.stride);
          kernels::conv3x3_forward(x.data(), param(l.id + "/weight").data(),
                                   param(l.id + "/bias").data(), y.data(), g);
          break;
        }
        case LayerKind::relu:
          for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] > T{0} ? x[k] : T{0};
          break;
        case LayerKind::batchnorm:
          kernels::batchnorm_forward(x.data(), y.data(), x.size() / l.in, l.in,
                                     param(l.id + "/gamma").data(), param(l.id + "/beta").data(),
                                     param(l.id + "/running_mean").data(),
                                     param(l.id + "/running_var").data(), kBatchNormEps,
                                     mode == Mode::train, tape.bn[i]);
          break;
        case LayerKind::global_avg_pool: {
          const std::size_t hw = x.dim(1) * x.dim(2), c = x.dim(3);
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t p = 0; p < hw; ++p)
              for (std::size_t k = 0; k < c; ++k) y[b * c + k] += x[(b * hw + p) * c + k];
          const T inv = T{1} / static_cast<T>(hw);
          for (auto& v : y.values()) v *= inv;
          break;
        }
        case LayerKind::residual_add: {
          std::copy(x.values().begin(), x.values().end(), y.data());
          const std::size_t src = index_of(l.source);
          const Tensor<T>& s = src == layers_.size() ? inputs : tape.outputs[src];
          const Shape& src_shape = src == layers_.size() ? input_shape_ : shapes_[src];
          kernels::shortcut_add(s.data(), y.data(), shortcut_geometry(src_shape, shapes_[i], n));
          break;
        }
      }
      tape.outputs.push_back(std::move(y));
    }
  }

  ParamMap<T> backward(const Tensor<T>& inputs, const Tape& tape, Tensor<T> dlogits) const {
    ParamMap<T> grads;
    for (const auto& [name, role] : roles_)
      if (is_trainable(role)) grads.emplace(name, Tensor<T>(params_.at(name).shape(), T{0}, name));
    const std::size_t n = inputs.dim(0);
    const std::size_t count = layers_.size();
    std::vector<Tensor<T>> d(count);  // gradient w.r.t. each layer's output
    d[count - 1] = std::move(dlogits);
    Tensor<T> d_input(inputs.shape());
    auto grad_of = [&](std::size_t j) -> Tensor<T>& {
      if (j == count) return d_input;
      if (d[j].empty()) d[j] = Tensor<T>(tape.outputs[j].shape());
      return d[j];
    };
    for (std::size_t i = count; i-- > 0;) {
      const LayerSpec& l = layers_[i];
      if (d[i].empty()) continue;  // output unused downstream
      const Tensor<T>& g = d[i];
      const Tensor<T>& x = i == 0 ? inputs : tape.outputs[i - 1];
      Tensor<T>& dx = grad_of(i == 0 ? count : i - 1);
      switch (l.kind) {
        case LayerKind::dense:
        case LayerKind::softmax_head:
          kernels::dense_backward(x.data(), param(l.id + "/weight").data(), g.data(), dx.data(),
                                  grads.at(l.id + "/weight").data(), grads.at(l.id + "/bias").data(),
                                  n, l.in, l.out);
          break;
        case LayerKind::conv2d_3x3: {
          const auto geo = kernels::conv_geometry(n, x.dim(1), x.dim(2), l.in, l.out, l.stride);
          kernels::conv3x3_backward(x.data(), param(l.id + "/weight").data(), g.data(), dx.data(),
                                    grads.at(l.id + "/weight").data(),
                                    grads.at(l.id + "/bias").data(), geo);
          break;
        }
        case LayerKind::relu:
          for (std::size_t k = 0; k < x.size(); ++k)
            if (x[k] > T{0}) dx[k] += g[k];
          break;
        case LayerKind::batchnorm:
          kernels::batchnorm_backward(g.data(), dx.data(), grads.at(l.id + "/gamma").data(),
                                      grads.at(l.id + "/beta").data(), x.size() / l.in, l.in,
                                      param(l.id + "/gamma").data(), tape.mode == Mode::train,
                                      tape.bn[i]);
          break;
        case LayerKind::global_avg_pool: {
          const std::size_t hw = x.dim(1) * x.dim(2), c = x.dim(3);
          const T inv = T{1} / static_cast<T>(hw);
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t p = 0; p < hw; ++p)
              for (std::size_t k = 0; k < c; ++k) dx[(b * hw + p) * c + k] += g[b * c + k] * inv;
          break;
        }
        case LayerKind::residual_add: {
          dx += g;
          const std::size_t src = index_of(l.source);
          const Shape& src_shape = src == count ? input_shape_ : shapes_[src];
          kernels::shortcut_backward(g.data(), grad_of(src).data(),
                                     shortcut_geometry(src_shape, shapes_[i], n));
          break;
        }
      }
      d[i] = Tensor<T>();  // release
    }
    return grads;
  }

  Shape input_shape_;
  std::size_t class_count_ = 0;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;  // per-example output shape of each layer
  ParamMap<T> params_;
  std::map<std::string, ParamRole> roles_;
};

/// Multi-layer perceptron: dense+relu per hidden width, then a softmax head.
template <typename T = float>
Network<T> build_mlp(std::size_t input_features, const std::vector<std::size_t>& widths,
                     std::size_t class_count) {
  Network<T> net({input_features}, class_count);
  std::size_t prev = input_features;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string id = "dense" + std::to_string(i + 1);
    net.add(dense_layer(id, prev, widths[i]));
    net.add(relu_layer(id + "_relu"));
    prev = widths[i];
  }
  net.add(softmax_head("head", prev, class_count));
  return net;
}

/// CIFAR-style residual network of depth 6n + 2: a 3x3 stem, three stages of
/// n basic blocks with 16/32/64 channels (stride-2 at the start of stages 2
/// and 3, zero-padded identity shortcuts), global average pooling and a
/// linear head. Parameters are allocated but not initialized.
template <typename T = float>
Network<T> build_resnet(std::size_t n, std::size_t class_count, Shape input_shape = {32, 32, 3}) {
  if (n == 0) throw std::invalid_argument("build_resnet: n must be >= 1");
  if (input_shape.size() != 3) throw std::invalid_argument("build_resnet: input must be HWC");
  Network<T> net(input_shape, class_count);
  net.add(conv3x3_layer("stem_conv", input_shape[2], 16));
  net.add(batchnorm_layer("stem_bn", 16));
  net.add(relu_layer("stem_relu"));
  std::string prev = "stem_relu";
  std::size_t channels = 16;
  const std::size_t widths[] = {16, 32, 64};
  for (std::size_t stage = 0; stage < 3; ++stage) {
    for (std::size_t block = 0; block < n; ++block) {
      const std::string id = "s" + std::to_string(stage + 1) + "b" + std::to_string(block + 1);
      const std::size_t stride = (stage > 0 && block == 0) ? 2 : 1;
      net.add(conv3x3_layer(id + "_conv1", channels, widths[stage], stride));
      net.add(batchnorm_layer(id + "_bn1", widths[stage]));
      net.add(relu_layer(id + "_relu1"));
      net.add(conv3x3_layer(id + "_conv2", widths[stage], widths[stage]));
      net.add(batchnorm_layer(id + "_bn2", widths[stage]));
      net.add(residual_add_layer(id + "_add", prev));
      net.add(relu_layer(id + "_out"));
      prev = id + "_out";
      channels = widths[stage];
    }
  }
  net.add(global_avg_pool_layer("pool"));
  net.add(softmax_head("head", channels, class_count));
  return net;
}

}  // namespace lrnoise
