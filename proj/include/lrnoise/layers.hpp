#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace lrnoise {

enum class LayerKind {
  dense,
  conv2d_3x3,
  relu,
  batchnorm,
  global_avg_pool,
  residual_add,
  softmax_head,
};

inline constexpr std::array<std::string_view, 7> kLayerKindNames = {
    "dense", "conv2d_3x3", "relu", "batchnorm", "global_avg_pool", "residual_add",
    "softmax_head"};

inline std::string_view to_string(LayerKind kind) {
  return kLayerKindNames[static_cast<std::size_t>(kind)];
}

inline LayerKind layer_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kLayerKindNames.size(); ++i)
    if (kLayerKindNames[i] == name) return static_cast<LayerKind>(i);
  throw std::invalid_argument("unknown layer kind '" + std::string(name) + "'");
}

/// One node of a sequential layer graph. Each layer consumes the output of
/// the layer before it; residual_add also consumes the output of `source`
/// (an earlier layer id, or "input" for the network input).
///
/// Field use by kind:
///   dense, softmax_head  in/out = features (input is flattened)
///   conv2d_3x3           in/out = channels, stride in {1, 2}, padding 1
///   batchnorm            in = channels (last axis)
///   residual_add         source
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  std::string id;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t stride = 1;
  std::string source;

  bool has_weights() const noexcept {
    return kind == LayerKind::dense || kind == LayerKind::softmax_head ||
           kind == LayerKind::conv2d_3x3;
  }
  bool operator==(const LayerSpec&) const = default;
};

inline LayerSpec dense_layer(std::string id, std::size_t in, std::size_t out) {
  return {LayerKind::dense, std::move(id), in, out, 1, {}};
}
/// Final linear layer producing class logits; softmax lives in the loss.
inline LayerSpec softmax_head(std::string id, std::size_t in, std::size_t classes) {
  return {LayerKind::softmax_head, std::move(id), in, classes, 1, {}};
}
inline LayerSpec conv3x3_layer(std::string id, std::size_t in_channels,
                               std::size_t out_channels, std::size_t stride = 1) {
  return {LayerKind::conv2d_3x3, std::move(id), in_channels, out_channels, stride, {}};
}
inline LayerSpec relu_layer(std::string id) { return {LayerKind::relu, std::move(id), 0, 0, 1, {}}; }
inline LayerSpec batchnorm_layer(std::string id, std::size_t channels) {
  return {LayerKind::batchnorm, std::move(id), channels, channels, 1, {}};
}
inline LayerSpec global_avg_pool_layer(std::string id) {
  return {LayerKind::global_avg_pool, std::move(id), 0, 0, 1, {}};
}
inline LayerSpec residual_add_layer(std::string id, std::string source) {
  return {LayerKind::residual_add, std::move(id), 0, 0, 1, std::move(source)};
}

/// What a parameter tensor is, for optimizer and noise-injection selection.
enum class ParamRole { weight, bias, bn_gamma, bn_beta, bn_running_mean, bn_running_var };

inline bool is_trainable(ParamRole role) noexcept {
  return role != ParamRole::bn_running_mean && role != ParamRole::bn_running_var;
}

}  // namespace lrnoise
