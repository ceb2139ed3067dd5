#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace lrnoise;
using namespace lrnoise::testing;

namespace {

Network<double> identity_head(std::size_t n) {
  Network<double> net({n}, n);
  net.add(softmax_head("head", n, n));
  auto& w = net.param("head/weight");
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
  return net;
}

Tensor<double> row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor<double>({1, n}, std::move(v));
}

}  // namespace

TEST(Forward, IdentityDense) {
  const auto net = identity_head(3);
  const auto y = net.forward(row({1, 2, 3}));
  EXPECT_EQ(y.shape(), (Shape{1, 3}));
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], 2.0);
  EXPECT_EQ(y[2], 3.0);
}

TEST(Forward, DenseWithBias) {
  Network<double> net({2}, 1);
  net.add(softmax_head("head", 2, 1));
  net.param("head/weight") = Tensor<double>({2, 1}, std::vector<double>{2.0, -1.0});
  net.param("head/bias")[0] = 0.5;
  EXPECT_DOUBLE_EQ(net.forward(row({3, 4}))[0], 2.0 * 3 - 4 + 0.5);
}

TEST(Forward, Relu) {
  Network<double> net({3}, 3);
  net.add(dense_layer("d", 3, 3));
  net.add(relu_layer("r"));
  auto& w = net.param("d/weight");
  for (std::size_t i = 0; i < 3; ++i) w[i * 3 + i] = 1.0;
  const auto y = net.forward(row({-1, 2, -3}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 2.0);
  EXPECT_EQ(y[2], 0.0);
}

TEST(Forward, DuplicateRowsGiveEqualOutputs) {
  const auto net = initialized(build_mlp<float>(5, {8, 8}, 4), 3);
  auto b = random_batch<float>(1, {5}, 4, 1);
  const auto two = concat(b, b);
  const auto y = net.forward(two.inputs);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(y[j], y[4 + j]);
}

TEST(Forward, EvalIsIdempotent) {
  auto net = initialized(tiny_residual_net<float>(), 2);
  randomize_batchnorm(net, 2);
  const auto b = random_batch<float>(6, {4, 4, 2}, 3, 4);
  EXPECT_TRUE(bitwise_equal(net.forward(b.inputs), net.forward(b.inputs)));
}

TEST(Forward, RejectsWrongInputShape) {
  const auto net = initialized(build_mlp<float>(5, {4}, 2), 1);
  EXPECT_THROW(net.forward(Tensor<float>({2, 6})), std::invalid_argument);
  EXPECT_THROW(net.forward(Tensor<float>({5})), std::invalid_argument);
}

TEST(Forward, PaddedStridedShortcut) {
  // Zero convolution, so the block output is the shortcut alone: channels
  // padded by one on each side and every second pixel kept.
  Network<double> net({4, 4, 2}, 4);
  net.add(conv3x3_layer("conv", 2, 4, 2));
  net.add(residual_add_layer("add", "input"));
  Tensor<double> x({1, 4, 4, 2});
  std::iota(x.values().begin(), x.values().end(), 1.0);
  const auto y = net.forward(x);
  ASSERT_EQ(y.shape(), (Shape{1, 2, 2, 4}));
  for (std::size_t oy = 0; oy < 2; ++oy)
    for (std::size_t ox = 0; ox < 2; ++ox) {
      const double* out = y.data() + (oy * 2 + ox) * 4;
      const double* in = x.data() + ((2 * oy) * 4 + 2 * ox) * 2;
      EXPECT_EQ(out[0], 0.0);
      EXPECT_EQ(out[1], in[0]);
      EXPECT_EQ(out[2], in[1]);
      EXPECT_EQ(out[3], 0.0);
    }
}

TEST(Forward, TrainModeBatchnormNormalizes) {
  Network<double> net({3}, 3);
  net.add(batchnorm_layer("bn", 3));
  const auto b = random_batch<double>(64, {3}, 3, 8);
  const auto y = net.forward(b.inputs, Mode::train);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0, v = 0;
    for (std::size_t i = 0; i < 64; ++i) m += y[i * 3 + c];
    m /= 64;
    for (std::size_t i = 0; i < 64; ++i) v += (y[i * 3 + c] - m) * (y[i * 3 + c] - m);
    EXPECT_NEAR(m, 0.0, 1e-12);
    EXPECT_NEAR(v / 64, 1.0, 1e-3);
  }
}

TEST(Forward, RunningStatsUpdate) {
  Network<double> net({2}, 2);
  net.add(batchnorm_layer("bn", 2));
  net.add(softmax_head("head", 2, 2));
  Batch<double> b{Tensor<double>({2, 2}, std::vector<double>{1, 10, 3, 10}), {0, 1}};
  const auto lg = net.loss_and_grads(b, Mode::train);
  ASSERT_EQ(lg.batch_stats.size(), 1u);
  net.update_running_stats(lg.batch_stats);
  const auto& rm = net.param("bn/running_mean");
  const auto& rv = net.param("bn/running_var");
  EXPECT_NEAR(rm[0], 0.1 * 2.0, 1e-15);
  EXPECT_NEAR(rm[1], 0.1 * 10.0, 1e-15);
  EXPECT_NEAR(rv[0], 0.9 + 0.1 * 1.0, 1e-15);  // biased variance of {1, 3}
  EXPECT_NEAR(rv[1], 0.9, 1e-15);
  EXPECT_TRUE(net.loss_and_grads(b, Mode::eval).batch_stats.empty());
}

TEST(Loss, UniformLogitsGiveLogK) {
  Tensor<double> z({2, 10}, 0.0);
  EXPECT_NEAR(softmax_cross_entropy(z, {3, 7}), std::log(10.0), 1e-15);
}

TEST(Loss, SaturatedCorrectLogitIsNearZero) {
  Tensor<double> z({1, 2}, std::vector<double>{100.0, 0.0});
  EXPECT_LT(softmax_cross_entropy(z, {0}), 1e-8);
  EXPECT_NEAR(softmax_cross_entropy(z, {1}), 100.0, 1e-12);
}

TEST(Loss, HugeLogitsStayFinite) {
  Tensor<float> z({1, 3}, std::vector<float>{1e30f, -1e30f, 0.0f});
  const double loss = softmax_cross_entropy(z, {1});
  EXPECT_TRUE(std::isfinite(loss));
}

TEST(Loss, GradientIsSoftmaxMinusOneHot) {
  Tensor<double> z({1, 3}, std::vector<double>{0.0, std::log(2.0), std::log(3.0)});
  Tensor<double> d;
  softmax_cross_entropy(z, {2}, &d);
  EXPECT_NEAR(d[0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(d[1], 2.0 / 6, 1e-15);
  EXPECT_NEAR(d[2], 3.0 / 6 - 1.0, 1e-15);
}

TEST(Loss, LabelValidation) {
  const auto net = initialized(build_mlp<float>(2, {3}, 2), 1);
  Batch<float> b{Tensor<float>({1, 2}), {2}};
  EXPECT_THROW(net.loss_and_grads(b), std::invalid_argument);
  Batch<float> empty{Tensor<float>(), {}};
  EXPECT_THROW(net.loss_and_grads(empty), std::invalid_argument);
}

TEST(Loss, InvariantToBatchOrder) {
  const auto net = initialized(build_mlp<double>(6, {10}, 3), 5);
  const auto b = random_batch<double>(20, {6}, 3, 6);
  std::vector<std::size_t> perm(20);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  RngStream r(1);
  for (std::size_t i = 20; i-- > 1;) std::swap(perm[i], perm[r.below(i + 1)]);
  const auto shuffled = gather(b, std::span<const std::size_t>(perm));
  const auto a = net.loss_and_grads(b), s = net.loss_and_grads(shuffled);
  EXPECT_NEAR(a.loss, s.loss, 1e-14);
  for (const auto& [name, g] : a.grads)
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], s.grads.at(name)[i], 1e-14);
}

TEST(Gradient, MlpFiniteDifference) {
  const auto net = initialized(build_mlp<double>(7, {9, 5}, 4), 11);
  const auto b = random_batch<double>(8, {7}, 4, 12);
  const auto probes = finite_difference_check(net, b, Mode::eval, 80, 1);
  EXPECT_LT(max_rel_error(probes), 1e-5);
}

TEST(Gradient, ResidualNetEvalModeFiniteDifference) {
  auto net = initialized(tiny_residual_net<double>(), 21);
  randomize_batchnorm(net, 22);
  const auto b = random_batch<double>(5, {4, 4, 2}, 3, 23);
  const auto probes = finite_difference_check(net, b, Mode::eval, 120, 2);
  EXPECT_LT(max_rel_error(probes), 1e-5);
}

TEST(Gradient, ResidualNetTrainModeFiniteDifference) {
  auto net = initialized(tiny_residual_net<double>(), 31);
  randomize_batchnorm(net, 32);
  const auto b = random_batch<double>(6, {4, 4, 2}, 3, 33);
  const auto probes = finite_difference_check(net, b, Mode::train, 120, 3);
  EXPECT_LT(max_rel_error(probes), 1e-4);
}

TEST(Gradient, ResnetBuilderFiniteDifference) {
  auto net = initialized(build_resnet<double>(1, 3, {6, 6, 2}), 41);
  randomize_batchnorm(net, 42);
  const auto b = random_batch<double>(3, {6, 6, 2}, 3, 43);
  const auto probes = finite_difference_check(net, b, Mode::train, 60, 4);
  EXPECT_LT(max_rel_error(probes), 1e-4);
}

TEST(Gradient, CoversExactlyTrainableParams) {
  const auto net = initialized(tiny_residual_net<float>(), 1);
  const auto b = random_batch<float>(2, {4, 4, 2}, 3, 1);
  const auto grads = net.loss_and_grads(b).grads;
  std::vector<std::string> keys;
  for (const auto& [k, g] : grads) {
    keys.push_back(k);
    EXPECT_EQ(g.shape(), net.param(k).shape());
  }
  EXPECT_EQ(keys, net.trainable_names());
  EXPECT_EQ(grads.count("bn1/running_mean"), 0u);
}

TEST(Builder, ResnetDepths) {
  EXPECT_EQ(build_resnet<float>(1, 10).weighted_layer_count(), 8u);
  EXPECT_EQ(build_resnet<float>(3, 10).weighted_layer_count(), 20u);
  EXPECT_EQ(build_resnet<float>(5, 10).weighted_layer_count(), 32u);
  EXPECT_EQ(build_resnet<float>(9, 10).weighted_layer_count(), 56u);
  EXPECT_EQ(build_resnet<float>(3, 10).output_shape(), (Shape{10}));
  EXPECT_THROW(build_resnet<float>(0, 10), std::invalid_argument);
}

TEST(Builder, Resnet20ParameterCount) {
  // Option-A ResNet-20 for CIFAR-10 has about 0.27M parameters.
  const auto n = build_resnet<float>(3, 10).parameter_count();
  EXPECT_GT(n, 260000u);
  EXPECT_LT(n, 280000u);
}

TEST(Builder, RejectsInconsistentLayers) {
  Network<float> net({4}, 2);
  EXPECT_THROW(net.add(dense_layer("d", 5, 3)), std::invalid_argument);
  net.add(dense_layer("d", 4, 3));
  EXPECT_THROW(net.add(relu_layer("d")), std::invalid_argument);
  EXPECT_THROW(net.add(residual_add_layer("a", "missing")), std::invalid_argument);
  EXPECT_THROW(net.add(conv3x3_layer("c", 3, 4)), std::invalid_argument);
  EXPECT_THROW(Network<float>({4}, 0), std::invalid_argument);
}

TEST(Builder, InitializeIsDeterministicAndResetsState) {
  auto a = build_resnet<float>(1, 4, {8, 8, 1});
  auto b = a;
  a.initialize(RngStream(5));
  b.initialize(RngStream(5));
  for (const auto& [name, t] : a.params()) EXPECT_TRUE(bitwise_equal(t, b.param(name))) << name;
  EXPECT_EQ(a.param("stem_bn/running_var")[0], 1.0f);
  EXPECT_EQ(a.param("stem_bn/gamma")[0], 1.0f);
  EXPECT_EQ(a.param("head/bias")[0], 0.0f);
  b.initialize(RngStream(6));
  EXPECT_FALSE(bitwise_equal(a.param("head/weight"), b.param("head/weight")));
}

TEST(Builder, CastPreservesValues) {
  const auto net = initialized(tiny_residual_net<float>(), 9);
  const auto back = net.cast<double>().cast<float>();
  for (const auto& [name, t] : net.params()) EXPECT_TRUE(bitwise_equal(t, back.param(name)));
}

TEST(Metrics, AccuracyCases) {
  Tensor<float> z({4, 2}, std::vector<float>{1, 0, 0, 1, 1, 0, 0, 1});
  EXPECT_EQ(accuracy_from_logits(z, {0, 1, 0, 1}), 1.0);
  EXPECT_EQ(accuracy_from_logits(z, {1, 0, 1, 0}), 0.0);
  EXPECT_EQ(accuracy_from_logits(z, {0, 1, 0, 0}), 0.75);
  EXPECT_THROW(accuracy_from_logits(z, {0, 1}), std::invalid_argument);
}

TEST(Metrics, ArgmaxTiesGoToLowestIndex) {
  Tensor<float> z({2, 3}, std::vector<float>{2, 2, 1, 0, 5, 5});
  EXPECT_EQ(argmax_rows(z), (std::vector<std::size_t>{0, 1}));
}

TEST(Metrics, ChunkedAccuracyMatchesSinglePass) {
  const auto net = initialized(build_mlp<float>(5, {8}, 3), 2);
  const auto b = random_batch<float>(37, {5}, 3, 3);
  EXPECT_EQ(accuracy(net, b, 4), accuracy(net, b, 512));
  EXPECT_EQ(accuracy(net, b), accuracy_from_logits(net.forward(b.inputs), b.labels));
}
