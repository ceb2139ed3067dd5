#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace lrnoise;
using namespace lrnoise::testing;

namespace {

struct LogisticTask {
  Network<double> net;
  Batch<double> data;
};

// Two-class softmax regression on Gaussian clusters: 200 training examples.
LogisticTask logistic_task(std::uint64_t seed = 3) {
  const auto ds = generate_synthetic({2, 5, 125, 2.0, seed});
  Network<double> net({5}, 2);
  net.add(softmax_head("logit", 5, 2));
  net.initialize(RngStream(seed));
  return {std::move(net), {ds.train.inputs.cast<double>(), ds.train.labels}};
}

LogisticTask small_mlp_task(std::size_t n, std::uint64_t seed) {
  return {initialized(build_mlp<double>(4, {5}, 3), seed), random_batch<double>(n, {4}, 3, seed)};
}

GradNoiseConfig config(double alpha, std::size_t batch, std::size_t samples, Sampling s,
                       std::uint64_t seed = 1) {
  GradNoiseConfig c;
  c.alpha = alpha;
  c.batch_size = batch;
  c.sample_count = samples;
  c.sampling = s;
  c.rng = RngStream(seed);
  return c;
}

FlatGrad gradient_of(const LogisticTask& t, std::vector<std::size_t> idx) {
  return batch_gradient(t.net, gather(t.data, std::span<const std::size_t>(idx)));
}

}  // namespace

TEST(FullGradient, DuplicatedDatasetGivesSameGradient) {
  const auto t = small_mlp_task(7, 1);
  const auto a = full_gradient(t.net, t.data);
  const auto b = full_gradient(t.net, concat(t.data, t.data));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14 * (1 + std::abs(a[i])));
}

TEST(FullGradient, SingleExampleEqualsItsGradient) {
  const auto t = small_mlp_task(1, 2);
  EXPECT_EQ(full_gradient(t.net, t.data), per_example_gradients(t.net, t.data).at(0));
}

TEST(FullGradient, TwoExamplesGiveMeanOfPerExampleGradients) {
  const auto t = small_mlp_task(2, 3);
  const auto per = per_example_gradients(t.net, t.data);
  const auto full = full_gradient(t.net, t.data);
  for (std::size_t i = 0; i < full.size(); ++i) {
    const double mean = 0.5 * (per[0][i] + per[1][i]);
    EXPECT_LE(std::abs(full[i] - mean), 1e-6 * std::max(std::abs(mean), 1e-12));
  }
}

TEST(FullGradient, ChunkingDoesNotChangeResult) {
  const auto t = small_mlp_task(23, 4);
  const auto a = full_gradient(t.net, t.data), b = full_gradient(t.net, t.data, 5);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
}

TEST(FullGradient, FlatteningFollowsParameterNames) {
  const auto t = small_mlp_task(3, 5);
  const auto grads = t.net.loss_and_grads(t.data).grads;
  FlatGrad expected;
  for (const auto& name : t.net.trainable_names())
    for (double v : grads.at(name).values()) expected.push_back(v);
  EXPECT_EQ(full_gradient(t.net, t.data), expected);
}

TEST(FullGradient, EmptyDatasetThrows) {
  const auto t = small_mlp_task(3, 5);
  Batch<double> empty{Tensor<double>(), {}};
  EXPECT_THROW(full_gradient(t.net, empty), std::invalid_argument);
  EXPECT_THROW(deviation_constant(t.net, empty), std::invalid_argument);
}

TEST(DeviationConstant, HandOracle) {
  const std::vector<FlatGrad> g = {{1.0}, {3.0}};
  EXPECT_EQ(mean_gradient(g), (FlatGrad{2.0}));
  EXPECT_DOUBLE_EQ(deviation_constant(g), 1.0);
}

TEST(DeviationConstant, IdenticalExamplesGiveZero) {
  const auto one = small_mlp_task(1, 6);
  Batch<double> copies = one.data;
  for (int i = 0; i < 4; ++i) copies = concat(copies, one.data);
  EXPECT_NEAR(deviation_constant(one.net, copies), 0.0, 1e-10);
}

TEST(DeviationConstant, ShuffleInvariant) {
  const auto t = small_mlp_task(12, 7);
  std::vector<std::size_t> perm(12);
  std::iota(perm.rbegin(), perm.rend(), std::size_t{0});
  const auto shuffled = gather(t.data, std::span<const std::size_t>(perm));
  EXPECT_NEAR(deviation_constant(t.net, t.data), deviation_constant(t.net, shuffled),
              1e-14 * deviation_constant(t.net, t.data));
}

TEST(DeviationConstant, VarianceIdentity) {
  const auto t = logistic_task();
  const auto per = per_example_gradients(t.net, t.data);
  double mean_sq = 0;
  for (const auto& g : per) mean_sq += squared_norm(g);
  mean_sq /= static_cast<double>(per.size());
  const double c = deviation_constant(t.net, t.data);
  const double identity = mean_sq - squared_norm(full_gradient(t.net, t.data));
  EXPECT_NEAR(identity / c, 1.0, 1e-6);
  EXPECT_GE(c, 0.0);
}

TEST(NoisePower, FullBatchWithoutReplacementIsZero) {
  const auto t = small_mlp_task(10, 8);
  const auto cfg = config(0.1, 10, 20, Sampling::without_replacement);
  EXPECT_EQ(empirical_noise_power(t.net, t.data, cfg), 0.0);
  const auto r = check_bound(t.net, t.data, cfg);
  EXPECT_EQ(r.empirical_noise_power, 0.0);
  EXPECT_GT(r.theoretical_bound, 0.0);
  EXPECT_TRUE(r.bound_satisfied);
  EXPECT_DOUBLE_EQ(r.relative_gap, 1.0);
}

TEST(NoisePower, ExhaustiveEnumerationMatchesClosedForms) {
  const auto t = small_mlp_task(6, 9);
  const double alpha = 0.05;
  const auto full = full_gradient(t.net, t.data);
  const double c = deviation_constant(t.net, t.data);
  double without = 0;
  int pairs = 0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j, ++pairs)
      without += squared_distance(gradient_of(t, {i, j}), full);
  without = alpha * alpha * without / pairs;
  double with = 0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) with += squared_distance(gradient_of(t, {i, j}), full);
  with = alpha * alpha * with / 36;
  EXPECT_EQ(pairs, 15);
  const double wo_closed = expected_noise_power(alpha, c, 2, 6, Sampling::without_replacement);
  const double w_closed = expected_noise_power(alpha, c, 2, 6, Sampling::with_replacement);
  EXPECT_NEAR(without / wo_closed, 1.0, 1e-8);
  EXPECT_NEAR(with / w_closed, 1.0, 1e-8);
  EXPECT_NEAR(wo_closed / w_closed, 4.0 / 5.0, 1e-15);
}

TEST(NoisePower, MonteCarloConvergesToEnumeration) {
  const auto t = small_mlp_task(6, 9);
  const double c = deviation_constant(t.net, t.data);
  for (auto s : {Sampling::with_replacement, Sampling::without_replacement}) {
    const double mc = empirical_noise_power(t.net, t.data, config(1.0, 2, 20000, s, 5));
    EXPECT_NEAR(mc / expected_noise_power(1.0, c, 2, 6, s), 1.0, 0.05) << to_string(s);
  }
}

TEST(NoisePower, LogisticTaskWithReplacement) {
  const auto t = logistic_task();
  const auto r = check_bound(t.net, t.data, config(0.01, 8, 10000, Sampling::with_replacement));
  EXPECT_NEAR(r.empirical_noise_power / r.theoretical_bound, 1.0, 0.05);
  EXPECT_EQ(r.expected_noise_power, r.theoretical_bound);
  EXPECT_TRUE(r.bound_satisfied);
  EXPECT_NEAR(r.tolerance, 0.03, 1e-12);
}

TEST(NoisePower, LogisticTaskWithoutReplacement) {
  const auto t = logistic_task();
  const auto r = check_bound(t.net, t.data, config(0.01, 8, 10000, Sampling::without_replacement));
  EXPECT_NEAR(r.empirical_noise_power / r.expected_noise_power, 1.0, 0.05);
  EXPECT_LT(r.empirical_noise_power, r.theoretical_bound);
  EXPECT_NEAR(r.expected_noise_power / r.theoretical_bound, 192.0 / 199.0, 1e-12);
  EXPECT_EQ(r.tolerance, 0.0);
}

TEST(NoisePower, AlphaDoublingScalesByFourExactly) {
  const auto t = logistic_task();
  for (auto s : {Sampling::with_replacement, Sampling::without_replacement}) {
    const auto a = check_bound(t.net, t.data, config(0.01, 8, 500, s));
    const auto b = check_bound(t.net, t.data, config(0.02, 8, 500, s));
    EXPECT_EQ(b.empirical_noise_power, 4 * a.empirical_noise_power);
    EXPECT_EQ(b.theoretical_bound, 4 * a.theoretical_bound);
    EXPECT_EQ(a.C, b.C);
  }
}

TEST(NoisePower, BatchDoublingHalvesNoise) {
  const auto t = logistic_task();
  const double p8 = empirical_noise_power(t.net, t.data, config(0.1, 8, 10000, Sampling::with_replacement, 2));
  const double p16 = empirical_noise_power(t.net, t.data, config(0.1, 16, 10000, Sampling::with_replacement, 3));
  EXPECT_NEAR(p16 / p8, 0.5, 0.05);
}

TEST(NoisePower, SamplingIsDeterministicForSeed) {
  const auto t = small_mlp_task(20, 10);
  const auto cfg = config(0.1, 4, 50, Sampling::with_replacement, 7);
  EXPECT_EQ(empirical_noise_power(t.net, t.data, cfg), empirical_noise_power(t.net, t.data, cfg));
}

TEST(NoisePower, ConfigValidation) {
  const auto t = small_mlp_task(5, 11);
  EXPECT_THROW(empirical_noise_power(t.net, t.data, config(0.1, 6, 10, Sampling::without_replacement)),
               std::invalid_argument);
  EXPECT_NO_THROW(empirical_noise_power(t.net, t.data, config(0.1, 6, 10, Sampling::with_replacement)));
  EXPECT_THROW(empirical_noise_power(t.net, t.data, config(0.1, 0, 10, Sampling::with_replacement)),
               std::invalid_argument);
  EXPECT_THROW(empirical_noise_power(t.net, t.data, config(0.1, 2, 0, Sampling::with_replacement)),
               std::invalid_argument);
}

TEST(SampleBatch, WithoutReplacementHasDistinctIndices) {
  RngStream r(4);
  for (int k = 0; k < 100; ++k) {
    auto idx = sample_batch(r, 10, 7, Sampling::without_replacement);
    ASSERT_EQ(idx.size(), 7u);
    EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    EXPECT_EQ(std::adjacent_find(idx.begin(), idx.end()), idx.end());
    for (auto i : idx) EXPECT_LT(i, 10u);
  }
}

TEST(SampleBatch, SamplingNames) {
  EXPECT_EQ(sampling_from_string("with"), Sampling::with_replacement);
  EXPECT_EQ(sampling_from_string("without_replacement"), Sampling::without_replacement);
  EXPECT_THROW(sampling_from_string("sometimes"), std::invalid_argument);
}
