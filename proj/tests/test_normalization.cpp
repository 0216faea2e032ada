#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "rfcl/normalization.hpp"
#include "support/random.hpp"

namespace rfcl {
namespace {

using testing::random_tensor;

std::vector<real> ones(std::size_t n) { return std::vector<real>(n, 1.0); }
std::vector<real> zeros(std::size_t n) { return std::vector<real>(n, 0.0); }

BrnLayerState warmed_state(std::size_t channels, real mu, real sigma) {
  BrnLayerState st(channels);
  st.mu.assign(channels, mu);
  st.sigma.assign(channels, sigma);
  st.initialized = true;
  return st;
}

TEST(BatchNorm, ConstantChannelNormalizesToZero) {
  Tensor x({4, 2}, {5, 1, 5, 2, 5, 3, 5, 4});
  BrnLayerState st(2);
  const NormOutput out = bn_forward_train(x, st, ones(2), zeros(2));
  for (std::size_t n = 0; n < 4; ++n) EXPECT_EQ(out.y[n * 2], 0.0);
}

TEST(BatchNorm, StandardizedInputIsPreserved) {
  Tensor x({4, 1}, {-1, 1, -1, 1});
  BrnLayerState st(1);
  st.epsilon = 0.0;
  const NormOutput out = bn_forward_train(x, st, ones(1), zeros(1));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(out.y[i], x[i]);
}

TEST(BatchNorm, ThreeValuesMatchDirectEvaluation) {
  // numpy: (x - x.mean()) / sqrt(x.var() + 1e-5)
  Tensor x({3, 1}, {1, 2, 3});
  BrnLayerState st(1);
  const NormOutput out = bn_forward_train(x, st, ones(1), zeros(1));
  EXPECT_NEAR(out.y[0], -1.2247356859083902, 1e-15);
  EXPECT_NEAR(out.y[1], 0.0, 1e-15);
  EXPECT_NEAR(out.y[2], 1.2247356859083902, 1e-15);
}

TEST(BatchNorm, SingletonBatchIsFinite) {
  Tensor x({1, 3}, {7, -2, 0.5});
  BrnLayerState st(3);
  const NormOutput out = bn_forward_train(x, st, ones(3), zeros(3));
  EXPECT_TRUE(out.y.all_finite());
  for (real v : out.y.data()) EXPECT_EQ(v, 0.0);
}

TEST(BatchRenorm, UnitBoundsEqualBatchNorm) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = random_tensor({6, 3, 2, 2}, rng, -3.0, 3.0);
    BrnLayerState st = warmed_state(3, 0.7, 2.5);
    st.r_max = 1.0;
    st.d_max = 0.0;
    const auto scale = std::vector<real>{1.3, -0.4, 2.0};
    const auto shift = std::vector<real>{0.1, 0.2, -0.3};
    const NormOutput bn = bn_forward_train(x, st, scale, shift);
    const NormOutput brn = brn_forward_train(x, st, scale, shift);
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(bn.y[i], brn.y[i], 1e-6);
  }
}

TEST(BatchRenorm, MatchedMomentsGiveUnitFactors) {
  Tensor x({4, 1}, {1, 2, 3, 4});
  const BatchMoments m = batch_moments(x, 1, 1e-5);
  BrnLayerState st = warmed_state(1, m.mean[0], m.stddev[0]);
  st.r_max = 3.0;
  st.d_max = 5.0;
  const NormOutput brn = brn_forward_train(x, st, ones(1), zeros(1));
  const NormOutput bn = bn_forward_train(x, st, ones(1), zeros(1));
  EXPECT_DOUBLE_EQ(brn.cache.r[0], 1.0);
  EXPECT_DOUBLE_EQ(brn.cache.d[0], 0.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(brn.y[i], bn.y[i]);
}

TEST(BatchRenorm, ClipArithmetic) {
  const ClipFactors f = clip_factors(4.0, -7.0, 3.0, 5.0);
  EXPECT_EQ(f.r, 3.0);
  EXPECT_EQ(f.d, -5.0);
  const ClipFactors g = clip_factors(0.1, 7.0, 3.0, 5.0);
  EXPECT_DOUBLE_EQ(g.r, 1.0 / 3.0);
  EXPECT_EQ(g.d, 5.0);
  EXPECT_THROW(clip_factors(1.0, 0.0, 0.5, 0.0), ConfigError);
  EXPECT_THROW(clip_factors(1.0, 0.0, 1.0, -1.0), ConfigError);
}

TEST(BatchRenorm, ClipBoundsHoldForSampledPairs) {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> ratio(0.0, 2.0);
  std::normal_distribution<double> offset(0.0, 10.0);
  std::uniform_real_distribution<double> rmax(1.0, 4.0), dmax(0.0, 6.0);
  for (int i = 0; i < 10000; ++i) {
    const double rm = rmax(rng), dm = dmax(rng);
    const ClipFactors f = clip_factors(ratio(rng), offset(rng), rm, dm);
    ASSERT_GE(f.r, 1.0 / rm);
    ASSERT_LE(f.r, rm);
    ASSERT_GE(f.d, -dm);
    ASSERT_LE(f.d, dm);
  }
}

TEST(BatchRenorm, ForwardClipsAgainstMovingMoments) {
  // Batch {-4, 4}: mean 0, stddev ~4. Moving mu = 7, sigma = 1.
  Tensor x({2, 1}, {-4, 4});
  BrnLayerState st = warmed_state(1, 7.0, 1.0);
  st.epsilon = 0.0;
  st.r_max = 3.0;
  st.d_max = 5.0;
  const NormOutput out = brn_forward_train(x, st, ones(1), zeros(1));
  EXPECT_EQ(out.cache.r[0], 3.0);
  EXPECT_EQ(out.cache.d[0], -5.0);
  EXPECT_DOUBLE_EQ(out.y[0], -1.0 * 3.0 - 5.0);
  EXPECT_DOUBLE_EQ(out.y[1], 1.0 * 3.0 - 5.0);
}

TEST(BatchRenorm, UninitializedMomentsRejected) {
  Tensor x({2, 1}, {0, 1});
  BrnLayerState st(1);
  st.r_max = 1.5;
  EXPECT_THROW(brn_forward_train(x, st, ones(1), zeros(1)), ConfigError);
  st.r_max = 1.0;
  EXPECT_NO_THROW(brn_forward_train(x, st, ones(1), zeros(1)));
}

TEST(MovingMoments, Examples) {
  BrnLayerState st = warmed_state(1, 1.0, 1.0);
  BatchMoments mb{{2.0}, {3.0}};

  st.alpha_past = 0.99;
  BrnLayerState a = st;
  update_moving_moments(a, mb);
  EXPECT_NEAR(a.mu[0], 1.01, 1e-15);
  EXPECT_NEAR(a.sigma[0], 1.02, 1e-15);

  BrnLayerState b = st;
  b.alpha_past = 0.0;
  update_moving_moments(b, mb);
  EXPECT_EQ(b.mu[0], 2.0);
  EXPECT_EQ(b.sigma[0], 3.0);

  BrnLayerState c = st;
  c.alpha_past = 1.0;
  for (int i = 0; i < 10; ++i) update_moving_moments(c, mb);
  EXPECT_EQ(c.mu[0], 1.0);
  EXPECT_EQ(c.sigma[0], 1.0);
}

TEST(MovingMoments, FirstUpdateCopiesBatch) {
  BrnLayerState st(1);
  st.alpha_past = 0.99;
  update_moving_moments(st, BatchMoments{{4.0}, {0.5}});
  EXPECT_TRUE(st.initialized);
  EXPECT_EQ(st.mu[0], 4.0);
  EXPECT_EQ(st.sigma[0], 0.5);
}

TEST(Schedule, Examples) {
  const int b1 = 300;
  EXPECT_EQ(schedule_params(1, 10, "nicv2-79", b1), (BrnParams{1.0, 0.0, 0.99}));
  EXPECT_EQ(schedule_params(1, 10, "nicv2-391", b1), (BrnParams{1.0, 0.0, 0.99}));
  EXPECT_EQ(schedule_params(5, 0, "nicv2-391", b1), (BrnParams{1.5, 2.5, 0.9999}));
  EXPECT_EQ(schedule_params(5, 77, "nicv2-79", b1), (BrnParams{1.25, 0.5, 0.9999}));
  EXPECT_EQ(schedule_params(5, 77, "nicv2-196", b1), (BrnParams{1.25, 0.5, 0.9999}));
  EXPECT_THROW(schedule_params(2, 0, "nicv2-100", b1), ConfigError);
  EXPECT_THROW(schedule_params(0, 0, "nicv2-79", b1), ConfigError);
}

TEST(Schedule, WarmupThenLinearRampToTargets) {
  const int b1 = 148;
  for (int it = 0; it < 48; ++it) {
    const BrnParams p = schedule_params(1, it, "nicv2-79", b1);
    ASSERT_EQ(p.r_max, 1.0);
    ASSERT_EQ(p.d_max, 0.0);
  }
  BrnParams prev{1.0, 0.0, 0.99};
  for (int it = 48; it < b1; ++it) {
    const BrnParams p = schedule_params(1, it, "nicv2-79", b1);
    ASSERT_GT(p.r_max, prev.r_max);
    ASSERT_GT(p.d_max, prev.d_max);
    prev = p;
  }
  EXPECT_DOUBLE_EQ(prev.r_max, 3.0);
  EXPECT_DOUBLE_EQ(prev.d_max, 5.0);
  EXPECT_DOUBLE_EQ(schedule_params(1, 97, "nicv2-79", b1).r_max, 2.0);
}

TEST(EvalPath, BatchIndependent) {
  std::mt19937_64 rng(3);
  BrnLayerState st = warmed_state(2, 0.3, 1.7);
  const std::vector<real> scale{0.9, 1.1}, shift{-0.2, 0.4};
  Tensor single = random_tensor({1, 2, 3, 1}, rng);
  Tensor batch = random_tensor({5, 2, 3, 1}, rng);
  std::copy(single.data().begin(), single.data().end(), batch.row(2).begin());
  const Tensor a = brn_forward_eval(single, st, scale, shift);
  const Tensor b = brn_forward_eval(batch, st, scale, shift);
  EXPECT_TRUE(testing::bit_identical(a.row(0), b.row(2)));
}

TEST(EvalPath, MeanInputMapsToShift) {
  BrnLayerState st = warmed_state(1, 2.5, 0.7);
  const Tensor y = brn_forward_eval(Tensor({2, 1}, {2.5, 2.5}), st, ones(1), zeros(1));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 0.0);
}

TEST(EvalPath, DirectEvaluation) {
  // numpy: scale * (x - mu) / sigma + shift
  BrnLayerState st(2);
  st.mu = {0.5, -1.0};
  st.sigma = {2.0, 0.5};
  st.initialized = true;
  const Tensor y = brn_forward_eval(Tensor({2, 2}, {1.5, 0.0, -0.5, -2.0}), st,
                                    std::vector<real>{1.5, -1.0}, std::vector<real>{0.1, 0.2});
  const double expect[] = {0.85, -1.8, -0.65, 2.2};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y[i], expect[i], 1e-15);
}

}  // namespace
}  // namespace rfcl
