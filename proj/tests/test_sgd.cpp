#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rfcl/network.hpp"
#include "rfcl/sgd.hpp"
#include "support/random.hpp"

namespace rfcl {
namespace {

using testing::bit_identical;

ParamSet one_param(double theta) {
  ParamSet p;
  p.add_block(0, LayerKind::Dense, ParamRole::Weight, 1, theta);
  return p;
}

TEST(Sgd, StepMatchesDirectArithmetic) {
  ParamSet p = one_param(1.0);
  std::vector<double> g{0.5};
  sgd_step(p, g, 0.1);
  EXPECT_DOUBLE_EQ(p.values()[0], 0.95);
}

TEST(Sgd, ZeroScaleOrZeroRateLeavesParameters) {
  ParamSet p = one_param(1.0);
  p.lr_scale()[0] = 0.0;
  std::vector<double> g{123.0};
  sgd_step(p, g, 0.1);
  EXPECT_EQ(p.values()[0], 1.0);
  ParamSet q = one_param(-3.5);
  sgd_step(q, g, 0.0);
  EXPECT_EQ(q.values()[0], -3.5);
}

TEST(Sgd, NonFiniteGradientAbortsAndNamesParameter) {
  ParamSet p;
  p.add_block(0, LayerKind::Dense, ParamRole::Weight, 3, 1.0);
  p.add_block(2, LayerKind::Head, ParamRole::Bias, 2, 1.0);
  std::vector<double> g{0.1, 0.1, 0.1, 0.1, std::numeric_limits<double>::quiet_NaN()};
  try {
    sgd_step(p, g, 0.1);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2 (head) bias[1]"), std::string::npos);
  }
  // Nothing written.
  for (double v : p.values()) EXPECT_EQ(v, 1.0);
}

TEST(Sgd, ConfigValidation) {
  EXPECT_NO_THROW((SgdConfig{0.1, 4, 1}.validate()));
  EXPECT_THROW((SgdConfig{0.0, 4, 1}.validate()), ConfigError);
  EXPECT_THROW((SgdConfig{0.1, 0, 1}.validate()), ConfigError);
  EXPECT_THROW((SgdConfig{0.1, 4, 0}.validate()), ConfigError);
}

TEST(Freeze, SelectorMatchingNothingChangesNothing) {
  Network net(parse_architecture("dw3,pw4,fc3,head", {2, 3, 3}, 2), 1);
  ParamSet before = net.params();
  freeze_layers(net.params(), [](LayerKind) { return false; });
  EXPECT_TRUE(before == net.params());
}

TEST(Freeze, OnlyMatchedLayersGetZeroScale) {
  Network net(parse_architecture("dw3,norm,pw4,fc3,head", {2, 3, 3}, 2), 1);
  freeze_layers(net.params(), [](LayerKind k) { return k == LayerKind::Depthwise; });
  for (const auto& b : net.params().blocks()) {
    for (std::size_t k = b.offset; k < b.offset + b.size; ++k) {
      EXPECT_EQ(net.params().lr_scale()[k], b.kind == LayerKind::Depthwise ? 0.0 : 1.0);
    }
  }
}

TEST(Freeze, DepthwiseFiltersBitIdenticalAfterHundredSteps) {
  Network net(parse_architecture("dw3,norm,relu,pw4,norm,relu,fc6,head", {2, 4, 4}, 3), 8);
  freeze_layers(net.params(), [](LayerKind k) { return k == LayerKind::Depthwise; });
  const auto* w = net.params().find(0, ParamRole::Weight);
  const auto* b = net.params().find(0, ParamRole::Bias);
  std::vector<double> w0(net.params().values().begin() + w->offset,
                         net.params().values().begin() + w->offset + w->size);
  std::vector<double> b0(net.params().values().begin() + b->offset,
                         net.params().values().begin() + b->offset + b->size);
  const std::vector<double> all0(net.params().values().begin(), net.params().values().end());
  std::mt19937_64 rng(4);
  for (int step = 0; step < 100; ++step) {
    auto x = testing::random_tensor({5, 32}, rng);
    auto labels = testing::random_labels(5, 3, rng);
    auto cache = net.forward(x, Mode::Train);
    net.update_moving_moments(cache);
    sgd_step(net.params(), net.backward(cache, labels), 0.1);
  }
  EXPECT_TRUE(bit_identical(net.params().values().subspan(w->offset, w->size), w0));
  EXPECT_TRUE(bit_identical(net.params().values().subspan(b->offset, b->size), b0));
  EXPECT_FALSE(bit_identical(net.params().values(), all0));
}

}  // namespace
}  // namespace rfcl
