#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rfcl/network.hpp"
#include "rfcl/serialize.hpp"
#include "rfcl/sgd.hpp"
#include "support/gradcheck.hpp"
#include "support/random.hpp"

namespace rfcl {
namespace {

using testing::bit_identical;
using testing::random_labels;
using testing::random_tensor;

void fill(std::span<double> dst, std::initializer_list<double> v) {
  ASSERT_EQ(dst.size(), v.size());
  std::copy(v.begin(), v.end(), dst.begin());
}

// Puts moving moments far from any mini-batch so r and d sit on their clip
// bounds; the clipped BRN is then locally the r, d-frozen function.
void saturate_renorm(Network& net) {
  for (auto& st : net.norm_states()) {
    st.initialized = true;
    std::fill(st.mu.begin(), st.mu.end(), 100.0);
    std::fill(st.sigma.begin(), st.sigma.end(), 1e-3);
  }
  net.set_norm_params({1.5, 2.5, 0.9999});
}

void randomize_affine(Network& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.5, 1.5), s(-0.5, 0.5);
  for (const auto& b : net.params().blocks()) {
    if (b.role == ParamRole::Scale) {
      for (std::size_t k = 0; k < b.size; ++k) net.params().values()[b.offset + k] = d(rng);
    } else if (b.role == ParamRole::Shift || b.role == ParamRole::Bias) {
      for (std::size_t k = 0; k < b.size; ++k) net.params().values()[b.offset + k] = s(rng);
    }
  }
}

TEST(Architecture, ParsesDepthwiseSeparableStack) {
  auto spec = parse_architecture("dw3,norm,relu,pw8,norm,relu,fc16,relu,head", {3, 4, 4}, 10);
  ASSERT_EQ(spec.layers.size(), 9u);
  EXPECT_EQ(spec.layers[0].kind, LayerKind::Depthwise);
  EXPECT_EQ(spec.layers[3].out, (Shape3{8, 4, 4}));
  EXPECT_EQ(spec.layers[6].out, (Shape3{16, 1, 1}));
  EXPECT_EQ(spec.layers.back().out, (Shape3{10, 1, 1}));
  Network net(spec, 1);
  // One k x k filter per input channel; pointwise is 1x1 across channels.
  EXPECT_EQ(net.params().find(0, ParamRole::Weight)->size, 3u * 3u * 3u);
  EXPECT_EQ(net.params().find(3, ParamRole::Weight)->size, 8u * 3u);
}

TEST(Architecture, RejectsBadTokens) {
  EXPECT_THROW(parse_architecture("fc4", {4, 1, 1}, 2), ConfigError);
  EXPECT_THROW(parse_architecture("head,fc4", {4, 1, 1}, 2), ConfigError);
  EXPECT_THROW(parse_architecture("conv3,head", {4, 1, 1}, 2), ConfigError);
  EXPECT_THROW(parse_architecture("dw2,head", {1, 3, 3}, 2), ConfigError);
}

TEST(Forward, ZeroWeightsGiveZeroLogits) {
  Network net(parse_architecture("dw3,pw4,relu,fc5,head", {2, 3, 3}, 3), 7);
  for (auto& v : net.params().values()) v = 0.0;
  std::mt19937_64 rng(3);
  auto logits = net.predict_logits(random_tensor({4, 18}, rng));
  for (double v : logits.data()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, IdentityDenseHeadPassesInputThrough) {
  Network net(parse_architecture("head", {3, 1, 1}, 3), 7);
  fill(net.params().view(0, ParamRole::Weight), {1, 0, 0, 0, 1, 0, 0, 0, 1});
  fill(net.params().view(0, ParamRole::Bias), {0, 0, 0});
  Tensor x({1, 3}, {0.5, -2.0, 7.25});
  EXPECT_EQ(net.predict_logits(x).data()[0], 0.5);
  EXPECT_EQ(net.predict_logits(x).data()[1], -2.0);
  EXPECT_EQ(net.predict_logits(x).data()[2], 7.25);
}

// Expected logits computed independently with numpy:
//   h = relu(W1 x + b1); logits = W2 h + b2
TEST(Forward, TwoLayerNetMatchesMatrixArithmetic) {
  Network net(parse_architecture("fc3,relu,head", {4, 1, 1}, 2), 0);
  fill(net.params().view(0, ParamRole::Weight),
       {0.1, -0.2, 0.3, 0.4, 0.5, 0.6, -0.7, 0.8, -0.9, 1.0, 1.1, -1.2});
  fill(net.params().view(0, ParamRole::Bias), {0.01, -0.02, 0.03});
  fill(net.params().view(2, ParamRole::Weight), {0.2, -0.3, 0.4, -0.5, 0.6, 0.7});
  fill(net.params().view(2, ParamRole::Bias), {0.05, -0.05});
  Tensor x({2, 4}, {1, 2, 3, 4, -1, 0.5, 0.25, 2});
  auto y = net.predict_logits(x);
  const double expected[] = {-0.342, 0.513, -0.1745, 0.3305};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(y[i], expected[i], 1e-12);
}

TEST(Forward, ShapeMismatchNamesLayer) {
  Network net(parse_architecture("dw3,head", {2, 3, 3}, 2), 1);
  try {
    net.forward(Tensor({2, 17}), Mode::Eval);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 0 (depthwise)"), std::string::npos);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  for (int c : {2, 5, 50}) {
    Tensor logits({3, static_cast<std::size_t>(c)}, 0.7);
    std::vector<int> labels{0, 1, c - 1};
    EXPECT_NEAR(cross_entropy_loss(logits, labels), std::log(c), 1e-14);
  }
}

TEST(CrossEntropy, DominantTrueLogitDrivesLossToZero) {
  Tensor logits({1, 3}, {0.0, 800.0, 0.0});
  std::vector<int> labels{1};
  EXPECT_EQ(cross_entropy_loss(logits, labels), 0.0);
  Tensor milder({1, 3}, {0.0, 30.0, 0.0});
  EXPECT_GT(cross_entropy_loss(milder, labels), 0.0);
  EXPECT_LT(cross_entropy_loss(milder, labels), 1e-12);
}

// -ln(e^3 / (e^1 + e^2 + e^3)) evaluated with numpy.
TEST(CrossEntropy, MatchesDirectSoftmax) {
  Tensor logits({1, 3}, {1.0, 2.0, 3.0});
  std::vector<int> labels{2};
  EXPECT_NEAR(cross_entropy_loss(logits, labels), 0.4076059644443803, 1e-15);
}

TEST(CrossEntropy, RejectsBadLabels) {
  Tensor logits({2, 3});
  std::vector<int> bad{0, 3};
  EXPECT_THROW(cross_entropy_loss(logits, bad), DimensionError);
  std::vector<int> short_labels{0};
  EXPECT_THROW(cross_entropy_loss(logits, short_labels), DimensionError);
}

TEST(CrossEntropy, NonNegativeOnRandomLogits) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    auto logits = random_tensor({4, 6}, rng, -20, 20);
    auto labels = random_labels(4, 6, rng);
    EXPECT_GE(cross_entropy_loss(logits, labels), 0.0);
  }
}

struct GradCase {
  const char* name;
  const char* arch;
  Shape3 input;
  NormKind norm;
  bool saturate;
};

void PrintTo(const GradCase& c, std::ostream* os) { *os << c.name; }

class GradientCheck : public ::testing::TestWithParam<GradCase> {};

TEST_P(GradientCheck, AnalyticMatchesCentralDifferences) {
  const GradCase& gc = GetParam();
  for (int inst = 0; inst < 20; ++inst) {
    std::mt19937_64 rng(1000 + inst);
    Network net(parse_architecture(gc.arch, gc.input, 4, gc.norm), 50 + inst);
    randomize_affine(net, rng);
    if (gc.saturate) saturate_renorm(net);
    auto x = random_tensor({8, gc.input.size()}, rng);
    auto labels = random_labels(8, 4, rng);
    auto r = testing::check_gradients(net, x, labels);
    EXPECT_LT(r.max_rel_error, 1e-4) << gc.name << " instance " << inst << " worst "
                                     << net.params().describe(r.worst_index);
    EXPECT_GT(r.checked, net.params().size() * 9 / 10);
  }
}

INSTANTIATE_TEST_SUITE_P(
    LayerKinds, GradientCheck,
    ::testing::Values(
        GradCase{"dense_head", "fc6,head", {5, 1, 1}, NormKind::BatchNorm, false},
        GradCase{"depthwise_pointwise", "dw3,pw4,head", {3, 4, 4}, NormKind::BatchNorm, false},
        GradCase{"batchnorm", "dw3,norm,pw4,norm,fc6,norm,head", {2, 3, 3}, NormKind::BatchNorm, false},
        GradCase{"batchrenorm", "dw3,norm,pw4,norm,fc6,norm,head", {2, 3, 3},
                 NormKind::BatchRenorm, true},
        GradCase{"relu_stack", "dw3,norm,relu,pw4,norm,relu,fc6,relu,head", {2, 3, 3},
                 NormKind::BatchRenorm, false}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Backward, DeadReluPathHasZeroGradient) {
  Network net(parse_architecture("fc3,relu,head", {2, 1, 1}, 2), 5);
  auto w = net.params().view(0, ParamRole::Weight);
  auto b = net.params().view(0, ParamRole::Bias);
  // Unit 1 is negative for every input in [0, 1]^2.
  w[2] = -1.0;
  w[3] = -1.0;
  b[1] = -0.5;
  std::mt19937_64 rng(2);
  auto x = random_tensor({6, 2}, rng, 0.0, 1.0);
  auto labels = random_labels(6, 2, rng);
  auto g = net.backward(net.forward(x, Mode::Train), labels);
  const auto* wb = net.params().find(0, ParamRole::Weight);
  const auto* bb = net.params().find(0, ParamRole::Bias);
  EXPECT_EQ(g[wb->offset + 2], 0.0);
  EXPECT_EQ(g[wb->offset + 3], 0.0);
  EXPECT_EQ(g[bb->offset + 1], 0.0);
  // The head weight reading the dead unit sees a zero activation too.
  const auto* hw = net.params().find(2, ParamRole::Weight);
  EXPECT_EQ(g[hw->offset + 1], 0.0);
  EXPECT_EQ(g[hw->offset + 4], 0.0);
}

TEST(Backward, DuplicatingThePatternsKeepsTheMeanGradient) {
  std::mt19937_64 rng(9);
  Network net(parse_architecture("dw3,norm,relu,pw3,norm,fc5,head", {2, 3, 3}, 3), 4);
  auto x = random_tensor({4, 18}, rng);
  auto labels = random_labels(4, 3, rng);
  Tensor x2({8, 18});
  std::vector<int> labels2;
  for (std::size_t n = 0; n < 8; ++n) {
    auto src = x.row(n % 4);
    std::copy(src.begin(), src.end(), x2.row(n).begin());
    labels2.push_back(labels[n % 4]);
  }
  auto g1 = net.backward(net.forward(x, Mode::Train), labels);
  auto g2 = net.backward(net.forward(x2, Mode::Train), labels2);
  for (std::size_t k = 0; k < g1.size(); ++k) {
    EXPECT_NEAR(g1[k], g2[k], 1e-12 * std::max(1.0, std::abs(g1[k])));
  }
}

TEST(Backward, RejectsStaleOrEvalCaches) {
  Network net(parse_architecture("fc3,head", {2, 1, 1}, 2), 5);
  Tensor x({2, 2}, {1, 2, 3, 4});
  std::vector<int> labels{0, 1};
  EXPECT_THROW(net.backward(net.forward(x, Mode::Eval), labels), ConfigError);
  auto cache = net.forward(x, Mode::Train);
  net.params().values()[0] += 1.0;
  EXPECT_THROW(net.backward(cache, labels), ConfigError);
  auto fresh = net.forward(x, Mode::Train);
  fresh.activations.pop_back();
  EXPECT_THROW(net.backward(fresh, labels), DimensionError);
}

TEST(Determinism, SameSeedSameParametersAfterTraining) {
  auto run = [] {
    Network net(parse_architecture("dw3,norm,relu,pw4,norm,relu,fc8,head", {2, 4, 4}, 3), 17);
    std::mt19937_64 rng(5);
    for (int step = 0; step < 25; ++step) {
      auto x = random_tensor({6, 32}, rng);
      auto labels = random_labels(6, 3, rng);
      auto cache = net.forward(x, Mode::Train);
      net.update_moving_moments(cache);
      auto g = net.backward(cache, labels);
      sgd_step(net.params(), g, 0.05);
    }
    return net;
  };
  Network a = run(), b = run();
  EXPECT_TRUE(bit_identical(a.params().values(), b.params().values()));
  EXPECT_TRUE(bit_identical(a.norm_states()[1].sigma, b.norm_states()[1].sigma));
}

TEST(Serialization, WeightFileRoundTripsParametersAndMoments) {
  Network net(parse_architecture("dw3,norm,relu,pw4,norm,fc5,head", {2, 3, 3}, 3), 21);
  std::mt19937_64 rng(1);
  auto cache = net.forward(random_tensor({4, 18}, rng), Mode::Train);
  net.update_moving_moments(cache);
  std::stringstream ss;
  write_network(ss, net);
  const std::string bytes = ss.str();
  EXPECT_EQ(bytes.substr(0, 8), std::string("RFCLNET\0", 8));
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), kWeightFileVersion);
  Network back = read_network(ss);
  EXPECT_TRUE(bit_identical(back.params().values(), net.params().values()));
  ASSERT_EQ(back.norm_states().size(), net.norm_states().size());
  for (std::size_t i = 0; i < net.norm_states().size(); ++i) {
    EXPECT_TRUE(bit_identical(back.norm_states()[i].mu, net.norm_states()[i].mu));
    EXPECT_TRUE(bit_identical(back.norm_states()[i].sigma, net.norm_states()[i].sigma));
    EXPECT_TRUE(back.norm_states()[i].initialized);
  }
  auto x = random_tensor({3, 18}, rng);
  EXPECT_TRUE(bit_identical(back.predict_logits(x).data(), net.predict_logits(x).data()));
}

TEST(Serialization, RejectsBadMagic) {
  std::stringstream ss("NOTAWEIGHTFILE..........");
  EXPECT_THROW(read_network(ss), Error);
}

}  // namespace
}  // namespace rfcl
