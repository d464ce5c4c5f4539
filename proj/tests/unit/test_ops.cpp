#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "pel/errors.hpp"
#include "pel/ops.hpp"

using namespace pel;
using pel::testing::random_tensor;

namespace {

Tensor map3(std::vector<double> v) { return Tensor(Dims{1, 1, 3, 3}, std::move(v)); }

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST(Elementwise, Identities) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(Dims{2, 3, 4, 5}, rng);
  Graph g;
  EXPECT_EQ(vec(add(g, x, Tensor(x.dims()))), vec(x));
  const Tensor zero = sub(g, x, x);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(add(g, x, Tensor(Dims{1, 1, 1, 1})), ShapeError);
}

TEST(Elementwise, MulGradientAtTwoThree) {
  Tensor a(Dims{1, 1, 1, 1}, 2.0);
  Tensor b(Dims{1, 1, 1, 1}, 3.0);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Graph g;
  g.backward(mul(g, a, b));
  EXPECT_EQ(a.grad()[0], 3.0);
  EXPECT_EQ(b.grad()[0], 2.0);
  const double h = 1e-4;
  const double fd = ((2.0 + h) * 3.0 - (2.0 - h) * 3.0) / (2 * h);
  EXPECT_NEAR(a.grad()[0], fd, 1e-3 * 3.0);
}

TEST(Sigmoid, ValuesAndSaturation) {
  Graph g;
  const Tensor y = sigmoid(g, Tensor(Dims{1, 1, 1, 4}, std::vector<double>{0.0, 100.0, -100.0, -800.0}));
  EXPECT_EQ(y.data()[0], 0.5);
  EXPECT_NEAR(y.data()[1], 1.0, 1e-9);
  EXPECT_NEAR(y.data()[2], 0.0, 1e-9);
  for (double v : y.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(ConvPointwise, IdentityAndZero) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor(Dims{2, 3, 2, 2}, rng);
  Tensor eye(Dims{3, 3, 1, 1});
  for (std::size_t i = 0; i < 3; ++i) eye.at(i, i, 0, 0) = 1.0;
  Graph g;
  EXPECT_EQ(vec(conv_pointwise(g, x, eye, Tensor(Dims{1, 3, 1, 1}))), vec(x));
  const Tensor zero = conv_pointwise(g, x, Tensor(Dims{3, 3, 1, 1}), Tensor(Dims{1, 3, 1, 1}));
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
}

TEST(ConvPointwise, MatchesLoopOracle) {
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor(Dims{2, 3, 3, 4}, rng);
  const Tensor w = random_tensor(Dims{2, 3, 1, 1}, rng);
  const Tensor b = random_tensor(Dims{1, 2, 1, 1}, rng);
  Graph g;
  const auto got = vec(conv_pointwise(g, x, w, b));
  const auto want = oracle::conv_pointwise(x, w, b);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-14);
}

TEST(ConvDepthwise, IdentityZeroAndOracle) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor(Dims{1, 2, 3, 3}, rng);
  Graph g;
  EXPECT_EQ(vec(conv_depthwise_1x1(g, x, Tensor(Dims{1, 2, 1, 1}, 1.0), Tensor(Dims{1, 2, 1, 1}))), vec(x));
  const Tensor zero = conv_depthwise_1x1(g, x, Tensor(Dims{1, 2, 1, 1}), Tensor(Dims{1, 2, 1, 1}));
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  const Tensor y = conv_depthwise_1x1(g, x, Tensor(Dims{1, 2, 1, 1}, std::vector<double>{2, -1}), Tensor(Dims{1, 2, 1, 1}));
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(y.data()[i], 2.0 * x.data()[i]);
    EXPECT_EQ(y.data()[9 + i], -x.data()[9 + i]);
  }
}

TEST(Conv3x3, DeltaKernelIsIdentity) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor(Dims{1, 1, 5, 4}, rng);
  Tensor w(Dims{1, 1, 3, 3});
  w.at(0, 0, 1, 1) = 1.0;
  Graph g;
  EXPECT_EQ(vec(conv3x3(g, x, w, Tensor(Dims{1, 1, 1, 1}), 1)), vec(x));
}

TEST(Conv3x3, OnesKernelCentreIsNine) {
  Graph g;
  const Tensor y = conv3x3(g, Tensor(Dims{1, 1, 5, 5}, 1.0), Tensor(Dims{1, 1, 3, 3}, 1.0), Tensor(), 1);
  EXPECT_EQ(y.at(0, 0, 2, 2), 9.0);
  EXPECT_EQ(y.at(0, 0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 0, 0, 2), 6.0);
}

TEST(Conv3x3, MatchesNaiveOracle) {
  std::mt19937_64 rng(9);
  for (std::size_t stride : {1, 2}) {
    const Tensor x = random_tensor(Dims{2, 3, 7, 6}, rng);
    const Tensor w = random_tensor(Dims{4, 3, 3, 3}, rng);
    const Tensor b = random_tensor(Dims{1, 4, 1, 1}, rng);
    Graph g;
    const Tensor y = conv3x3(g, x, w, b, stride);
    EXPECT_EQ(y.dims(), (Dims{2, 4, (7 - 1) / stride + 1, (6 - 1) / stride + 1}));
    const auto want = oracle::conv3x3(x, w, b, stride);
    ASSERT_EQ(y.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y.data()[i], want[i], 1e-13);
  }
}

TEST(Conv3x3, BadStrideRejected) {
  Graph g;
  EXPECT_THROW(conv3x3(g, Tensor(Dims{1, 1, 4, 4}), Tensor(Dims{1, 1, 3, 3}), Tensor(), 3), ShapeError);
}

TEST(MedianFilter, ConstantInputUnchanged) {
  Graph g;
  const Tensor x(Dims{1, 2, 4, 4}, 3.25);
  for (std::size_t k : {3, 5, 7}) EXPECT_EQ(vec(median_filter(g, x, k)), vec(x));
}

TEST(MedianFilter, SpikeIsRemoved) {
  Graph g;
  const Tensor y = median_filter(g, map3({1, 1, 1, 1, 9, 1, 1, 1, 1}), 3);
  for (double v : y.data()) EXPECT_EQ(v, 1.0);
}

TEST(MedianFilter, Random6x6Kernel5MatchesSortOracle) {
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor(Dims{1, 1, 6, 6}, rng);
  Graph g;
  EXPECT_EQ(vec(median_filter(g, x, 5)), oracle::median_filter(x, 5));
}

TEST(MedianFilter, EvenKernelRejected) {
  Graph g;
  EXPECT_THROW(median_filter(g, Tensor(Dims{1, 1, 3, 3}), 4), ConfigError);
  EXPECT_THROW(mean_filter(g, Tensor(Dims{1, 1, 3, 3}), 9), ConfigError);
}

TEST(MedianFilter, GradientRoutesToTheMedianPixel) {
  // Centre window of [[1,1,1],[1,9,1],[1,1,1]] has median 1 held by several
  // pixels; every output must send its whole gradient to exactly one input.
  Tensor x = map3({1, 1, 1, 1, 9, 1, 1, 1, 1});
  x.set_requires_grad(true);
  Graph g;
  g.backward(sum(g, median_filter(g, x, 3)));
  double total = 0.0;
  for (double v : x.grad()) total += v;
  EXPECT_EQ(total, 9.0);
  EXPECT_EQ(x.grad()[4], 0.0);
}

TEST(MeanFilter, MatchesOracle) {
  std::mt19937_64 rng(11);
  const Tensor x = random_tensor(Dims{2, 2, 5, 4}, rng);
  Graph g;
  for (std::size_t k : {3, 5, 7}) {
    const auto got = vec(mean_filter(g, x, k));
    const auto want = oracle::mean_filter(x, k);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], want[i]);
  }
}

TEST(Pooling, ConstantAndSmallMap) {
  Graph g;
  const Tensor c(Dims{1, 2, 3, 3}, -0.75);
  EXPECT_EQ(gap(g, c).data()[1], -0.75);
  EXPECT_EQ(gmp(g, c).data()[1], -0.75);
  const Tensor m(Dims{1, 1, 2, 2}, std::vector<double>{1, 3, 2, 4});
  EXPECT_EQ(gap(g, m).item(), 2.5);
  EXPECT_EQ(gmp(g, m).item(), 4.0);
}

TEST(Pooling, GmpGradientGoesToTheMaximum) {
  Tensor m(Dims{1, 1, 2, 2}, std::vector<double>{1, 3, 2, 4});
  m.set_requires_grad(true);
  Graph g;
  g.backward(gmp(g, m));
  EXPECT_EQ(m.grad(), (std::vector<double>{0, 0, 0, 1}));
}

TEST(Pooling, GmpTieGoesToFirst) {
  Tensor m(Dims{1, 1, 1, 3}, std::vector<double>{5, 5, 1});
  m.set_requires_grad(true);
  Graph g;
  g.backward(gmp(g, m));
  EXPECT_EQ(m.grad(), (std::vector<double>{1, 0, 0}));
}

TEST(Mlp2, ZeroWeightsGiveZero) {
  std::mt19937_64 rng(12);
  Graph g;
  const Tensor y = mlp2(g, random_tensor(Dims{2, 8, 1, 1}, rng), Tensor(Dims{4, 8, 1, 1}), Tensor(Dims{8, 4, 1, 1}));
  ASSERT_EQ(y.size(), 16u);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Mlp2, IdentityPassthroughOnPositiveInputs) {
  std::mt19937_64 rng(13);
  const Tensor x = random_tensor(Dims{1, 4, 1, 1}, rng, 0.1, 1.0);
  Tensor eye(Dims{4, 4, 1, 1});
  for (std::size_t i = 0; i < 4; ++i) eye.at(i, i, 0, 0) = 1.0;
  Graph g;
  EXPECT_EQ(vec(mlp2(g, x, eye, eye)), vec(x));
}

TEST(Mlp2, MatchesMatmulOracle) {
  std::mt19937_64 rng(14);
  const Tensor x = random_tensor(Dims{2, 6, 1, 1}, rng);
  const Tensor w1 = random_tensor(Dims{3, 6, 1, 1}, rng);
  const Tensor w2 = random_tensor(Dims{6, 3, 1, 1}, rng);
  Graph g;
  const Tensor y = mlp2(g, x, w1, w2);
  for (std::size_t n = 0; n < 2; ++n) {
    std::vector<double> h(3);
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t i = 0; i < 6; ++i) h[j] += w1.at(j, i, 0, 0) * x.at(n, i, 0, 0);
      h[j] = std::max(h[j], 0.0);
    }
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 3; ++j) s += w2.at(i, j, 0, 0) * h[j];
      EXPECT_NEAR(y.at(n, i, 0, 0), s, 1e-14);
    }
  }
}

TEST(Concat, EmptyChannelAndRoundTrip) {
  std::mt19937_64 rng(15);
  const Tensor a = random_tensor(Dims{2, 3, 2, 2}, rng);
  const Tensor b = random_tensor(Dims{2, 2, 2, 2}, rng);
  Graph g;
  EXPECT_EQ(vec(concat_channels(g, a, Tensor(Dims{2, 0, 2, 2}))), vec(a));
  const Tensor ab = concat_channels(g, a, b);
  EXPECT_EQ(vec(slice_channels(g, ab, 0, 3)), vec(a));
  EXPECT_EQ(vec(slice_channels(g, ab, 3, 2)), vec(b));
}

TEST(Concat, BackwardSplitsByChannelRange) {
  Tensor a(Dims{1, 1, 1, 2}, 1.0);
  Tensor b(Dims{1, 2, 1, 2}, 1.0);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  const Tensor w(Dims{1, 3, 1, 2}, std::vector<double>{1, 2, 3, 4, 5, 6});
  Graph g;
  g.backward(sum(g, mul(g, concat_channels(g, a, b), w)));
  EXPECT_EQ(a.grad(), (std::vector<double>{1, 2}));
  EXPECT_EQ(b.grad(), (std::vector<double>{3, 4, 5, 6}));
}

// A few random shapes per op; the acceptance run sweeps twenty.
TEST(GradCheck, EveryOpOnRandomShapes) {
  std::mt19937_64 rng(2024);
  for (const auto& c : pel::testing::op_cases()) {
    for (int trial = 0; trial < 4; ++trial) {
      const auto r = c.run(rng);
      EXPECT_TRUE(r.ok()) << c.name << ": " << r.failed << "/" << r.checked << " worst " << r.worst;
    }
  }
}
