#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "pel/enhance.hpp"
#include "pel/errors.hpp"
#include "pel/ops.hpp"

using namespace pel;
using pel::testing::random_tensor;

namespace {

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(NoiseBlock, IdentityAtInitialisation) {
  std::mt19937_64 rng(1);
  for (FilterKind kind : {FilterKind::median, FilterKind::mean}) {
    for (const std::vector<std::size_t>& ks : {std::vector<std::size_t>{3}, std::vector<std::size_t>{3, 5, 7}}) {
      ParameterRegistry reg;
      const NoiseBlock nb("n", 4, NoiseFilter{kind, ks}, reg);
      const Tensor x = random_tensor(Dims{2, 4, 5, 5}, rng, -3, 3);
      Graph g;
      EXPECT_EQ(vec(nb.forward(g, x)), vec(x));
    }
  }
}

TEST(NoiseBlock, ConstantInputAddsHalfScalePlusBias) {
  ParameterRegistry reg;
  const NoiseBlock nb("n", 2, NoiseFilter{}, reg);
  Tensor(nb.scale).data()[0] = 2.0;
  Tensor(nb.scale).data()[1] = -1.0;
  Tensor(nb.bias).data()[1] = 0.25;
  const Tensor x(Dims{1, 2, 3, 3}, 4.0);
  Graph g;
  const Tensor y = nb.forward(g, x);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(y.data()[i], 4.0 + 0.5 * 2.0);
    EXPECT_EQ(y.data()[9 + i], 4.0 - 0.5 + 0.25);
  }
}

TEST(SelfEnhance, SpikeExample) {
  ParameterRegistry reg;
  const NoiseBlock nb("n", 1, NoiseFilter{}, reg);
  Tensor(nb.scale).data()[0] = 1.0;
  const Tensor x(Dims{1, 1, 3, 3}, std::vector<double>{1, 1, 1, 1, 9, 1, 1, 1, 1});
  Graph g;
  const Tensor y = self_enhance(g, x, &nb, nullptr);
  EXPECT_NEAR(y.data()[4], 9.0 + sig(8.0), 1e-15);
  EXPECT_NEAR(y.data()[4], 9.99966, 1e-5);
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 7, 8}) EXPECT_EQ(y.data()[i], 1.5);
}

TEST(ChannelAttention, ZeroMlpScalesByOneAndAHalf) {
  std::mt19937_64 rng(2);
  ParameterRegistry reg;
  const ChannelAttention ca("a", 8, 16, reg, rng);
  for (double& v : Tensor(ca.w1).data()) v = 0.0;
  for (double& v : Tensor(ca.w2).data()) v = 0.0;
  const Tensor x = random_tensor(Dims{2, 8, 3, 3}, rng);
  Graph g;
  const Tensor y = ca.forward(g, x);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.data()[i], 1.5 * x.data()[i]);
}

TEST(ChannelAttention, HiddenWidth) {
  EXPECT_EQ(attention_hidden(64, 16), 4u);
  EXPECT_EQ(attention_hidden(16, 16), 4u);
  EXPECT_EQ(attention_hidden(128, 16), 8u);
  std::mt19937_64 rng(3);
  ParameterRegistry reg;
  const ChannelAttention ca("a", 32, 16, reg, rng);
  EXPECT_EQ(ca.w1.dims(), (Dims{4, 32, 1, 1}));
  EXPECT_EQ(ca.w2.dims(), (Dims{32, 4, 1, 1}));
}

TEST(ChannelAttention, FactorsInUnitInterval) {
  std::mt19937_64 rng(4);
  ParameterRegistry reg;
  const ChannelAttention ca("a", 6, 16, reg, rng);
  Graph g;
  const Tensor factors = ca.factors(g, random_tensor(Dims{3, 6, 4, 4}, rng, -5, 5));
  for (double v : factors.data()) {
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 1.0);
  }
}

TEST(MutualEnhance, IdentityAtInitialisation) {
  std::mt19937_64 rng(5);
  ParameterRegistry reg;
  const MutualEnhance m("m", 3, 5, reg);
  const Tensor r = random_tensor(Dims{2, 3, 4, 4}, rng);
  const Tensor f = random_tensor(Dims{2, 5, 4, 4}, rng);
  Graph g;
  const auto [ro, fo] = m.forward(g, r, f);
  EXPECT_EQ(vec(ro), vec(r));
  EXPECT_EQ(vec(fo), vec(f));
}

TEST(MutualEnhance, ZeroAttentionUnitScale) {
  std::mt19937_64 rng(6);
  ParameterRegistry reg;
  const MutualEnhance m("m", 2, 2, reg);
  for (double& v : Tensor(m.scale_rgb).data()) v = 1.0;
  for (double& v : Tensor(m.scale_freq).data()) v = 1.0;
  const Tensor r = random_tensor(Dims{1, 2, 3, 3}, rng);
  const Tensor f = random_tensor(Dims{1, 2, 3, 3}, rng);
  Graph g;
  const auto [ro, fo] = m.forward(g, r, f);
  for (std::size_t i = 0; i < r.size(); ++i) {
    EXPECT_EQ(ro.data()[i], 1.5 * r.data()[i]);
    EXPECT_EQ(fo.data()[i], 1.5 * f.data()[i]);
  }
}

TEST(MutualEnhance, MatchesStepByStepOracle) {
  std::mt19937_64 rng(7);
  ParameterRegistry reg;
  const MutualEnhance m("m", 2, 3, reg);
  for (auto& p : reg.all()) {
    for (double& v : p.tensor.data()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  }
  const Tensor r = random_tensor(Dims{2, 2, 3, 4}, rng);
  const Tensor f = random_tensor(Dims{2, 3, 3, 4}, rng);
  Graph g;
  const auto [ro, fo] = m.forward(g, r, f);
  for (std::size_t n = 0; n < 2; ++n) {
    for (std::size_t y = 0; y < 3; ++y) {
      for (std::size_t x = 0; x < 4; ++x) {
        double a[2];
        for (std::size_t s = 0; s < 2; ++s) {
          double z = m.attn_bias.data()[s];
          for (std::size_t c = 0; c < 2; ++c) z += m.attn_weight.at(s, c, 0, 0) * r.at(n, c, y, x);
          for (std::size_t c = 0; c < 3; ++c) z += m.attn_weight.at(s, 2 + c, 0, 0) * f.at(n, c, y, x);
          a[s] = sig(z);
        }
        for (std::size_t c = 0; c < 2; ++c) {
          const double want = r.at(n, c, y, x) + m.scale_rgb.data()[c] * r.at(n, c, y, x) * a[0] + m.bias_rgb.data()[c];
          EXPECT_NEAR(ro.at(n, c, y, x), want, 1e-14);
        }
        for (std::size_t c = 0; c < 3; ++c) {
          const double want =
              f.at(n, c, y, x) + m.scale_freq.data()[c] * f.at(n, c, y, x) * a[1] + m.bias_freq.data()[c];
          EXPECT_NEAR(fo.at(n, c, y, x), want, 1e-14);
        }
      }
    }
  }
}

TEST(MutualEnhance, SpatialMismatchRejected) {
  ParameterRegistry reg;
  const MutualEnhance m("m", 1, 1, reg);
  Graph g;
  EXPECT_THROW(m.forward(g, Tensor(Dims{1, 1, 4, 4}), Tensor(Dims{1, 1, 2, 2})), ShapeError);
}

TEST(SpatialAttention, IdentityAtInitialisation) {
  std::mt19937_64 rng(8);
  ParameterRegistry reg;
  const SpatialAttention s("s", 3, reg);
  const Tensor x = random_tensor(Dims{1, 3, 4, 4}, rng);
  Graph g;
  EXPECT_EQ(vec(s.forward(g, x)), vec(x));
}

TEST(Placement, FourBlocks) {
  const auto p = placement_plan(4);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_TRUE(p[0].noise && p[1].noise && !p[2].noise && !p[3].noise);
  EXPECT_TRUE(!p[0].channel_attn && p[1].channel_attn && p[2].channel_attn && !p[3].channel_attn);
  EXPECT_TRUE(!p[0].mutual && p[1].mutual && p[2].mutual && !p[3].mutual);
}

TEST(Placement, ThreeAndSixBlocks) {
  const auto p3 = placement_plan(3);
  EXPECT_TRUE(p3[0].noise && p3[1].noise && !p3[2].noise);
  EXPECT_TRUE(!p3[0].mutual && p3[1].mutual && !p3[2].mutual);
  EXPECT_TRUE(p3[1].channel_attn && !p3[2].channel_attn);
  const auto p6 = placement_plan(6);
  for (std::size_t b = 0; b < 6; ++b) {
    EXPECT_EQ(p6[b].noise, b < 2);
    EXPECT_EQ(p6[b].channel_attn, b >= 1 && b <= 4);
    EXPECT_EQ(p6[b].mutual, b >= 1 && b <= 4);
  }
  EXPECT_THROW(placement_plan(2), ConfigError);
}
