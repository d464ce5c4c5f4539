#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "pel/errors.hpp"
#include "pel/metrics.hpp"

using namespace pel;

TEST(Auc, PerfectSeparation) {
  const std::vector<double> s{0.9, 0.8, 0.1, 0.2};
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_EQ(compute_auc(s, y), 1.0);
  EXPECT_EQ(compute_eer(s, y), 0.0);
  EXPECT_EQ(compute_acc(s, y), 1.0);
}

TEST(Auc, ThreeOfFourPairs) {
  const std::vector<double> s{0.8, 0.3, 0.6, 0.1};
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_EQ(compute_auc(s, y), 0.75);
}

TEST(Auc, AllTiesIsOneHalf) {
  const std::vector<double> s(6, 0.4);
  const std::vector<int> y{1, 0, 1, 0, 1, 0};
  EXPECT_EQ(compute_auc(s, y), 0.5);
}

TEST(Auc, MatchesPairCountingWithTies) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 40)(rng);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::uniform_int_distribution<int>(0, 5)(rng) / 5.0;
      y[i] = static_cast<int>(i % 2);
    }
    EXPECT_NEAR(compute_auc(s, y), oracle::auc_pairs(s, y), 1e-12);
  }
}

TEST(Auc, SingleClassRejected) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<int> y{1, 1};
  EXPECT_THROW(compute_auc(s, y), MetricError);
  EXPECT_THROW(compute_eer(s, y), MetricError);
}

TEST(Eer, FullyInvertedIsOne) {
  const std::vector<double> s{0.1, 0.2, 0.8, 0.9};
  const std::vector<int> y{1, 1, 0, 0};
  EXPECT_EQ(compute_eer(s, y), 1.0);
}

TEST(Eer, OverlappingClassesInsideUnitRange) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  std::vector<double> s(200);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    y[i] = static_cast<int>(i % 2);
    s[i] = z(rng) + (y[i] ? 1.0 : 0.0);
  }
  const double e = compute_eer(s, y);
  EXPECT_GT(e, 0.0);
  EXPECT_LT(e, 0.5);
}

TEST(Acc, ThresholdAtOneHalfCountsAsFake) {
  const std::vector<double> s{0.5, 0.49};
  const std::vector<int> y{1, 0};
  EXPECT_EQ(compute_acc(s, y), 1.0);
}

TEST(Report, FromSamples) {
  const EvalReport r = EvalReport::from_samples({{"a", 1, 0.9}, {"b", 0, 0.2}, {"c", 1, 0.4}, {"d", 0, 0.6}});
  EXPECT_EQ(r.acc, 0.5);
  EXPECT_EQ(r.auc, 0.75);
  EXPECT_EQ(r.samples.size(), 4u);
}
