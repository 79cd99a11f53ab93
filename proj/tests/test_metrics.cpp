#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mdbench/error.hpp"
#include "mdbench/metrics.hpp"

using namespace mdbench;

TEST(Metrics, ConfusionExamples) {
  EXPECT_EQ(confusion(std::vector<int>{1, 0}, std::vector<int>{1, 0}), (ConfusionCounts{1, 0, 1, 0}));
  EXPECT_EQ(confusion(std::vector<int>{1, 0}, std::vector<int>{0, 1}), (ConfusionCounts{0, 1, 0, 1}));
  EXPECT_EQ(confusion(std::vector<int>{}, std::vector<int>{}), ConfusionCounts{});
  EXPECT_THROW(confusion(std::vector<int>{1}, std::vector<int>{1, 0}), Error);
  EXPECT_THROW(confusion(std::vector<int>{2}, std::vector<int>{1}), Error);
}

TEST(Metrics, ScoreExamples) {
  const ConfusionCounts c{2, 1, 0, 1};
  EXPECT_NEAR(f1_score(c).value, 2.0 / 3.0, 1e-15);
  const ConfusionCounts perfect{5, 0, 5, 0};
  EXPECT_EQ(f1_score(perfect).value, 1.0);
  EXPECT_EQ(accuracy(perfect).value, 1.0);
  EXPECT_EQ(tpr(perfect).value, 1.0);
  EXPECT_EQ(fpr(perfect).value, 0.0);
  const ConfusionCounts negatives{0, 0, 7, 0};
  EXPECT_TRUE(f1_score(negatives).undefined);
  EXPECT_EQ(f1_score(negatives).value, 0.0);
  EXPECT_TRUE(tpr(negatives).undefined);
  EXPECT_FALSE(fpr(negatives).undefined);
}

TEST(Metrics, RandomConfusionsMatchDirectFormulas) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 50;
    std::vector<int> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      p[i] = static_cast<int>(rng() % 2);
    }
    const auto c = confusion(y, p);
    EXPECT_EQ(c.total(), static_cast<std::int64_t>(n));
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < n; ++i) {
      tp += y[i] && p[i];
      fp += !y[i] && p[i];
      fn += y[i] && !p[i];
    }
    if (tp + fp + fn > 0) {
      EXPECT_DOUBLE_EQ(f1_score(c).value, 2.0 * tp / (2.0 * tp + fp + fn));
    }
    const auto f = f1_score(c).value;
    EXPECT_GE(f, 0.0);
    EXPECT_LE(f, 1.0);
  }
}

TEST(Metrics, AutExamples) {
  EXPECT_DOUBLE_EQ(aut(std::vector<double>{0.7, 0.7, 0.7, 0.7}), 0.7);
  EXPECT_DOUBLE_EQ(aut(std::vector<double>{1.0, 0.5}), 0.75);
  EXPECT_NEAR(aut(std::vector<double>{0.8, 0.6, 0.4}), 0.6, 1e-15);
  EXPECT_THROW(aut(std::vector<double>{0.5}), Error);
}

TEST(Metrics, AutIsReversalInvariantAndBounded) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(2 + rng() % 30);
    for (auto& v : s) v = u(rng);
    auto r = s;
    std::reverse(r.begin(), r.end());
    EXPECT_NEAR(aut(s), aut(r), 1e-12);
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    EXPECT_GE(aut(s), *lo - 1e-12);
    EXPECT_LE(aut(s), *hi + 1e-12);
  }
}

TEST(Metrics, EvolutionSeriesMarksMissingBuckets) {
  const std::vector<ConfusionCounts> periods{{8, 1, 9, 2}, {0, 2, 8, 0}, {5, 0, 5, 5}};
  const auto t = evolution_series(periods, MetricKind::tpr);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_FALSE(t.missing[0]);
  EXPECT_TRUE(t.missing[1]);
  EXPECT_NEAR(t.aut_over(3).value, (0.8 + 0.5) / 2.0, 1e-15);
  const auto f = evolution_series(periods, MetricKind::f1);
  EXPECT_DOUBLE_EQ(f.aut_over(2).value, (f.values[0] + f.values[1]) / 2.0);
}

TEST(Metrics, AutOverSinglePointIsUndefined) {
  MetricSeries s;
  s.values = {0.9, 0.0};
  s.missing = {false, true};
  EXPECT_TRUE(s.aut_over(2).undefined);
}

TEST(Metrics, ConfusionAccumulates) {
  ConfusionCounts a{1, 2, 3, 4};
  a += ConfusionCounts{1, 1, 1, 1};
  EXPECT_EQ(a, (ConfusionCounts{2, 3, 4, 5}));
}
