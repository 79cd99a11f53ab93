#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mdbench/embeddings.hpp"
#include "mdbench/error.hpp"

using namespace mdbench;

TEST(Embeddings, SingleRepeatedToken) {
  const std::vector<std::vector<std::string>> corpus{{"a", "a", "a", "a"}, {"a", "a"}};
  const auto r = train_skipgram(corpus, SkipGramOptions{});
  ASSERT_EQ(r.table.size(), 1u);
  EXPECT_EQ(r.table.dim(), 10u);
  for (double v : r.table.data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Embeddings, InvalidInputThrows) {
  EXPECT_THROW(train_skipgram({}, SkipGramOptions{}), Error);
  SkipGramOptions zero;
  zero.dim = 0;
  EXPECT_THROW(train_skipgram({{"a", "b"}}, zero), Error);
}

TEST(Embeddings, VocabularySortedAndDeterministic) {
  const std::vector<std::vector<std::string>> corpus{{"c", "a", "b"}, {"b", "d"}};
  SkipGramOptions opt;
  opt.seed = 4;
  const auto a = train_skipgram(corpus, opt);
  const auto b = train_skipgram(corpus, opt);
  EXPECT_EQ(a.table.vocabulary(), (std::vector<std::string>{"a", "b", "c", "d"}));
  EXPECT_EQ(a.table.data(), b.table.data());
  EXPECT_EQ(a.table.index_of("c"), 2u);
  EXPECT_FALSE(a.table.index_of("zz").has_value());
}

TEST(Embeddings, CooccurringTokensEndUpCloser) {
  // Two disjoint token groups that only co-occur inside their group.
  std::mt19937_64 rng(1);
  std::vector<std::vector<std::string>> corpus;
  const std::vector<std::string> g1{"a1", "a2", "a3", "a4"}, g2{"b1", "b2", "b3", "b4"};
  for (int i = 0; i < 300; ++i) {
    const auto& g = i % 2 ? g1 : g2;
    std::vector<std::string> s;
    for (int t = 0; t < 8; ++t) s.push_back(g[rng() % g.size()]);
    corpus.push_back(std::move(s));
  }
  SkipGramOptions opt;
  opt.epochs = 10;
  const auto r = train_skipgram(corpus, opt);
  auto vec = [&](const std::string& t) { return r.table.vector(*r.table.index_of(t)); };
  EXPECT_GT(cosine_similarity(vec("a1"), vec("a2")), cosine_similarity(vec("a1"), vec("b1")));
  EXPECT_LT(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(Embeddings, CosineBasics) {
  const std::vector<double> a{1, 0}, b{0, 2}, c{3, 0}, z{0, 0};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, c), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(a, z), 0.0);
}

TEST(Embeddings, KMeansTwoPoints) {
  const std::vector<double> pts{0.0, 10.0};
  const auto km = kmeans(pts, 2, 1, 2, 50, 1);
  std::vector<double> centers(km.centers);
  std::sort(centers.begin(), centers.end());
  EXPECT_EQ(centers, (std::vector<double>{0.0, 10.0}));
}

TEST(Embeddings, KMeansSingleClusterIsMean) {
  const std::vector<double> pts{1, 2, 3, 4, 5, 6};
  const auto km = kmeans(pts, 3, 2, 1, 50, 1);
  EXPECT_NEAR(km.centers[0], 3.0, 1e-12);
  EXPECT_NEAR(km.centers[1], 4.0, 1e-12);
}

TEST(Embeddings, KMeansClampsK) {
  const std::vector<double> pts{0, 1, 2};
  const auto km = kmeans(pts, 3, 1, 5, 50, 1);
  EXPECT_EQ(km.k, 3u);
  EXPECT_THROW(kmeans(std::vector<double>{}, 0, 1, 2, 10, 1), Error);
  EXPECT_THROW(kmeans(pts, 3, 1, 0, 10, 1), Error);
}

TEST(Embeddings, KMeansInertiaNeverIncreasesAndAssignsNearest) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 5 + rng() % 60, dim = 1 + rng() % 4, k = 1 + rng() % 6;
    std::vector<double> pts(n * dim);
    for (auto& v : pts) v = g(rng) + static_cast<double>(rng() % 3) * 4.0;
    const auto km = kmeans(pts, n, dim, k, 100, rng());
    for (std::size_t i = 1; i < km.inertia_history.size(); ++i) {
      EXPECT_LE(km.inertia_history[i], km.inertia_history[i - 1]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_EQ(km.assignment[i], nearest_center(km, std::span<const double>(pts.data() + i * dim, dim)));
    }
  }
}
