#include <gtest/gtest.h>

#include <random>

#include "mdbench/error.hpp"
#include "mdbench/graph.hpp"
#include "support.hpp"

using namespace mdbench;
using namespace mdbench::graph;

namespace {

GraphNode internal(std::int64_t id) { return {id, NodeKind::internal, std::nullopt, false}; }
GraphNode external(std::int64_t id, const std::string& api, bool sensitive = false) {
  return {id, NodeKind::external_api, api, sensitive};
}

ProgramGraph make_graph(std::vector<GraphNode> nodes, std::vector<Edge> edges) {
  ProgramGraph g;
  g.nodes = std::move(nodes);
  g.edges = std::move(edges);
  return g;
}

ProgramGraph triangle() { return make_graph({internal(0), internal(1), internal(2)}, {{0, 1}, {1, 2}, {2, 0}}); }
ProgramGraph path3() { return make_graph({internal(0), internal(1), internal(2)}, {{0, 1}, {1, 2}}); }

const std::string kSensitive = testsupport::api_pool()[0];
const std::string kPlain = testsupport::api_pool()[7];

}  // namespace

TEST(Graph, DegreeExamples) {
  for (const auto& [id, v] : degree_centrality(triangle())) EXPECT_DOUBLE_EQ(v, 1.0) << id;
  const auto p = degree_centrality(path3());
  EXPECT_DOUBLE_EQ(p.at(0), 0.5);
  EXPECT_DOUBLE_EQ(p.at(1), 1.0);
  EXPECT_DOUBLE_EQ(p.at(2), 0.5);
  auto g = make_graph({internal(0), internal(1), internal(2), internal(3), internal(4)}, {{0, 1}, {1, 2}, {2, 3}});
  EXPECT_DOUBLE_EQ(degree_centrality(g).at(4), 0.0);
  EXPECT_DOUBLE_EQ(degree_centrality(make_graph({internal(9)}, {})).at(9), 0.0);
}

TEST(Graph, HarmonicExamples) {
  for (const auto& [id, v] : harmonic_centrality(triangle())) EXPECT_DOUBLE_EQ(v, 1.0) << id;
  const auto p = harmonic_centrality(path3());
  EXPECT_DOUBLE_EQ(p.at(1), 1.0);
  EXPECT_DOUBLE_EQ(p.at(0), 0.75);
  const auto two = harmonic_centrality(make_graph({internal(0), internal(1)}, {}));
  EXPECT_DOUBLE_EQ(two.at(0), 0.0);
  EXPECT_DOUBLE_EQ(two.at(1), 0.0);
}

TEST(Graph, KatzExamples) {
  const auto empty = katz_centrality(make_graph({internal(0), internal(1), internal(2), internal(3)}, {}));
  for (const auto& [id, v] : empty) EXPECT_NEAR(v, 0.5, 1e-12) << id;
  const auto k3 = katz_centrality(triangle(), 0.1);
  EXPECT_NEAR(k3.at(0), k3.at(1), 1e-12);
  EXPECT_NEAR(k3.at(1), k3.at(2), 1e-12);
  EXPECT_THROW(katz_centrality(triangle(), 0.9, 200), Error);
}

TEST(Graph, CentralitiesMatchBruteForceOnRandomGraphs) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = testsupport::random_graph(rng, 1 + rng() % 15, 0.2);
    const auto deg = degree_centrality(g);
    const auto har = harmonic_centrality(g);
    const auto bd = testsupport::brute_degree(g);
    const auto bh = testsupport::brute_harmonic(g);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
      const auto id = g.nodes[i].node_id;
      EXPECT_EQ(deg.at(id), bd[i]);
      EXPECT_EQ(har.at(id), bh[i]);
      EXPECT_GE(har.at(id), 0.0);
      EXPECT_LE(har.at(id), 1.0);
    }
  }
}

TEST(Graph, TriadExamples) {
  const auto cat = testsupport::test_catalog();
  auto tri = make_graph({external(0, kSensitive, true), internal(1), internal(2)}, {{0, 1}, {1, 2}, {2, 0}});
  EXPECT_EQ(count_sensitive_triads(tri, cat), (TriadCounts{1, 0}));
  auto path = make_graph({internal(0), external(1, kSensitive, true), internal(2)}, {{0, 1}, {1, 2}});
  EXPECT_EQ(count_sensitive_triads(path, cat), (TriadCounts{0, 1}));
  EXPECT_EQ(count_sensitive_triads(triangle(), cat), (TriadCounts{0, 0}));
}

TEST(Graph, TriadsMatchBruteForce) {
  std::mt19937_64 rng(8);
  const auto cat = testsupport::test_catalog();
  for (int trial = 0; trial < 100; ++trial) {
    const auto g = testsupport::random_graph(rng, 3 + rng() % 10, 0.3);
    const auto b = testsupport::brute_triads(g, cat);
    EXPECT_EQ(count_sensitive_triads(g, cat), (TriadCounts{b.closed, b.open}));
  }
}

TEST(Graph, KhopExamples) {
  const auto star = make_graph({internal(10), internal(11), internal(12), internal(13)}, {{10, 11}, {12, 10}, {10, 13}});
  EXPECT_EQ(khop_subgraph(star, 10, 0).graph.nodes.size(), 1u);
  const auto whole = khop_subgraph(star, 10, 1);
  EXPECT_EQ(whole.graph.nodes.size(), 4u);
  EXPECT_EQ(whole.graph.edges.size(), 3u);
  EXPECT_EQ(whole.original_ids.front(), 10);
  auto two = make_graph({internal(0), internal(1), internal(2), internal(3), internal(4)}, {{0, 1}, {1, 2}, {3, 4}});
  EXPECT_EQ(khop_subgraph(two, 0, 10).graph.nodes.size(), 3u);
  EXPECT_THROW(khop_subgraph(star, 99, 1), Error);
}

TEST(Graph, KhopNodesAreWithinDistance) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = testsupport::random_graph(rng, 2 + rng() % 12, 0.15);
    const auto root = g.nodes[rng() % g.nodes.size()].node_id;
    const int k = static_cast<int>(rng() % 3);
    const auto sub = khop_subgraph(g, root, k);
    EXPECT_EQ(sub.graph.nodes.size(), sub.original_ids.size());
    const auto view = undirected_projection(g);
    std::vector<int> dist(view.size(), -1);
    dist[view.position.at(root)] = 0;
    std::vector<std::size_t> q{view.position.at(root)};
    for (std::size_t h = 0; h < q.size(); ++h) {
      for (auto nb : view.adjacency[q[h]]) {
        if (dist[nb] < 0) {
          dist[nb] = dist[q[h]] + 1;
          q.push_back(nb);
        }
      }
    }
    std::size_t expected = 0;
    for (int d : dist) expected += d >= 0 && d <= k;
    EXPECT_EQ(sub.original_ids.size(), expected);
    for (auto id : sub.original_ids) {
      const int d = dist[view.position.at(id)];
      EXPECT_TRUE(d >= 0 && d <= k);
    }
  }
}

TEST(Graph, DfsSequenceExamples) {
  const auto chain = make_graph({internal(0), external(1, "apiA")}, {{0, 1}});
  EXPECT_EQ(dfs_api_sequences(chain, 10, 10, 1), (std::vector<std::vector<std::string>>{{"apiA"}}));
  EXPECT_TRUE(dfs_api_sequences(ProgramGraph{}, 10, 10, 1).empty());
  const auto diamond =
      make_graph({internal(0), internal(1), internal(2), external(3, "x"), external(4, "y")},
                 {{0, 1}, {0, 2}, {1, 3}, {2, 4}, {1, 4}, {2, 3}});
  EXPECT_EQ(dfs_api_sequences(diamond, 10, 2, 1).size(), 2u);
  for (const auto& s : dfs_api_sequences(diamond, 1, 10, 3)) EXPECT_LE(s.size(), 1u);
  EXPECT_EQ(dfs_api_sequences(diamond, 10, 10, 5), dfs_api_sequences(diamond, 10, 10, 5));
}

TEST(Graph, FamilyTransitionExamples) {
  const auto& fam = FamilyAbstraction::default_families();
  const auto g = make_graph({internal(0), external(1, "android.app.Activity.finish"),
                             external(2, "android.view.View.draw"), external(3, "java.lang.String.length")},
                            {{0, 1}, {0, 2}, {0, 3}});
  const auto t = family_transition(g, fam);
  const auto self = fam.family_index(std::nullopt);
  const auto android = fam.family_index(std::string("android.app.Activity.finish"));
  const auto java = fam.family_index(std::string("java.lang.String.length"));
  EXPECT_NEAR(t.at(self, android), 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(t.at(self, java), 1.0 / 3.0, 1e-12);
  const auto none = family_transition(make_graph({internal(0)}, {}), fam);
  for (double v : none.matrix) EXPECT_EQ(v, 0.0);
  const auto loop = family_transition(
      make_graph({external(0, "android.a.B.c"), external(1, "android.d.E.f")}, {{0, 1}, {1, 0}}), fam);
  EXPECT_DOUBLE_EQ(loop.at(android, android), 1.0);
  EXPECT_EQ(fam.family_of(std::string("a.b.C.m")), "obfuscated");
}

TEST(Graph, TransitionRowsAreStochastic) {
  std::mt19937_64 rng(6);
  const auto& fam = FamilyAbstraction::default_families();
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = testsupport::random_graph(rng, 2 + rng() % 12, 0.25);
    const auto t = family_transition(g, fam);
    for (std::size_t r = 0; r < t.families.size(); ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < t.families.size(); ++c) sum += t.at(r, c);
      EXPECT_TRUE(sum == 0.0 || std::abs(sum - 1.0) < 1e-12) << sum;
    }
  }
}

TEST(Graph, CommunityExamples) {
  const auto cat = testsupport::test_catalog();
  const auto plain = community_homophily(triangle(), cat);
  EXPECT_FALSE(plain.suspicious.has_value());
  for (double h : plain.homophily) EXPECT_DOUBLE_EQ(h, 1.0);
  EXPECT_TRUE(community_homophily(ProgramGraph{}, cat).members.empty());
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = testsupport::random_graph(rng, 1 + rng() % 14, 0.2);
    const auto c = community_homophily(g, cat, 3);
    std::size_t total = 0;
    for (const auto& m : c.members) total += m.size();
    EXPECT_EQ(total, g.nodes.size());
    for (double h : c.homophily) {
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, 1.0);
    }
    bool any_sensitive = false;
    for (const auto& n : g.nodes) any_sensitive |= is_sensitive(n, cat);
    EXPECT_EQ(c.suspicious.has_value(), any_sensitive);
  }
}

TEST(Graph, InducedSubgraphKeepsIds) {
  const auto sub = induced_subgraph(path3(), {0, 1});
  EXPECT_EQ(sub.nodes.size(), 2u);
  ASSERT_EQ(sub.edges.size(), 1u);
  EXPECT_EQ(sub.edges[0], (Edge{0, 1}));
}
