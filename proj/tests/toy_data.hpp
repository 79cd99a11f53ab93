#pragma once

// Small random encoded datasets for model-level tests.

#include <cstdint>
#include <random>
#include <vector>

#include "mdbench/encoded.hpp"

namespace testsupport {

using mdbench::DenseMatrix;
using mdbench::EncodedDataset;
using mdbench::EncodingKind;

inline std::vector<int> alternating_labels(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  return y;
}

inline EncodedDataset toy_dense(std::mt19937_64& rng, std::size_t n, std::size_t d, bool binary = false,
                                std::vector<std::size_t> blocks = {}) {
  EncodedDataset ds;
  ds.kind = EncodingKind::dense_matrix;
  DenseMatrix m(n, d);
  std::normal_distribution<double> g(0.0, 1.0);
  std::bernoulli_distribution b(0.3);
  for (auto& v : m.data) v = binary ? (b(rng) ? 1.0 : 0.0) : g(rng);
  ds.payload = std::move(m);
  ds.blocks = std::move(blocks);
  ds.labels = alternating_labels(n);
  for (std::size_t i = 0; i < n; ++i) ds.app_ids.push_back("a" + std::to_string(i));
  return ds;
}

inline EncodedDataset toy_tokens(std::mt19937_64& rng, std::size_t n, std::size_t vocab, std::size_t maxlen) {
  EncodedDataset ds;
  ds.kind = EncodingKind::token_sequences;
  mdbench::TokenSequences t;
  t.vocab = vocab;
  t.maxlen = maxlen;
  std::uniform_int_distribution<std::int32_t> tok(1, static_cast<std::int32_t>(vocab) - 1);
  std::uniform_int_distribution<std::size_t> len(1, maxlen);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::int32_t> s(len(rng));
    for (auto& x : s) x = tok(rng);
    t.sequences.push_back(std::move(s));
  }
  ds.payload = std::move(t);
  ds.labels = alternating_labels(n);
  for (std::size_t i = 0; i < n; ++i) ds.app_ids.push_back("a" + std::to_string(i));
  return ds;
}

inline EncodedDataset toy_one_hot(std::mt19937_64& rng, std::size_t n, std::size_t vocab, std::size_t length) {
  EncodedDataset ds;
  ds.kind = EncodingKind::one_hot_sequence;
  mdbench::OneHotSequences o;
  o.vocab = vocab;
  o.length = length;
  std::uniform_int_distribution<std::int32_t> tok(0, static_cast<std::int32_t>(vocab) - 1);
  std::uniform_int_distribution<std::size_t> len(1, length);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::int32_t> s(len(rng));
    for (auto& x : s) x = tok(rng);
    o.sequences.push_back(std::move(s));
  }
  ds.payload = std::move(o);
  ds.labels = alternating_labels(n);
  for (std::size_t i = 0; i < n; ++i) ds.app_ids.push_back("a" + std::to_string(i));
  return ds;
}

inline mdbench::AttributedGraph toy_graph(std::mt19937_64& rng, std::size_t n_nodes, std::size_t dim) {
  mdbench::AttributedGraph g;
  g.n_nodes = n_nodes;
  g.features = DenseMatrix(n_nodes, dim);
  std::bernoulli_distribution b(0.4);
  for (auto& v : g.features.data) v = b(rng) ? 1.0 : 0.0;
  for (std::uint32_t a = 0; a < n_nodes; ++a) {
    for (std::uint32_t c = a + 1; c < n_nodes; ++c) {
      if (b(rng)) g.edges.emplace_back(a, c);
    }
  }
  return g;
}

// Every app gets 0..max_subgraphs subgraphs (at least one for the first two).
inline EncodedDataset toy_graphs(std::mt19937_64& rng, std::size_t n, std::size_t dim, std::size_t max_subgraphs = 3) {
  EncodedDataset ds;
  ds.kind = EncodingKind::graph_batch;
  mdbench::GraphBatch batch;
  batch.feature_dim = dim;
  std::uniform_int_distribution<std::size_t> count(0, max_subgraphs);
  std::uniform_int_distribution<std::size_t> size(1, 6);
  for (std::size_t i = 0; i < n; ++i) {
    mdbench::GraphSample s;
    const std::size_t k = i < 2 ? 1 + count(rng) % max_subgraphs : count(rng);
    for (std::size_t j = 0; j < k; ++j) s.subgraphs.push_back(toy_graph(rng, size(rng), dim));
    batch.samples.push_back(std::move(s));
  }
  ds.payload = std::move(batch);
  ds.labels = alternating_labels(n);
  for (std::size_t i = 0; i < n; ++i) ds.app_ids.push_back("a" + std::to_string(i));
  return ds;
}

}  // namespace testsupport
