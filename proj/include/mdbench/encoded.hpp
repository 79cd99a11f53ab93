#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "mdbench/record.hpp"

namespace mdbench {

enum class EncodingKind { dense_matrix, kernel_matrix, token_sequences, one_hot_sequence, graph_batch };

std::string_view to_string(EncodingKind kind);

struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  void append_row(std::span<const double> values);

  bool operator==(const DenseMatrix&) const = default;
};

// Token ids without padding; the padded view is maxlen long with id 0 filling
// the tail.
struct TokenSequences {
  std::vector<std::vector<std::int32_t>> sequences;
  std::size_t maxlen = 0;
  std::size_t vocab = 0;  // including the reserved id 0

  bool operator==(const TokenSequences&) const = default;
};

// Compact L x V one-hot images: row t is hot at sequences[i][t], rows past the
// sequence end are zero.
struct OneHotSequences {
  std::vector<std::vector<std::int32_t>> sequences;
  std::size_t length = 0;
  std::size_t vocab = 0;

  DenseMatrix to_dense(std::size_t i) const;
  bool operator==(const OneHotSequences&) const = default;
};

struct AttributedGraph {
  std::size_t n_nodes = 0;
  DenseMatrix features;                                  // n_nodes x feature_dim
  std::vector<std::pair<std::uint32_t, std::uint32_t>>
      edges;                                             // undirected, a < b, deduplicated

  bool operator==(const AttributedGraph&) const = default;
};

struct GraphSample {
  std::vector<AttributedGraph> subgraphs;  // empty when the app has no sensitive node

  bool operator==(const GraphSample&) const = default;
};

struct GraphBatch {
  std::vector<GraphSample> samples;
  std::size_t feature_dim = 0;

  bool operator==(const GraphBatch&) const = default;
};

struct EncodedDataset {
  EncodingKind kind = EncodingKind::dense_matrix;
  std::variant<DenseMatrix, TokenSequences, OneHotSequences, GraphBatch> payload;
  // Column block boundaries of a dense matrix holding several modalities
  // ({0, b1, ..., cols}); empty for single-block inputs.
  std::vector<std::size_t> blocks;
  std::vector<std::string> app_ids;
  std::vector<int> labels;  // 1 malicious, 0 benign

  std::size_t rows() const { return labels.size(); }
  std::size_t feature_dim() const;  // columns / vocab / node attribute width

  const DenseMatrix& dense() const;
  DenseMatrix& dense();
  const TokenSequences& tokens() const;
  const OneHotSequences& one_hot() const;
  const GraphBatch& graphs() const;

  // Rows i in `rows`, in that order.
  EncodedDataset subset(std::span<const std::size_t> rows) const;

  bool operator==(const EncodedDataset&) const = default;
};

int binary_label(Label label);  // throws for grayware/unknown
void attach_labels(EncodedDataset& ds, std::span<const FeatureRecord> records);

// Binary cache container: magic, kind, row metadata, shape header, then
// little-endian float32 values or LEB128 varint token streams.
void save_encoded(const EncodedDataset& ds, const std::string& path);
EncodedDataset load_encoded(const std::string& path);

std::uint64_t corpus_hash(std::span<const FeatureRecord> records);
std::string cache_key(std::string_view approach, std::uint64_t corpus_hash, std::uint64_t config_hash);

}  // namespace mdbench
