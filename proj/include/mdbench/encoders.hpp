#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mdbench/embeddings.hpp"
#include "mdbench/encoded.hpp"
#include "mdbench/graph.hpp"
#include "mdbench/record.hpp"

namespace mdbench {

// Fit-on-train / transform-any contract shared by every approach encoder.
// transform never mutates records and throws Error before fit.
class Encoder {
 public:
  virtual ~Encoder() = default;

  virtual EncodingKind kind() const = 0;
  virtual void fit(std::span<const FeatureRecord> train, std::uint64_t seed) = 0;
  virtual EncodedDataset transform(std::span<const FeatureRecord> records) const = 0;
  // Human-readable output shape, e.g. "dense[5321]".
  virtual std::string shape() const = 0;

  bool fitted() const { return fitted_; }

 protected:
  void require_fitted() const;
  bool fitted_ = false;
};

// ---------------------------------------------------------------------------
// Binary bag-of-features (Drebin, Xmal, RAMDA)

enum class FeatureCategory { hardware, component, intent, permission, api_call, code_string };

std::string_view category_prefix(FeatureCategory c);  // "hardware", "component", ...

class BinaryFeatureEncoder : public Encoder {
 public:
  explicit BinaryFeatureEncoder(std::set<FeatureCategory> categories);
  static std::unique_ptr<BinaryFeatureEncoder> drebin();
  static std::unique_ptr<BinaryFeatureEncoder> xmal();
  static std::unique_ptr<BinaryFeatureEncoder> ramda();

  EncodingKind kind() const override { return EncodingKind::dense_matrix; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

  std::vector<double> transform_one(const FeatureRecord& record) const;
  // Rendered "category::name" tokens in feature order.
  std::vector<std::string> vocabulary() const;
  std::size_t size() const { return index_.size(); }

 private:
  using Key = std::pair<FeatureCategory, std::string>;
  std::vector<Key> keys(const FeatureRecord& record) const;

  std::set<FeatureCategory> categories_;
  std::map<Key, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Stateless per-record encodings

// Family transition matrix flattened row-major (|F|^2 values).
std::vector<double> encode_mamadroid(const FeatureRecord& record, const graph::FamilyAbstraction& abstraction);

// L x V one-hot opcode image. Throws Error for an opcode id >= V.
DenseMatrix encode_opcode_image(const FeatureRecord& record, std::size_t vocab_size, std::size_t maxlen);

// Entry i = centrality of catalog[i]'s node (largest value if the API has
// several nodes), 0 when absent.
std::vector<double> encode_malscan(const FeatureRecord& record, const SensitiveApiCatalog& catalog,
                                   graph::CentralityKind kind);

// |catalog| presence bits restricted to the suspicious community, then the
// closed and open sensitive-triad counts on that community.
std::vector<double> encode_homdroid(const FeatureRecord& record, const SensitiveApiCatalog& catalog,
                                    std::uint64_t seed = 0);

struct ApiPermissionMap {
  std::vector<std::string> permissions;                       // bit order
  std::map<std::string, std::vector<std::size_t>> api_to_permissions;

  std::size_t size() const { return permissions.size(); }
};

// One attributed k-hop subgraph per sensitive node. Node attributes:
// one-hot family || sensitive bit || permission-association bits.
GraphSample encode_msdroid(const FeatureRecord& record, const SensitiveApiCatalog& catalog, int k_hops,
                           const graph::FamilyAbstraction& abstraction, const ApiPermissionMap& permissions);

std::size_t msdroid_feature_dim(const graph::FamilyAbstraction& abstraction, const ApiPermissionMap& permissions);

class MamaDroidEncoder : public Encoder {
 public:
  explicit MamaDroidEncoder(const graph::FamilyAbstraction& abstraction = graph::FamilyAbstraction::default_families())
      : abstraction_(abstraction) {}
  EncodingKind kind() const override { return EncodingKind::dense_matrix; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

 private:
  graph::FamilyAbstraction abstraction_;
};

class OpcodeImageEncoder : public Encoder {
 public:
  OpcodeImageEncoder(std::size_t vocab_size, std::size_t maxlen) : vocab_(vocab_size), maxlen_(maxlen) {}
  EncodingKind kind() const override { return EncodingKind::one_hot_sequence; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

 private:
  std::size_t vocab_;
  std::size_t maxlen_;
};

class MalScanEncoder : public Encoder {
 public:
  MalScanEncoder(SensitiveApiCatalog catalog, graph::CentralityKind centrality)
      : catalog_(std::move(catalog)), centrality_(centrality) {}
  EncodingKind kind() const override { return EncodingKind::dense_matrix; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

 private:
  SensitiveApiCatalog catalog_;
  graph::CentralityKind centrality_;
};

class HomDroidEncoder : public Encoder {
 public:
  explicit HomDroidEncoder(SensitiveApiCatalog catalog) : catalog_(std::move(catalog)) {}
  EncodingKind kind() const override { return EncodingKind::dense_matrix; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

 private:
  SensitiveApiCatalog catalog_;
};

class MsDroidEncoder : public Encoder {
 public:
  MsDroidEncoder(SensitiveApiCatalog catalog, int k_hops, ApiPermissionMap permissions = {},
                 const graph::FamilyAbstraction& abstraction = graph::FamilyAbstraction::default_families())
      : catalog_(std::move(catalog)), k_hops_(k_hops), permissions_(std::move(permissions)), abstraction_(abstraction) {}
  EncodingKind kind() const override { return EncodingKind::graph_batch; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

 private:
  SensitiveApiCatalog catalog_;
  int k_hops_;
  ApiPermissionMap permissions_;
  graph::FamilyAbstraction abstraction_;
};

// ---------------------------------------------------------------------------
// Fitted encodings

// HinDroid: boolean app x API incidence A; transform(records) yields
// A_records * A_train^T, which is the square train kernel on the train set.
class HinDroidEncoder : public Encoder {
 public:
  explicit HinDroidEncoder(bool cosine = false) : cosine_(cosine) {}
  EncodingKind kind() const override { return EncodingKind::kernel_matrix; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

  DenseMatrix incidence(std::span<const FeatureRecord> records) const;
  const std::vector<std::string>& api_index() const { return apis_; }

 private:
  std::vector<std::size_t> row_apis(const FeatureRecord& record) const;

  bool cosine_;
  std::vector<std::string> apis_;
  std::unordered_map<std::string, std::size_t> api_pos_;
  std::vector<std::vector<std::size_t>> train_rows_;  // sorted API ids per train app
};

// DeepRefiner: opcode ids -> dense token indices 1..n (0 = padding / unseen).
class TokenSequenceEncoder : public Encoder {
 public:
  explicit TokenSequenceEncoder(std::size_t maxlen) : maxlen_(maxlen) {}
  EncodingKind kind() const override { return EncodingKind::token_sequences; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

  // Padded to maxlen.
  std::vector<std::int32_t> transform_one(const FeatureRecord& record) const;
  std::size_t vocab_size() const { return index_.size() + 1; }

 private:
  std::vector<std::int32_t> tokens(const FeatureRecord& record) const;

  std::size_t maxlen_;
  std::unordered_map<std::int32_t, std::int32_t> index_;
};

// Kim et al.: five modalities laid out as column blocks of one dense matrix.
// 0: permissions, 1: hardware + components + intents, 2: API call counts,
// 3: opcode 2-gram counts, 4: code strings.
class MultimodalEncoder : public Encoder {
 public:
  static constexpr std::size_t kModalities = 5;
  explicit MultimodalEncoder(std::size_t max_ngram_features = 2048) : max_ngrams_(max_ngram_features) {}
  EncodingKind kind() const override { return EncodingKind::dense_matrix; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed = 0) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

  std::array<std::vector<double>, kModalities> transform_one(const FeatureRecord& record) const;
  std::array<std::size_t, kModalities> widths() const;

 private:
  std::size_t max_ngrams_;
  std::array<std::map<std::string, std::size_t>, kModalities> vocab_;
};

struct SdacOptions {
  std::size_t max_clusters = 1000;  // k = min(max_clusters, |V|/2), at least 1
  std::size_t path_max_len = 32;
  std::size_t paths_per_app = 16;
  int kmeans_max_iter = 100;
  SkipGramOptions skipgram;
};

class SdacEncoder : public Encoder {
 public:
  explicit SdacEncoder(SdacOptions options = {}) : options_(std::move(options)) {}
  EncodingKind kind() const override { return EncodingKind::dense_matrix; }
  void fit(std::span<const FeatureRecord> train, std::uint64_t seed) override;
  EncodedDataset transform(std::span<const FeatureRecord> records) const override;
  std::string shape() const override;

  std::vector<double> transform_one(const FeatureRecord& record) const;
  std::size_t clusters() const { return k_; }
  const std::unordered_map<std::string, std::size_t>& assignment() const { return cluster_of_; }

 private:
  SdacOptions options_;
  std::size_t k_ = 0;
  std::unordered_map<std::string, std::size_t> cluster_of_;
};

}  // namespace mdbench
