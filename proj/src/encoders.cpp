#include "mdbench/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

void Encoder::require_fitted() const {
  if (!fitted_) throw Error("encoder used before fit");
}

namespace {

EncodedDataset dense_dataset(std::span<const FeatureRecord> records, std::size_t cols,
                             const std::function<std::vector<double>(const FeatureRecord&)>& row) {
  EncodedDataset ds;
  ds.kind = EncodingKind::dense_matrix;
  DenseMatrix m;
  m.cols = cols;
  m.data.reserve(records.size() * cols);
  for (const auto& r : records) m.append_row(row(r));
  ds.payload = std::move(m);
  attach_labels(ds, records);
  return ds;
}

std::string dense_shape(std::size_t cols) { return "dense[" + std::to_string(cols) + "]"; }

}  // namespace

// ---------------------------------------------------------------------------
// BinaryFeatureEncoder

std::string_view category_prefix(FeatureCategory c) {
  switch (c) {
    case FeatureCategory::hardware: return "hardware";
    case FeatureCategory::component: return "component";
    case FeatureCategory::intent: return "intent";
    case FeatureCategory::permission: return "perm";
    case FeatureCategory::api_call: return "api";
    case FeatureCategory::code_string: return "string";
  }
  return "";
}

BinaryFeatureEncoder::BinaryFeatureEncoder(std::set<FeatureCategory> categories)
    : categories_(std::move(categories)) {
  if (categories_.empty()) throw Error("binary encoder needs at least one feature category");
}

std::unique_ptr<BinaryFeatureEncoder> BinaryFeatureEncoder::drebin() {
  return std::make_unique<BinaryFeatureEncoder>(std::set<FeatureCategory>{
      FeatureCategory::hardware, FeatureCategory::component, FeatureCategory::intent, FeatureCategory::permission,
      FeatureCategory::api_call, FeatureCategory::code_string});
}

std::unique_ptr<BinaryFeatureEncoder> BinaryFeatureEncoder::xmal() {
  return std::make_unique<BinaryFeatureEncoder>(
      std::set<FeatureCategory>{FeatureCategory::permission, FeatureCategory::api_call});
}

std::unique_ptr<BinaryFeatureEncoder> BinaryFeatureEncoder::ramda() {
  return std::make_unique<BinaryFeatureEncoder>(
      std::set<FeatureCategory>{FeatureCategory::intent, FeatureCategory::permission, FeatureCategory::api_call});
}

std::vector<BinaryFeatureEncoder::Key> BinaryFeatureEncoder::keys(const FeatureRecord& r) const {
  std::vector<Key> out;
  for (auto c : categories_) {
    switch (c) {
      case FeatureCategory::hardware:
        for (const auto& h : r.manifest.hardware) out.emplace_back(c, h);
        break;
      case FeatureCategory::component:
        for (const auto& comp : r.manifest.components) {
          out.emplace_back(c, std::string(to_string(comp.kind)) + "/" + comp.name);
        }
        break;
      case FeatureCategory::intent:
        for (const auto& i : r.manifest.intents) out.emplace_back(c, i);
        break;
      case FeatureCategory::permission:
        for (const auto& p : r.manifest.permissions) out.emplace_back(c, p);
        break;
      case FeatureCategory::api_call:
        for (const auto& [api, n] : r.code.api_calls) {
          if (n > 0) out.emplace_back(c, api);
        }
        break;
      case FeatureCategory::code_string:
        for (const auto& s : r.code.code_strings) out.emplace_back(c, s);
        break;
    }
  }
  return out;
}

void BinaryFeatureEncoder::fit(std::span<const FeatureRecord> train, std::uint64_t) {
  // Categories sort by their prefix so that the rendered tokens are in
  // lexicographic order too.
  std::set<std::pair<std::string, Key>> seen;
  for (const auto& r : train) {
    for (auto& k : keys(r)) seen.emplace(std::string(category_prefix(k.first)), std::move(k));
  }
  index_.clear();
  std::size_t i = 0;
  for (const auto& [prefix, key] : seen) index_.emplace(key, i++);
  fitted_ = true;
}

std::vector<double> BinaryFeatureEncoder::transform_one(const FeatureRecord& record) const {
  require_fitted();
  std::vector<double> row(index_.size(), 0.0);
  for (const auto& k : keys(record)) {
    if (auto it = index_.find(k); it != index_.end()) row[it->second] = 1.0;
  }
  return row;
}

EncodedDataset BinaryFeatureEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  return dense_dataset(records, index_.size(), [&](const FeatureRecord& r) { return transform_one(r); });
}

std::vector<std::string> BinaryFeatureEncoder::vocabulary() const {
  std::vector<std::string> out(index_.size());
  for (const auto& [key, i] : index_) out[i] = std::string(category_prefix(key.first)) + "::" + key.second;
  return out;
}

std::string BinaryFeatureEncoder::shape() const { return dense_shape(index_.size()); }

// ---------------------------------------------------------------------------
// Stateless encodings

std::vector<double> encode_mamadroid(const FeatureRecord& record, const graph::FamilyAbstraction& abstraction) {
  return graph::family_transition(record.graph, abstraction).matrix;
}

DenseMatrix encode_opcode_image(const FeatureRecord& record, std::size_t vocab_size, std::size_t maxlen) {
  DenseMatrix m(maxlen, vocab_size);
  const auto& seq = record.code.opcode_seq;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t] < 0 || static_cast<std::size_t>(seq[t]) >= vocab_size) {
      throw Error("opcode id " + std::to_string(seq[t]) + " outside vocabulary of size " + std::to_string(vocab_size));
    }
    if (t < maxlen) m.at(t, static_cast<std::size_t>(seq[t])) = 1.0;
  }
  return m;
}

std::vector<double> encode_malscan(const FeatureRecord& record, const SensitiveApiCatalog& catalog,
                                   graph::CentralityKind kind) {
  std::vector<double> out(catalog.size(), 0.0);
  bool any = false;
  for (const auto& n : record.graph.nodes) {
    if (n.api_name && catalog.contains(*n.api_name)) any = true;
  }
  if (!any) return out;
  const auto c = graph::centrality(record.graph, kind);
  for (const auto& n : record.graph.nodes) {
    if (!n.api_name) continue;
    if (auto i = catalog.index_of(*n.api_name)) out[*i] = std::max(out[*i], c.at(n.node_id));
  }
  return out;
}

std::vector<double> encode_homdroid(const FeatureRecord& record, const SensitiveApiCatalog& catalog,
                                    std::uint64_t seed) {
  std::vector<double> out(catalog.size() + 2, 0.0);
  const auto comm = graph::community_homophily(record.graph, catalog, seed);
  if (!comm.suspicious) return out;
  const auto& members = comm.members[*comm.suspicious];
  const std::set<std::int64_t> member_set(members.begin(), members.end());
  for (const auto& n : record.graph.nodes) {
    if (!n.api_name || !member_set.count(n.node_id)) continue;
    if (auto i = catalog.index_of(*n.api_name)) out[*i] = 1.0;
  }
  const auto triads = graph::count_sensitive_triads(graph::induced_subgraph(record.graph, members), catalog);
  out[catalog.size()] = static_cast<double>(triads.closed);
  out[catalog.size() + 1] = static_cast<double>(triads.open);
  return out;
}

std::size_t msdroid_feature_dim(const graph::FamilyAbstraction& abstraction, const ApiPermissionMap& permissions) {
  return abstraction.size() + 1 + permissions.size();
}

GraphSample encode_msdroid(const FeatureRecord& record, const SensitiveApiCatalog& catalog, int k_hops,
                           const graph::FamilyAbstraction& abstraction, const ApiPermissionMap& permissions) {
  GraphSample sample;
  const std::size_t dim = msdroid_feature_dim(abstraction, permissions);
  const std::size_t F = abstraction.size();
  for (const auto& root : record.graph.nodes) {
    if (!graph::is_sensitive(root, catalog)) continue;
    const auto sub = graph::khop_subgraph(record.graph, root.node_id, k_hops);
    AttributedGraph ag;
    ag.n_nodes = sub.graph.nodes.size();
    ag.features = DenseMatrix(ag.n_nodes, dim);
    for (std::size_t i = 0; i < ag.n_nodes; ++i) {
      const auto& n = sub.graph.nodes[i];
      ag.features.at(i, abstraction.family_index(n.api_name)) = 1.0;
      if (graph::is_sensitive(n, catalog)) ag.features.at(i, F) = 1.0;
      if (n.api_name) {
        if (auto it = permissions.api_to_permissions.find(*n.api_name); it != permissions.api_to_permissions.end()) {
          for (auto p : it->second) ag.features.at(i, F + 1 + p) = 1.0;
        }
      }
    }
    std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (const auto& [s, d] : sub.graph.edges) {
      if (s == d) continue;
      const auto a = static_cast<std::uint32_t>(std::min(s, d));
      const auto b = static_cast<std::uint32_t>(std::max(s, d));
      edges.emplace(a, b);
    }
    ag.edges.assign(edges.begin(), edges.end());
    sample.subgraphs.push_back(std::move(ag));
  }
  return sample;
}

void MamaDroidEncoder::fit(std::span<const FeatureRecord>, std::uint64_t) { fitted_ = true; }

EncodedDataset MamaDroidEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  const std::size_t F = abstraction_.size();
  return dense_dataset(records, F * F, [&](const FeatureRecord& r) { return encode_mamadroid(r, abstraction_); });
}

std::string MamaDroidEncoder::shape() const { return dense_shape(abstraction_.size() * abstraction_.size()); }

void OpcodeImageEncoder::fit(std::span<const FeatureRecord>, std::uint64_t) {
  if (vocab_ == 0 || maxlen_ == 0) throw Error("opcode image needs positive vocab size and maxlen");
  fitted_ = true;
}

EncodedDataset OpcodeImageEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  OneHotSequences out;
  out.length = maxlen_;
  out.vocab = vocab_;
  for (const auto& r : records) {
    const auto& seq = r.code.opcode_seq;
    for (auto id : seq) {
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_) {
        throw Error("opcode id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(vocab_));
      }
    }
    out.sequences.emplace_back(seq.begin(), seq.begin() + static_cast<std::ptrdiff_t>(std::min(seq.size(), maxlen_)));
  }
  EncodedDataset ds;
  ds.kind = EncodingKind::one_hot_sequence;
  ds.payload = std::move(out);
  attach_labels(ds, records);
  return ds;
}

std::string OpcodeImageEncoder::shape() const {
  return "one-hot[" + std::to_string(maxlen_) + "x" + std::to_string(vocab_) + "]";
}

void MalScanEncoder::fit(std::span<const FeatureRecord>, std::uint64_t) { fitted_ = true; }

EncodedDataset MalScanEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  return dense_dataset(records, catalog_.size(),
                       [&](const FeatureRecord& r) { return encode_malscan(r, catalog_, centrality_); });
}

std::string MalScanEncoder::shape() const { return dense_shape(catalog_.size()); }

void HomDroidEncoder::fit(std::span<const FeatureRecord>, std::uint64_t) { fitted_ = true; }

EncodedDataset HomDroidEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  return dense_dataset(records, catalog_.size() + 2,
                       [&](const FeatureRecord& r) { return encode_homdroid(r, catalog_); });
}

std::string HomDroidEncoder::shape() const { return dense_shape(catalog_.size() + 2); }

void MsDroidEncoder::fit(std::span<const FeatureRecord>, std::uint64_t) {
  if (k_hops_ < 0) throw Error("k_hops must be non-negative");
  fitted_ = true;
}

EncodedDataset MsDroidEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  GraphBatch batch;
  batch.feature_dim = msdroid_feature_dim(abstraction_, permissions_);
  for (const auto& r : records) {
    batch.samples.push_back(encode_msdroid(r, catalog_, k_hops_, abstraction_, permissions_));
  }
  EncodedDataset ds;
  ds.kind = EncodingKind::graph_batch;
  ds.payload = std::move(batch);
  attach_labels(ds, records);
  return ds;
}

std::string MsDroidEncoder::shape() const {
  return "graphs[" + std::to_string(msdroid_feature_dim(abstraction_, permissions_)) + "]";
}

// ---------------------------------------------------------------------------
// HinDroid

std::vector<std::size_t> HinDroidEncoder::row_apis(const FeatureRecord& record) const {
  std::vector<std::size_t> out;
  for (const auto& [api, n] : record.code.api_calls) {
    if (n <= 0) continue;
    if (auto it = api_pos_.find(api); it != api_pos_.end()) out.push_back(it->second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void HinDroidEncoder::fit(std::span<const FeatureRecord> train, std::uint64_t) {
  std::set<std::string> apis;
  for (const auto& r : train) {
    for (const auto& [api, n] : r.code.api_calls) {
      if (n > 0) apis.insert(api);
    }
  }
  apis_.assign(apis.begin(), apis.end());
  api_pos_.clear();
  for (std::size_t i = 0; i < apis_.size(); ++i) api_pos_.emplace(apis_[i], i);
  train_rows_.clear();
  for (const auto& r : train) train_rows_.push_back(row_apis(r));
  fitted_ = true;
}

DenseMatrix HinDroidEncoder::incidence(std::span<const FeatureRecord> records) const {
  require_fitted();
  DenseMatrix a(records.size(), apis_.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (auto j : row_apis(records[i])) a.at(i, j) = 1.0;
  }
  return a;
}

EncodedDataset HinDroidEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  const std::size_t n_train = train_rows_.size();
  DenseMatrix k(records.size(), n_train);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto row = row_apis(records[i]);
    for (std::size_t j = 0; j < n_train; ++j) {
      const auto& other = train_rows_[j];
      std::size_t shared = 0;
      auto a = row.begin();
      auto b = other.begin();
      while (a != row.end() && b != other.end()) {
        if (*a < *b) {
          ++a;
        } else if (*b < *a) {
          ++b;
        } else {
          ++shared;
          ++a;
          ++b;
        }
      }
      double v = static_cast<double>(shared);
      if (cosine_) {
        const double norm = std::sqrt(static_cast<double>(row.size()) * static_cast<double>(other.size()));
        v = norm > 0.0 ? v / norm : 0.0;
      }
      k.at(i, j) = v;
    }
  }
  EncodedDataset ds;
  ds.kind = EncodingKind::kernel_matrix;
  ds.payload = std::move(k);
  attach_labels(ds, records);
  return ds;
}

std::string HinDroidEncoder::shape() const { return "kernel[" + std::to_string(train_rows_.size()) + "]"; }

// ---------------------------------------------------------------------------
// DeepRefiner token sequences

void TokenSequenceEncoder::fit(std::span<const FeatureRecord> train, std::uint64_t) {
  if (maxlen_ == 0) throw Error("token sequence maxlen must be positive");
  std::set<std::int32_t> ids;
  for (const auto& r : train) ids.insert(r.code.opcode_seq.begin(), r.code.opcode_seq.end());
  index_.clear();
  std::int32_t next = 1;
  for (auto id : ids) index_.emplace(id, next++);
  fitted_ = true;
}

std::vector<std::int32_t> TokenSequenceEncoder::tokens(const FeatureRecord& record) const {
  std::vector<std::int32_t> out;
  const auto& seq = record.code.opcode_seq;
  const std::size_t n = std::min(seq.size(), maxlen_);
  out.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    auto it = index_.find(seq[t]);
    out.push_back(it == index_.end() ? 0 : it->second);
  }
  return out;
}

std::vector<std::int32_t> TokenSequenceEncoder::transform_one(const FeatureRecord& record) const {
  require_fitted();
  auto out = tokens(record);
  out.resize(maxlen_, 0);
  return out;
}

EncodedDataset TokenSequenceEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  TokenSequences ts;
  ts.maxlen = maxlen_;
  ts.vocab = vocab_size();
  for (const auto& r : records) ts.sequences.push_back(tokens(r));
  EncodedDataset ds;
  ds.kind = EncodingKind::token_sequences;
  ds.payload = std::move(ts);
  attach_labels(ds, records);
  return ds;
}

std::string TokenSequenceEncoder::shape() const {
  return "tokens[" + std::to_string(maxlen_) + "; vocab " + std::to_string(vocab_size()) + "]";
}

// ---------------------------------------------------------------------------
// Kim et al. multimodal

namespace {

// (modality, token, count) triples of one record.
template <typename Fn>
void for_each_modal_feature(const FeatureRecord& r, Fn&& fn) {
  for (const auto& p : r.manifest.permissions) fn(0, p, 1.0);
  for (const auto& h : r.manifest.hardware) fn(1, "hardware::" + h, 1.0);
  for (const auto& c : r.manifest.components) fn(1, "component::" + std::string(to_string(c.kind)) + "/" + c.name, 1.0);
  for (const auto& i : r.manifest.intents) fn(1, "intent::" + i, 1.0);
  for (const auto& [api, n] : r.code.api_calls) {
    if (n > 0) fn(2, api, static_cast<double>(n));
  }
  const auto& ops = r.code.opcode_seq;
  if (ops.size() >= 2) {
    std::map<std::pair<std::int32_t, std::int32_t>, double> grams;
    for (std::size_t t = 0; t + 1 < ops.size(); ++t) grams[{ops[t], ops[t + 1]}] += 1.0;
    for (const auto& [g, n] : grams) fn(3, std::to_string(g.first) + "," + std::to_string(g.second), n);
  }
  for (const auto& s : r.code.code_strings) fn(4, s, 1.0);
}

}  // namespace

void MultimodalEncoder::fit(std::span<const FeatureRecord> train, std::uint64_t) {
  std::array<std::map<std::string, std::size_t>, kModalities> df;
  for (const auto& r : train) {
    for_each_modal_feature(r, [&](std::size_t m, const std::string& tok, double) { ++df[m][tok]; });
  }
  // Opcode 2-grams keep the max_ngrams_ most widespread ones.
  if (df[3].size() > max_ngrams_) {
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& [tok, n] : df[3]) ranked.emplace_back(n, tok);
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    ranked.resize(max_ngrams_);
    std::map<std::string, std::size_t> kept;
    for (const auto& [n, tok] : ranked) kept.emplace(tok, n);
    df[3] = std::move(kept);
  }
  for (std::size_t m = 0; m < kModalities; ++m) {
    vocab_[m].clear();
    std::size_t i = 0;
    for (const auto& [tok, n] : df[m]) vocab_[m].emplace(tok, i++);
  }
  fitted_ = true;
}

std::array<std::size_t, MultimodalEncoder::kModalities> MultimodalEncoder::widths() const {
  std::array<std::size_t, kModalities> w{};
  for (std::size_t m = 0; m < kModalities; ++m) w[m] = vocab_[m].size();
  return w;
}

std::array<std::vector<double>, MultimodalEncoder::kModalities> MultimodalEncoder::transform_one(
    const FeatureRecord& record) const {
  require_fitted();
  std::array<std::vector<double>, kModalities> out;
  for (std::size_t m = 0; m < kModalities; ++m) out[m].assign(vocab_[m].size(), 0.0);
  for_each_modal_feature(record, [&](std::size_t m, const std::string& tok, double n) {
    if (auto it = vocab_[m].find(tok); it != vocab_[m].end()) out[m][it->second] += n;
  });
  return out;
}

EncodedDataset MultimodalEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  const auto w = widths();
  std::size_t cols = 0;
  std::vector<std::size_t> blocks{0};
  for (auto x : w) blocks.push_back(cols += x);
  auto ds = dense_dataset(records, cols, [&](const FeatureRecord& r) {
    std::vector<double> row;
    row.reserve(cols);
    for (const auto& part : transform_one(r)) row.insert(row.end(), part.begin(), part.end());
    return row;
  });
  ds.blocks = std::move(blocks);
  return ds;
}

std::string MultimodalEncoder::shape() const {
  std::string s = "dense[";
  const auto w = widths();
  for (std::size_t m = 0; m < kModalities; ++m) s += (m ? "+" : "") + std::to_string(w[m]);
  return s + "]";
}

// ---------------------------------------------------------------------------
// SDAC

void SdacEncoder::fit(std::span<const FeatureRecord> train, std::uint64_t seed) {
  std::vector<std::vector<std::string>> corpus;
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto seqs = graph::dfs_api_sequences(train[i].graph, options_.path_max_len, options_.paths_per_app,
                                         mix_seed(seed, i));
    for (auto& s : seqs) corpus.push_back(std::move(s));
  }
  if (corpus.empty()) throw Error("SDAC fit: no API call sequences in the training set");
  auto sg_opts = options_.skipgram;
  sg_opts.seed = mix_seed(seed, 0x5dac);
  const auto table = train_skipgram(corpus, sg_opts).table;
  const std::size_t k = std::max<std::size_t>(1, std::min(options_.max_clusters, table.size() / 2));
  const auto km = kmeans(table.data(), table.size(), table.dim(), k, options_.kmeans_max_iter, mix_seed(seed, 0xc1));
  k_ = km.k;
  cluster_of_.clear();
  for (std::size_t i = 0; i < table.size(); ++i) cluster_of_.emplace(table.vocabulary()[i], km.assignment[i]);
  fitted_ = true;
}

std::vector<double> SdacEncoder::transform_one(const FeatureRecord& record) const {
  require_fitted();
  std::vector<double> out(k_, 0.0);
  double total = 0.0;
  for (const auto& [api, n] : record.code.api_calls) {
    if (n <= 0) continue;
    auto it = cluster_of_.find(api);
    if (it == cluster_of_.end()) continue;
    out[it->second] += static_cast<double>(n);
    total += static_cast<double>(n);
  }
  if (total > 0.0) {
    for (auto& v : out) v /= total;
  }
  return out;
}

EncodedDataset SdacEncoder::transform(std::span<const FeatureRecord> records) const {
  require_fitted();
  return dense_dataset(records, k_, [&](const FeatureRecord& r) { return transform_one(r); });
}

std::string SdacEncoder::shape() const { return dense_shape(k_); }

}  // namespace mdbench
