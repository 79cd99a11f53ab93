#include "mdbench/encoded.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mdbench/error.hpp"
#include "mdbench/feature_store.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

std::string_view to_string(EncodingKind kind) {
  switch (kind) {
    case EncodingKind::dense_matrix: return "dense-matrix";
    case EncodingKind::kernel_matrix: return "kernel-matrix";
    case EncodingKind::token_sequences: return "token-sequences";
    case EncodingKind::one_hot_sequence: return "one-hot-sequence";
    case EncodingKind::graph_batch: return "graph-batch";
  }
  return "dense-matrix";
}

void DenseMatrix::append_row(std::span<const double> values) {
  if (rows == 0 && cols == 0) cols = values.size();
  if (values.size() != cols) throw Error("row width mismatch");
  data.insert(data.end(), values.begin(), values.end());
  ++rows;
}

DenseMatrix OneHotSequences::to_dense(std::size_t i) const {
  DenseMatrix m(length, vocab);
  const auto& s = sequences.at(i);
  for (std::size_t t = 0; t < s.size() && t < length; ++t) m.at(t, static_cast<std::size_t>(s[t])) = 1.0;
  return m;
}

std::size_t EncodedDataset::feature_dim() const {
  switch (kind) {
    case EncodingKind::dense_matrix:
    case EncodingKind::kernel_matrix: return dense().cols;
    case EncodingKind::token_sequences: return tokens().vocab;
    case EncodingKind::one_hot_sequence: return one_hot().vocab;
    case EncodingKind::graph_batch: return graphs().feature_dim;
  }
  return 0;
}

namespace {

template <typename T>
const T& get_payload(const EncodedDataset& ds, const char* what) {
  if (const auto* p = std::get_if<T>(&ds.payload)) return *p;
  throw Error(std::string("encoded dataset does not hold ") + what);
}

}  // namespace

const DenseMatrix& EncodedDataset::dense() const { return get_payload<DenseMatrix>(*this, "a dense matrix"); }
DenseMatrix& EncodedDataset::dense() {
  if (auto* p = std::get_if<DenseMatrix>(&payload)) return *p;
  throw Error("encoded dataset does not hold a dense matrix");
}
const TokenSequences& EncodedDataset::tokens() const { return get_payload<TokenSequences>(*this, "token sequences"); }
const OneHotSequences& EncodedDataset::one_hot() const {
  return get_payload<OneHotSequences>(*this, "one-hot sequences");
}
const GraphBatch& EncodedDataset::graphs() const { return get_payload<GraphBatch>(*this, "a graph batch"); }

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> rows) const {
  EncodedDataset out;
  out.kind = kind;
  out.blocks = blocks;
  for (auto r : rows) {
    out.app_ids.push_back(app_ids.at(r));
    out.labels.push_back(labels.at(r));
  }
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        T sub;
        if constexpr (std::is_same_v<T, DenseMatrix>) {
          sub.cols = p.cols;
          for (auto r : rows) sub.append_row(p.row(r));
        } else if constexpr (std::is_same_v<T, GraphBatch>) {
          sub.feature_dim = p.feature_dim;
          for (auto r : rows) sub.samples.push_back(p.samples.at(r));
        } else if constexpr (std::is_same_v<T, TokenSequences>) {
          sub.maxlen = p.maxlen;
          sub.vocab = p.vocab;
          for (auto r : rows) sub.sequences.push_back(p.sequences.at(r));
        } else {
          sub.length = p.length;
          sub.vocab = p.vocab;
          for (auto r : rows) sub.sequences.push_back(p.sequences.at(r));
        }
        out.payload = std::move(sub);
      },
      payload);
  return out;
}

int binary_label(Label label) {
  if (label == Label::malicious) return 1;
  if (label == Label::benign) return 0;
  throw Error("record label must be benign or malicious for encoding");
}

void attach_labels(EncodedDataset& ds, std::span<const FeatureRecord> records) {
  ds.app_ids.clear();
  ds.labels.clear();
  for (const auto& r : records) {
    ds.app_ids.push_back(r.app_id);
    ds.labels.push_back(r.label == Label::malicious ? 1 : 0);
  }
}

// ---------------------------------------------------------------------------
// Binary container

namespace {

constexpr char kMagic[8] = {'M', 'D', 'B', 'E', 'N', 'C', '1', '\0'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      buf_.push_back(static_cast<char>((v & 0x7F) | 0x80));
      v >>= 7;
    }
    buf_.push_back(static_cast<char>(v));
  }
  void f32(double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  void str(const std::string& s) {
    varint(s.size());
    bytes(s.data(), s.size());
  }
  const std::string& data() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : buf_(std::move(data)) {}
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw Error("truncated encoded-dataset file");
  }
  std::uint8_t byte() {
    need(1);
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte()) << (8 * i);
    return v;
  }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const auto b = byte();
      v |= static_cast<std::uint64_t>(b & 0x7F) << shift;
      if (!(b & 0x80)) return v;
    }
    throw Error("malformed varint");
  }
  double f32() {
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(byte()) << (8 * i);
    return static_cast<double>(std::bit_cast<float>(bits));
  }
  std::string str() {
    const auto n = varint();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  std::string buf_;
  std::size_t pos_ = 0;
};

void write_dense(Writer& w, const DenseMatrix& m) {
  w.u64(m.rows);
  w.u64(m.cols);
  for (double v : m.data) w.f32(v);
}

DenseMatrix read_dense(Reader& r) {
  DenseMatrix m;
  m.rows = r.u64();
  m.cols = r.u64();
  r.need(m.rows * m.cols * 4);
  m.data.resize(m.rows * m.cols);
  for (auto& v : m.data) v = r.f32();
  return m;
}

}  // namespace

void save_encoded(const EncodedDataset& ds, const std::string& path) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u64(static_cast<std::uint64_t>(ds.kind));
  w.u64(ds.rows());
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    w.str(ds.app_ids.at(i));
    w.varint(static_cast<std::uint64_t>(ds.labels[i]));
  }
  w.u64(ds.blocks.size());
  for (auto b : ds.blocks) w.u64(b);
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, DenseMatrix>) {
          write_dense(w, p);
        } else if constexpr (std::is_same_v<T, TokenSequences>) {
          w.u64(p.maxlen);
          w.u64(p.vocab);
          for (const auto& s : p.sequences) {
            w.varint(s.size());
            for (auto t : s) w.varint(static_cast<std::uint64_t>(t));
          }
        } else if constexpr (std::is_same_v<T, OneHotSequences>) {
          w.u64(p.length);
          w.u64(p.vocab);
          for (const auto& s : p.sequences) {
            w.varint(s.size());
            for (auto t : s) w.varint(static_cast<std::uint64_t>(t));
          }
        } else {
          w.u64(p.feature_dim);
          for (const auto& sample : p.samples) {
            w.varint(sample.subgraphs.size());
            for (const auto& sg : sample.subgraphs) {
              w.varint(sg.n_nodes);
              w.varint(sg.edges.size());
              for (const auto& [a, b] : sg.edges) {
                w.varint(a);
                w.varint(b);
              }
              for (double v : sg.features.data) w.f32(v);
            }
          }
        }
      },
      ds.payload);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write encoded dataset: " + path);
  out << w.data();
}

EncodedDataset load_encoded(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open encoded dataset: " + path);
  Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
  for (char c : kMagic) {
    if (static_cast<char>(r.byte()) != c) throw Error("not an encoded-dataset file: " + path);
  }
  EncodedDataset ds;
  const auto kind = r.u64();
  if (kind > static_cast<std::uint64_t>(EncodingKind::graph_batch)) throw Error("unknown encoding kind");
  ds.kind = static_cast<EncodingKind>(kind);
  const auto rows = r.u64();
  for (std::uint64_t i = 0; i < rows; ++i) {
    ds.app_ids.push_back(r.str());
    ds.labels.push_back(static_cast<int>(r.varint()));
  }
  const auto n_blocks = r.u64();
  for (std::uint64_t i = 0; i < n_blocks; ++i) ds.blocks.push_back(r.u64());
  switch (ds.kind) {
    case EncodingKind::dense_matrix:
    case EncodingKind::kernel_matrix: ds.payload = read_dense(r); break;
    case EncodingKind::token_sequences:
    case EncodingKind::one_hot_sequence: {
      const auto a = r.u64();
      const auto b = r.u64();
      std::vector<std::vector<std::int32_t>> seqs(rows);
      for (auto& s : seqs) {
        s.resize(r.varint());
        for (auto& t : s) t = static_cast<std::int32_t>(r.varint());
      }
      if (ds.kind == EncodingKind::token_sequences) {
        ds.payload = TokenSequences{std::move(seqs), a, b};
      } else {
        ds.payload = OneHotSequences{std::move(seqs), a, b};
      }
      break;
    }
    case EncodingKind::graph_batch: {
      GraphBatch g;
      g.feature_dim = r.u64();
      g.samples.resize(rows);
      for (auto& sample : g.samples) {
        sample.subgraphs.resize(r.varint());
        for (auto& sg : sample.subgraphs) {
          sg.n_nodes = r.varint();
          sg.edges.resize(r.varint());
          for (auto& [a, b] : sg.edges) {
            a = static_cast<std::uint32_t>(r.varint());
            b = static_cast<std::uint32_t>(r.varint());
          }
          sg.features = DenseMatrix(sg.n_nodes, g.feature_dim);
          for (auto& v : sg.features.data) v = r.f32();
        }
      }
      ds.payload = std::move(g);
      break;
    }
  }
  if (!r.done()) throw Error("trailing bytes in encoded-dataset file");
  return ds;
}

std::uint64_t corpus_hash(std::span<const FeatureRecord> records) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& rec : records) h = mix_seed(h, hash_string(record_to_json_line(rec)));
  return h;
}

std::string cache_key(std::string_view approach, std::uint64_t corpus, std::uint64_t config) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "-%016llx-%016llx", static_cast<unsigned long long>(corpus),
                static_cast<unsigned long long>(config));
  return std::string(approach) + buf;
}

}  // namespace mdbench
