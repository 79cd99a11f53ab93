#include "mdbench/neural.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mdbench/error.hpp"
#include "mdbench/metrics.hpp"

namespace mdbench {

using nn::Tape;

namespace {

constexpr std::size_t kPredictChunk = 256;
constexpr double kBiasInit = 0.01;

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// NeuralModel

NeuralModel::Linear NeuralModel::add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  Linear l;
  l.w = params_.add_weight(name + ".w", in, out, rng);
  l.b = params_.add_bias(name + ".b", out, kBiasInit);
  return l;
}

Tape::Id NeuralModel::apply(Tape& tape, const Linear& layer, Tape::Id x) const {
  return tape.add_row(tape.matmul(x, tape.param(layer.w)), tape.param(layer.b));
}

Tape::Id NeuralModel::apply_stack(Tape& tape, const std::vector<Linear>& layers, Tape::Id x, bool relu_last) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = apply(tape, layers[i], x);
    if (i + 1 < layers.size() || relu_last) x = tape.relu(x);
  }
  return x;
}

DenseMatrix NeuralModel::dense_rows(const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  const auto& X = ds.dense();
  if (X.cols != input_scale_.size()) throw Error(std::string(family()) + ": input width does not match the model");
  DenseMatrix out(rows.size(), X.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = X.row(rows[i]);
    auto dst = out.row(i);
    for (std::size_t j = 0; j < X.cols; ++j) dst[j] = src[j] / input_scale_[j];
  }
  return out;
}

std::vector<double> NeuralModel::targets(const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  std::vector<double> t;
  t.reserve(rows.size());
  for (auto r : rows) t.push_back(ds.labels.at(r));
  return t;
}

void NeuralModel::prepare(const EncodedDataset& ds, std::uint64_t seed) {
  check_input(ds);
  auto dims = infer_dims(ds);
  input_scale_.clear();
  if (dense_input()) {
    const auto& X = ds.dense();
    input_scale_.assign(X.cols, 0.0);
    for (std::size_t i = 0; i < X.rows; ++i) {
      for (std::size_t j = 0; j < X.cols; ++j) input_scale_[j] = std::max(input_scale_[j], std::abs(X.at(i, j)));
    }
    for (auto& s : input_scale_) {
      if (s == 0.0) s = 1.0;
    }
  }
  params_ = nn::ParamStore();
  Rng rng(mix_seed(seed, 0x1417));
  build(dims, rng);
  dims_ = std::move(dims);
}

Tape::Id NeuralModel::objective(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  return tape.bce_with_logits(logits(tape, ds, rows), targets(ds, rows));
}

std::vector<std::vector<std::size_t>> NeuralModel::batches(const EncodedDataset& ds, Rng& rng) const {
  std::vector<std::size_t> order(ds.rows());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  const std::size_t bs = std::max<std::size_t>(1, batch_size());
  for (std::size_t i = 0; i < order.size(); i += bs) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
  }
  return out;
}

void NeuralModel::do_fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg) {
  prepare(train, cfg.seed);
  Rng rng(mix_seed(cfg.seed, 0xb47c));
  pre_train(train, cfg, rng);

  nn::Adam opt(learning_rate());
  const bool early = val.rows() > 0;
  double best_f1 = -1.0;
  auto best = params_.snapshot();
  int wait = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double total = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : batches(train, rng)) {
      if (batch.empty()) continue;
      params_.zero_grad();
      Tape tape(&params_);
      const auto loss = objective(tape, train, batch);
      tape.backward(loss);
      opt.step(params_);
      total += tape.scalar(loss) * static_cast<double>(batch.size());
      seen += batch.size();
    }
    fitted_ = true;
    double val_f1 = 0.0;
    if (early) {
      const auto pred = predict_labels(val);
      val_f1 = f1_score(confusion(val.labels, pred)).value;
    }
    log_.push_back({epoch, "train", seen ? total / static_cast<double>(seen) : 0.0, val_f1});
    if (!early) continue;
    if (val_f1 > best_f1) {
      best_f1 = val_f1;
      best = params_.snapshot();
      wait = 0;
    } else if (++wait >= cfg.patience) {
      break;
    }
  }
  if (early) params_.restore(best);
}

std::vector<double> NeuralModel::predict_scores(const EncodedDataset& ds) const {
  require_fitted();
  check_input(ds);
  std::vector<double> out;
  out.reserve(ds.rows());
  for (std::size_t start = 0; start < ds.rows(); start += kPredictChunk) {
    std::vector<std::size_t> rows(std::min(kPredictChunk, ds.rows() - start));
    std::iota(rows.begin(), rows.end(), start);
    Tape tape(&params_);
    const auto z = logits(tape, ds, rows);
    for (double v : tape.value(z).data) out.push_back(sigmoid(v));
  }
  return out;
}

std::vector<DenseMatrix> NeuralModel::state() const {
  require_fitted();
  DenseMatrix dims(1, dims_.size());
  std::copy(dims_.begin(), dims_.end(), dims.data.begin());
  DenseMatrix scale(1, input_scale_.size());
  std::copy(input_scale_.begin(), input_scale_.end(), scale.data.begin());
  std::vector<DenseMatrix> out{dims, scale};
  for (auto& m : params_.snapshot()) out.push_back(std::move(m));
  return out;
}

void NeuralModel::load_state(const std::vector<DenseMatrix>& state) {
  if (state.size() < 2) throw Error(std::string(family()) + ": malformed state");
  params_ = nn::ParamStore();
  Rng rng(0);
  dims_ = state[0].data;
  build(dims_, rng);
  input_scale_ = state[1].data;
  params_.restore(std::vector<DenseMatrix>(state.begin() + 2, state.end()));
  fitted_ = true;
}

// ---------------------------------------------------------------------------
// MultimodalMlp

std::vector<double> MultimodalMlp::infer_dims(const EncodedDataset& ds) const {
  std::vector<double> dims;
  if (ds.blocks.empty()) {
    dims = {0.0, static_cast<double>(ds.dense().cols)};
  } else {
    if (ds.blocks.back() != ds.dense().cols) throw Error("mlp_multimodal: blocks do not cover the input");
    for (auto b : ds.blocks) dims.push_back(static_cast<double>(b));
  }
  return dims;
}

void MultimodalMlp::build(const std::vector<double>& dims, Rng& rng) {
  const auto& spec = std::get<MultimodalMlpSpec>(spec_);
  blocks_.clear();
  for (double d : dims) blocks_.push_back(static_cast<std::size_t>(d));
  towers_.clear();
  std::size_t merged = 0;
  for (std::size_t t = 0; t + 1 < blocks_.size(); ++t) {
    std::vector<Linear> tower;
    std::size_t in = blocks_[t + 1] - blocks_[t];
    for (std::size_t l = 0; l < spec.tower_layers.size(); ++l) {
      const std::size_t out = width(spec.tower_layers[l]);
      tower.push_back(add_linear("tower" + std::to_string(t) + "." + std::to_string(l), in, out, rng));
      in = out;
    }
    merged += in;
    towers_.push_back(std::move(tower));
  }
  merge_.clear();
  std::size_t in = merged;
  for (std::size_t l = 0; l < spec.merge_layers.size(); ++l) {
    const std::size_t out = width(spec.merge_layers[l]);
    merge_.push_back(add_linear("merge." + std::to_string(l), in, out, rng));
    in = out;
  }
  merge_.push_back(add_linear("out", in, 1, rng));
}

Tape::Id MultimodalMlp::logits(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  const auto x = tape.constant(dense_rows(ds, rows));
  std::vector<Tape::Id> outs;
  for (std::size_t t = 0; t < towers_.size(); ++t) {
    const auto xb = tape.slice_cols(x, blocks_[t], blocks_[t + 1]);
    outs.push_back(apply_stack(tape, towers_[t], xb, true));
  }
  return apply_stack(tape, merge_, tape.concat_cols(outs), false);
}

// ---------------------------------------------------------------------------
// AttentionMlp

std::vector<double> AttentionMlp::infer_dims(const EncodedDataset& ds) const {
  return {static_cast<double>(ds.dense().cols)};
}

void AttentionMlp::build(const std::vector<double>& dims, Rng& rng) {
  const auto& spec = std::get<AttentionMlpSpec>(spec_);
  const auto d = static_cast<std::size_t>(dims.at(0));
  const std::size_t a = width(spec.attn_hidden);
  attn_in_ = add_linear("attn.in", d, a, rng);
  attn_out_ = add_linear("attn.out", a, d, rng);
  mlp_.clear();
  std::size_t in = d;
  for (std::size_t l = 0; l + 1 < spec.mlp_layers; ++l) {
    const std::size_t out = width(spec.hidden);
    mlp_.push_back(add_linear("mlp." + std::to_string(l), in, out, rng));
    in = out;
  }
  mlp_.push_back(add_linear("out", in, 1, rng));
}

Tape::Id AttentionMlp::logits(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  const auto x = tape.constant(dense_rows(ds, rows));
  const auto h = tape.tanh(apply(tape, attn_in_, x));
  const auto weights = tape.softmax_rows(apply(tape, attn_out_, h));
  // Softmax weights average 1/d; rescale so attended inputs keep their size.
  const auto attended = tape.scale(tape.mul(x, weights), static_cast<double>(dims_.empty() ? 1.0 : dims_[0]));
  return apply_stack(tape, mlp_, attended, false);
}

// ---------------------------------------------------------------------------
// Mlp

std::vector<double> Mlp::infer_dims(const EncodedDataset& ds) const { return {static_cast<double>(ds.dense().cols)}; }

void Mlp::build(const std::vector<double>& dims, Rng& rng) {
  const auto& spec = std::get<MlpSpec>(spec_);
  layers_.clear();
  std::size_t in = static_cast<std::size_t>(dims.at(0));
  for (std::size_t l = 0; l < spec.hidden.size(); ++l) {
    const std::size_t out = width(spec.hidden[l]);
    layers_.push_back(add_linear("hidden." + std::to_string(l), in, out, rng));
    in = out;
  }
  layers_.push_back(add_linear("out", in, 1, rng));
}

Tape::Id Mlp::logits(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  return apply_stack(tape, layers_, tape.constant(dense_rows(ds, rows)), false);
}

double Mlp::logit(std::span<const double> x) const {
  require_fitted();
  if (x.size() != input_scale_.size()) throw Error("mlp: input width does not match the model");
  DenseMatrix m(1, x.size());
  for (std::size_t j = 0; j < x.size(); ++j) m.data[j] = x[j] / input_scale_[j];
  Tape tape(&params_);
  return tape.scalar(apply_stack(tape, layers_, tape.constant(std::move(m)), false));
}

std::vector<double> Mlp::logit_gradient(std::span<const double> x) const {
  require_fitted();
  if (x.size() != input_scale_.size()) throw Error("mlp: input width does not match the model");
  DenseMatrix m(1, x.size());
  for (std::size_t j = 0; j < x.size(); ++j) m.data[j] = x[j] / input_scale_[j];
  nn::ParamStore scratch = params_;
  Tape tape(&scratch);
  const auto in = tape.variable(std::move(m));
  tape.backward(apply_stack(tape, layers_, in, false));
  std::vector<double> g = tape.grad(in).data;
  for (std::size_t j = 0; j < g.size(); ++j) g[j] /= input_scale_[j];
  return g;
}

// ---------------------------------------------------------------------------
// LstmModel

std::vector<double> LstmModel::infer_dims(const EncodedDataset& ds) const {
  return {static_cast<double>(std::max<std::size_t>(1, ds.tokens().vocab))};
}

void LstmModel::build(const std::vector<double>& dims, Rng& rng) {
  const auto& spec = std::get<LstmSpec>(spec_);
  const auto vocab = static_cast<std::size_t>(dims.at(0));
  const std::size_t e = width(spec.embed);
  hidden_ = width(spec.hidden);
  embedding_ = params_.add_weight("embed", vocab, e, rng);
  cells_.clear();
  std::size_t in = e;
  for (std::size_t l = 0; l < spec.layers; ++l) {
    Cell c;
    c.wx = params_.add_weight("lstm" + std::to_string(l) + ".wx", in, 4 * hidden_, rng);
    c.wh = params_.add_weight("lstm" + std::to_string(l) + ".wh", hidden_, 4 * hidden_, rng);
    c.b = params_.add_bias("lstm" + std::to_string(l) + ".b", 4 * hidden_);
    // forget-gate bias starts at 1
    auto& b = params_.at(c.b).value;
    for (std::size_t j = hidden_; j < 2 * hidden_; ++j) b.data[j] = 1.0;
    cells_.push_back(c);
    in = hidden_;
  }
  out_ = add_linear("out", hidden_, 1, rng);
}

Tape::Id LstmModel::logits(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  const auto& seqs = ds.tokens().sequences;
  const std::size_t n = rows.size();
  const std::size_t H = hidden_;
  std::size_t T = 0;
  for (auto r : rows) T = std::max(T, seqs.at(r).size());
  const auto vocab = static_cast<std::size_t>(dims_.at(0));

  const auto E = tape.param(embedding_);
  std::vector<Tape::Id> wx, wh, b;
  for (const auto& c : cells_) {
    wx.push_back(tape.param(c.wx));
    wh.push_back(tape.param(c.wh));
    b.push_back(tape.param(c.b));
  }
  std::vector<Tape::Id> h(cells_.size(), tape.constant(DenseMatrix(n, H)));
  std::vector<Tape::Id> c = h;
  std::vector<std::size_t> ids(n);
  for (std::size_t t = 0; t < T; ++t) {
    bool all_active = true;
    DenseMatrix mask(n, H);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& s = seqs[rows[i]];
      const bool active = t < s.size();
      all_active = all_active && active;
      ids[i] = active ? static_cast<std::size_t>(s[t]) : 0;
      if (ids[i] >= vocab) throw Error("lstm: token id outside the vocabulary");
      if (active) std::fill(mask.row(i).begin(), mask.row(i).end(), 1.0);
    }
    const auto m = all_active ? Tape::Id{0} : tape.constant(std::move(mask));
    auto x = tape.gather_rows(E, ids);
    for (std::size_t l = 0; l < cells_.size(); ++l) {
      const auto gates = tape.add_row(tape.add(tape.matmul(x, wx[l]), tape.matmul(h[l], wh[l])), b[l]);
      const auto ig = tape.sigmoid(tape.slice_cols(gates, 0, H));
      const auto fg = tape.sigmoid(tape.slice_cols(gates, H, 2 * H));
      const auto gg = tape.tanh(tape.slice_cols(gates, 2 * H, 3 * H));
      const auto og = tape.sigmoid(tape.slice_cols(gates, 3 * H, 4 * H));
      const auto c_new = tape.add(tape.mul(fg, c[l]), tape.mul(ig, gg));
      const auto h_new = tape.mul(og, tape.tanh(c_new));
      if (all_active) {
        c[l] = c_new;
        h[l] = h_new;
      } else {
        c[l] = tape.add(c[l], tape.mul(m, tape.sub(c_new, c[l])));
        h[l] = tape.add(h[l], tape.mul(m, tape.sub(h_new, h[l])));
      }
      x = h[l];
    }
  }
  return apply(tape, out_, h.back());
}

std::vector<std::vector<std::size_t>> LstmModel::batches(const EncodedDataset& ds, Rng& rng) const {
  const auto& seqs = ds.tokens().sequences;
  std::vector<std::size_t> order(ds.rows());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return seqs[a].size() < seqs[b].size(); });
  std::vector<std::vector<std::size_t>> out;
  const std::size_t bs = std::max<std::size_t>(1, batch_size());
  for (std::size_t i = 0; i < order.size(); i += bs) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
  }
  rng.shuffle(out);
  return out;
}

// ---------------------------------------------------------------------------
// CnnModel

CnnModel::CnnModel(CnnSpec spec, double scale) : NeuralModel(spec, scale) {
  Rng rng(mix_seed(1, 0x1417));
  dims_ = {static_cast<double>(spec.vocab)};
  build(dims_, rng);
}

std::vector<double> CnnModel::infer_dims(const EncodedDataset& ds) const {
  const auto& spec = std::get<CnnSpec>(spec_);
  if (ds.one_hot().vocab != spec.vocab) {
    throw Error("cnn: input vocabulary " + std::to_string(ds.one_hot().vocab) + " does not match spec vocab " +
                std::to_string(spec.vocab));
  }
  return {static_cast<double>(spec.vocab)};
}

void CnnModel::build(const std::vector<double>& dims, Rng& rng) {
  const auto& spec = std::get<CnnSpec>(spec_);
  const auto vocab = static_cast<std::size_t>(dims.at(0));
  const std::size_t F = width(spec.filters);
  const std::size_t fc = width(spec.fc);
  filters_ = params_.add_weight("conv.w", vocab * spec.kernel, F, rng);
  filter_bias_ = params_.add_bias("conv.b", F, kBiasInit);
  fc_ = add_linear("fc", F, fc, rng);
  out_ = add_linear("out", fc, 1, rng);
}

Tape::Id CnnModel::logits(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  const auto& spec = std::get<CnnSpec>(spec_);
  const auto& oh = ds.one_hot();
  std::vector<std::vector<std::int32_t>> seqs;
  seqs.reserve(rows.size());
  for (auto r : rows) {
    const auto& s = oh.sequences.at(r);
    seqs.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min(s.size(), oh.length)));
  }
  std::vector<std::size_t> offsets;
  const auto conv = tape.relu(
      tape.conv_onehot(seqs, spec.kernel, tape.param(filters_), tape.param(filter_bias_), offsets));
  const auto pooled = tape.segment_max(conv, offsets);
  return apply(tape, out_, tape.relu(apply(tape, fc_, pooled)));
}

// ---------------------------------------------------------------------------
// AeClassifier

std::vector<double> AeClassifier::infer_dims(const EncodedDataset& ds) const {
  return {static_cast<double>(ds.dense().cols)};
}

void AeClassifier::build(const std::vector<double>& dims, Rng& rng) {
  const auto& spec = std::get<AeClassifierSpec>(spec_);
  const auto d = static_cast<std::size_t>(dims.at(0));
  const std::size_t H = width(spec.hidden);
  encoder_.clear();
  decoder_.clear();
  classifier_.clear();
  std::size_t in = d;
  for (std::size_t l = 0; l < spec.enc_layers; ++l) {
    encoder_.push_back(add_linear("enc." + std::to_string(l), in, H, rng));
    in = H;
  }
  for (std::size_t l = 0; l < spec.dec_layers; ++l) {
    const std::size_t out = l + 1 == spec.dec_layers ? d : H;
    decoder_.push_back(add_linear("dec." + std::to_string(l), in, out, rng));
    in = out;
  }
  in = H;
  for (std::size_t l = 0; l < spec.clf_layers; ++l) {
    const std::size_t out = l + 1 == spec.clf_layers ? 1 : H;
    classifier_.push_back(add_linear("clf." + std::to_string(l), in, out, rng));
    in = out;
  }
}

std::pair<Tape::Id, Tape::Id> AeClassifier::encode(Tape& tape, Tape::Id x) const {
  const auto z = apply_stack(tape, encoder_, x, true);
  const auto recon = tape.sigmoid(apply_stack(tape, decoder_, z, false));
  return {z, tape.row_sum_squares(tape.sub(recon, x))};
}

Tape::Id AeClassifier::logits(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  const auto x = tape.constant(dense_rows(ds, rows));
  return apply_stack(tape, classifier_, apply_stack(tape, encoder_, x, true), false);
}

Tape::Id AeClassifier::objective(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  const auto& spec = std::get<AeClassifierSpec>(spec_);
  const auto x = tape.constant(dense_rows(ds, rows));
  const auto [z, sse] = encode(tape, x);
  const auto rec = tape.mean_all(sse);
  const auto ce = tape.bce_with_logits(apply_stack(tape, classifier_, z, false), targets(ds, rows));
  const auto excess = tape.relu(tape.add_scalar(rec, -spec.recon_target));
  return tape.add(tape.add(tape.scale(ce, spec.lambda2), tape.scale(excess, spec.lambda1)),
                  tape.scale(rec, spec.lambda3));
}

double AeClassifier::reconstruction_loss(const EncodedDataset& ds) const {
  if (!prepared()) throw Error("ae_classifier: model not built");
  double total = 0.0;
  for (std::size_t start = 0; start < ds.rows(); start += kPredictChunk) {
    std::vector<std::size_t> rows(std::min(kPredictChunk, ds.rows() - start));
    std::iota(rows.begin(), rows.end(), start);
    Tape tape(&params_);
    const auto sse = encode(tape, tape.constant(dense_rows(ds, rows))).second;
    for (double v : tape.value(sse).data) total += v;
  }
  return ds.rows() ? total / static_cast<double>(ds.rows()) : 0.0;
}

void AeClassifier::pre_train(const EncodedDataset& train, const TrainConfig&, Rng& rng) {
  const auto& spec = std::get<AeClassifierSpec>(spec_);
  nn::Adam opt(spec.lr);
  double accepted = reconstruction_loss(train);
  log_.push_back({0, "ae", accepted, 0.0});
  for (int epoch = 1; epoch <= spec.epochs; ++epoch) {
    const auto before = params_.snapshot();
    for (const auto& batch : batches(train, rng)) {
      params_.zero_grad();
      Tape tape(&params_);
      const auto x = tape.constant(dense_rows(train, batch));
      const auto loss = tape.mean_all(encode(tape, x).second);
      tape.backward(loss);
      opt.step(params_);
    }
    const double now = reconstruction_loss(train);
    if (now <= accepted) {
      accepted = now;
    } else {
      params_.restore(before);
      opt.set_learning_rate(opt.learning_rate() * 0.5);
    }
    log_.push_back({epoch, "ae", accepted, 0.0});
  }
}

// ---------------------------------------------------------------------------
// GnnModel

namespace {

struct GraphBatchView {
  DenseMatrix features;
  nn::SparseMatrix adjacency;
  std::vector<std::size_t> node_offsets;  // per subgraph
  std::vector<std::size_t> graph_offsets;  // per app
};

GraphBatchView assemble(const GraphBatch& gb, std::span<const std::size_t> rows) {
  GraphBatchView v;
  v.features.cols = gb.feature_dim;
  v.node_offsets = {0};
  v.graph_offsets = {0};
  std::vector<std::vector<std::size_t>> nbrs;
  for (auto r : rows) {
    for (const auto& sg : gb.samples.at(r).subgraphs) {
      const std::size_t base = v.node_offsets.back();
      if (sg.features.cols != gb.feature_dim || sg.features.rows != sg.n_nodes) {
        throw Error("gnn: subgraph attribute matrix has the wrong shape");
      }
      v.features.data.insert(v.features.data.end(), sg.features.data.begin(), sg.features.data.end());
      v.features.rows += sg.n_nodes;
      nbrs.resize(base + sg.n_nodes);
      for (std::size_t i = 0; i < sg.n_nodes; ++i) nbrs[base + i].push_back(base + i);
      for (const auto& [a, b] : sg.edges) {
        if (a >= sg.n_nodes || b >= sg.n_nodes) throw Error("gnn: edge endpoint out of range");
        nbrs[base + a].push_back(base + b);
        nbrs[base + b].push_back(base + a);
      }
      v.node_offsets.push_back(base + sg.n_nodes);
    }
    v.graph_offsets.push_back(v.node_offsets.size() - 1);
  }
  auto& A = v.adjacency;
  A.rows = A.cols = v.features.rows;
  for (auto& row : nbrs) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    for (auto j : nbrs[i]) {
      A.col.push_back(j);
      A.val.push_back(1.0 / std::sqrt(static_cast<double>(nbrs[i].size()) * static_cast<double>(nbrs[j].size())));
    }
    A.row_ptr.push_back(A.col.size());
  }
  return v;
}

}  // namespace

std::vector<double> GnnModel::infer_dims(const EncodedDataset& ds) const {
  return {static_cast<double>(ds.graphs().feature_dim)};
}

void GnnModel::build(const std::vector<double>& dims, Rng& rng) {
  const auto& spec = std::get<GnnSpec>(spec_);
  std::size_t in = static_cast<std::size_t>(dims.at(0));
  gcn_.clear();
  head_.clear();
  for (std::size_t l = 0; l < spec.layers; ++l) {
    const std::size_t out = width(spec.hidden);
    gcn_.push_back(add_linear("gcn." + std::to_string(l), in, out, rng));
    in = out;
  }
  for (std::size_t l = 0; l < spec.fc_layers; ++l) {
    const std::size_t out = l + 1 == spec.fc_layers ? 1 : width(spec.fc_hidden);
    head_.push_back(add_linear("fc." + std::to_string(l), in, out, rng));
    in = out;
  }
}

Tape::Id GnnModel::logits(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  const auto& gb = ds.graphs();
  if (gb.feature_dim != static_cast<std::size_t>(dims_.at(0))) throw Error("gnn: node attribute width mismatch");
  for (auto r : rows) {
    if (gb.samples.at(r).subgraphs.empty()) throw Error("gnn: app without subgraphs has no logit");
  }
  auto view = assemble(gb, rows);
  auto h = tape.constant(std::move(view.features));
  for (const auto& layer : gcn_) h = tape.relu(apply(tape, layer, tape.spmm(view.adjacency, h)));
  const auto pooled = tape.segment_mean(h, view.node_offsets);
  const auto sub_logits = apply_stack(tape, head_, pooled, false);
  return tape.segment_max(sub_logits, view.graph_offsets);
}

Tape::Id GnnModel::objective(Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const {
  std::vector<std::size_t> kept;
  for (auto r : rows) {
    if (!ds.graphs().samples.at(r).subgraphs.empty()) kept.push_back(r);
  }
  if (kept.empty()) throw Error("gnn: no app in the batch has a subgraph");
  return tape.bce_with_logits(logits(tape, ds, kept), targets(ds, kept));
}

std::vector<std::vector<std::size_t>> GnnModel::batches(const EncodedDataset& ds, Rng& rng) const {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (!ds.graphs().samples[i].subgraphs.empty()) order.push_back(i);
  }
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  const std::size_t bs = std::max<std::size_t>(1, batch_size());
  for (std::size_t i = 0; i < order.size(); i += bs) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + bs)));
  }
  return out;
}

std::vector<double> GnnModel::predict_scores(const EncodedDataset& ds) const {
  require_fitted();
  check_input(ds);
  std::vector<double> out(ds.rows(), 0.0);
  std::vector<std::size_t> rows;
  auto flush = [&] {
    if (rows.empty()) return;
    Tape tape(&params_);
    const auto z = logits(tape, ds, rows);
    for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = sigmoid(tape.value(z).data[i]);
    rows.clear();
  };
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    if (ds.graphs().samples[i].subgraphs.empty()) continue;
    rows.push_back(i);
    if (rows.size() == kPredictChunk) flush();
  }
  flush();
  return out;
}

}  // namespace mdbench
