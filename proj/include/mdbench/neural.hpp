#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mdbench/autograd.hpp"
#include "mdbench/models.hpp"

namespace mdbench {

// Shared machinery of the from-scratch neural families: parameter store,
// Adam mini-batch training with early stopping on validation F1 (best-epoch
// parameters restored), sigmoid scores, and state round-tripping.
class NeuralModel : public Model {
 public:
  bool differentiable() const override { return true; }
  std::vector<double> predict_scores(const EncodedDataset& ds) const override;
  std::vector<DenseMatrix> state() const override;
  void load_state(const std::vector<DenseMatrix>& state) override;

  // Creates the network for the shape of `ds` with fresh parameters.
  void prepare(const EncodedDataset& ds, std::uint64_t seed);
  bool prepared() const { return !dims_.empty(); }
  nn::ParamStore& parameters() { return params_; }
  const nn::ParamStore& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.scalar_count(); }

  // Training objective on the given rows (scalar node).
  virtual nn::Tape::Id objective(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const;

 protected:
  NeuralModel(ModelSpec spec, double scale) : Model(std::move(spec)), scale_(scale) {}

  std::size_t width(std::size_t w) const { return scaled_width(w, scale_); }
  virtual std::vector<double> infer_dims(const EncodedDataset& ds) const = 0;
  virtual void build(const std::vector<double>& dims, Rng& rng) = 0;
  // n x 1 malicious logits.
  virtual nn::Tape::Id logits(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const = 0;
  virtual std::vector<std::vector<std::size_t>> batches(const EncodedDataset& ds, Rng& rng) const;
  virtual void pre_train(const EncodedDataset&, const TrainConfig&, Rng&) {}
  virtual double learning_rate() const = 0;
  virtual std::size_t batch_size() const = 0;
  virtual bool dense_input() const { return true; }

  void do_fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg) override;

  struct Linear {
    std::size_t w = 0;
    std::size_t b = 0;
  };
  Linear add_linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  nn::Tape::Id apply(nn::Tape& tape, const Linear& layer, nn::Tape::Id x) const;
  // Stacked linear layers with ReLU between them (none after the last).
  nn::Tape::Id apply_stack(nn::Tape& tape, const std::vector<Linear>& layers, nn::Tape::Id x, bool relu_last) const;
  // Dense rows with the fitted max-abs column scaling applied.
  DenseMatrix dense_rows(const EncodedDataset& ds, std::span<const std::size_t> rows) const;
  std::vector<double> targets(const EncodedDataset& ds, std::span<const std::size_t> rows) const;

  double scale_;
  mutable nn::ParamStore params_;
  std::vector<double> dims_;
  std::vector<double> input_scale_;
};

class MultimodalMlp : public NeuralModel {
 public:
  MultimodalMlp(MultimodalMlpSpec spec, double scale) : NeuralModel(spec, scale) {}

 protected:
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::dense_matrix; }
  std::vector<double> infer_dims(const EncodedDataset& ds) const override;
  void build(const std::vector<double>& dims, Rng& rng) override;
  nn::Tape::Id logits(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;
  double learning_rate() const override { return std::get<MultimodalMlpSpec>(spec_).lr; }
  std::size_t batch_size() const override { return std::get<MultimodalMlpSpec>(spec_).batch; }

 private:
  std::vector<std::size_t> blocks_;
  std::vector<std::vector<Linear>> towers_;
  std::vector<Linear> merge_;
};

class AttentionMlp : public NeuralModel {
 public:
  AttentionMlp(AttentionMlpSpec spec, double scale) : NeuralModel(spec, scale) {}

 protected:
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::dense_matrix; }
  std::vector<double> infer_dims(const EncodedDataset& ds) const override;
  void build(const std::vector<double>& dims, Rng& rng) override;
  nn::Tape::Id logits(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;
  double learning_rate() const override { return std::get<AttentionMlpSpec>(spec_).lr; }
  std::size_t batch_size() const override { return std::get<AttentionMlpSpec>(spec_).batch; }

 private:
  Linear attn_in_, attn_out_;
  std::vector<Linear> mlp_;
};

class Mlp : public NeuralModel {
 public:
  Mlp(MlpSpec spec, double scale) : NeuralModel(spec, scale) {}

  // Malicious logit of one raw input row and its gradient w.r.t. that row.
  double logit(std::span<const double> x) const;
  std::vector<double> logit_gradient(std::span<const double> x) const;

 protected:
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::dense_matrix; }
  std::vector<double> infer_dims(const EncodedDataset& ds) const override;
  void build(const std::vector<double>& dims, Rng& rng) override;
  nn::Tape::Id logits(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;
  double learning_rate() const override { return std::get<MlpSpec>(spec_).lr; }
  std::size_t batch_size() const override { return std::get<MlpSpec>(spec_).batch; }

 private:
  std::vector<Linear> layers_;
};

// Embedding + stacked LSTM with masked (length-aware) recurrences; the final
// state of the top layer feeds a linear readout. Training batches group
// sequences of similar length.
class LstmModel : public NeuralModel {
 public:
  LstmModel(LstmSpec spec, double scale) : NeuralModel(spec, scale) {}

 protected:
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::token_sequences; }
  bool dense_input() const override { return false; }
  std::vector<double> infer_dims(const EncodedDataset& ds) const override;
  void build(const std::vector<double>& dims, Rng& rng) override;
  nn::Tape::Id logits(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;
  std::vector<std::vector<std::size_t>> batches(const EncodedDataset& ds, Rng& rng) const override;
  double learning_rate() const override { return std::get<LstmSpec>(spec_).lr; }
  std::size_t batch_size() const override { return std::get<LstmSpec>(spec_).batch; }

 private:
  struct Cell {
    std::size_t wx = 0, wh = 0, b = 0;
  };
  std::size_t embedding_ = 0;
  std::vector<Cell> cells_;
  Linear out_;
  std::size_t hidden_ = 0;
};

// One convolution over the one-hot opcode image (kernel V x k), ReLU, global
// max-pool over window positions, one hidden fully connected layer, logit.
// Parameters: V*k*F + F + F*fc + fc + fc + 1.
class CnnModel : public NeuralModel {
 public:
  CnnModel(CnnSpec spec, double scale);

 protected:
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::one_hot_sequence; }
  bool dense_input() const override { return false; }
  std::vector<double> infer_dims(const EncodedDataset& ds) const override;
  void build(const std::vector<double>& dims, Rng& rng) override;
  nn::Tape::Id logits(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;
  double learning_rate() const override { return std::get<CnnSpec>(spec_).lr; }
  std::size_t batch_size() const override { return std::get<CnnSpec>(spec_).batch; }

 private:
  std::size_t filters_ = 0, filter_bias_ = 0;
  Linear fc_, out_;
};

// Autoencoder + classifier on the latent code. The autoencoder phase runs
// first (`epochs` passes, an epoch is kept only if the full-data
// reconstruction loss does not increase; otherwise it is rolled back and the
// step size halved). The joint phase minimises
// lambda2*BCE + lambda1*max(0, L_rec - recon_target) + lambda3*L_rec, with
// L_rec the mean per-sample squared reconstruction error.
class AeClassifier : public NeuralModel {
 public:
  AeClassifier(AeClassifierSpec spec, double scale) : NeuralModel(spec, scale) {}

  nn::Tape::Id objective(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;
  double reconstruction_loss(const EncodedDataset& ds) const;

 protected:
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::dense_matrix; }
  std::vector<double> infer_dims(const EncodedDataset& ds) const override;
  void build(const std::vector<double>& dims, Rng& rng) override;
  nn::Tape::Id logits(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;
  void pre_train(const EncodedDataset& train, const TrainConfig& cfg, Rng& rng) override;
  double learning_rate() const override { return std::get<AeClassifierSpec>(spec_).lr; }
  std::size_t batch_size() const override { return std::get<AeClassifierSpec>(spec_).batch; }

 private:
  // Latent code and per-sample squared reconstruction error (n x 1).
  std::pair<nn::Tape::Id, nn::Tape::Id> encode(nn::Tape& tape, nn::Tape::Id x) const;

  std::vector<Linear> encoder_, decoder_, classifier_;
};

// GCN layers H' = ReLU(D^-1/2 (A+I) D^-1/2 H W + b) over each subgraph, mean
// readout, fully connected head to a subgraph logit; the app logit is the max
// over its subgraphs. Apps without subgraphs score 0 and are skipped in
// training.
class GnnModel : public NeuralModel {
 public:
  GnnModel(GnnSpec spec, double scale) : NeuralModel(spec, scale) {}

  std::vector<double> predict_scores(const EncodedDataset& ds) const override;
  nn::Tape::Id objective(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;

 protected:
  bool accepts(EncodingKind kind) const override { return kind == EncodingKind::graph_batch; }
  bool dense_input() const override { return false; }
  std::vector<double> infer_dims(const EncodedDataset& ds) const override;
  void build(const std::vector<double>& dims, Rng& rng) override;
  nn::Tape::Id logits(nn::Tape& tape, const EncodedDataset& ds, std::span<const std::size_t> rows) const override;
  std::vector<std::vector<std::size_t>> batches(const EncodedDataset& ds, Rng& rng) const override;
  double learning_rate() const override { return std::get<GnnSpec>(spec_).lr; }
  std::size_t batch_size() const override { return std::get<GnnSpec>(spec_).batch; }

 private:
  std::vector<Linear> gcn_;
  std::vector<Linear> head_;
};

}  // namespace mdbench
