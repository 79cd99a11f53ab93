#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mdbench/encoded.hpp"

namespace mdbench {

struct LinearSvmSpec {
  double C = 1.0;
  int max_iter = 1000;
  double tol = 1e-4;
};

struct KernelSvmSpec {
  double C = 1.0;
  int max_iter = 1000000;
  double tol = 1e-3;
};

struct KnnSpec {
  int k = 3;
};

struct RandomForestSpec {
  int n_trees = 100;
  int max_depth = 0;  // 0 = unlimited
  std::uint64_t seed = 1;
};

struct MultimodalMlpSpec {
  std::vector<std::size_t> tower_layers{5000, 2500, 1000};
  std::vector<std::size_t> merge_layers{1000, 500, 100, 10};
  double lr = 0.001;
  std::size_t batch = 32;
};

struct AttentionMlpSpec {
  std::size_t attn_hidden = 158;
  std::size_t mlp_layers = 3;
  std::size_t hidden = 64;
  double lr = 0.001;
  std::size_t batch = 20;
};

// Plain feed-forward classifier; the adversarial substitute model.
struct MlpSpec {
  std::vector<std::size_t> hidden{128};
  double lr = 0.001;
  std::size_t batch = 32;
};

struct LstmSpec {
  std::size_t layers = 2;
  std::size_t embed = 16;
  std::size_t hidden = 64;
  double lr = 0.001;
  std::size_t batch = 32;
};

struct CnnSpec {
  std::size_t vocab = 256;
  std::size_t filters = 32;
  std::size_t kernel = 7;
  std::size_t fc = 16;
  double lr = 0.01;
  std::size_t batch = 32;
};

struct AeClassifierSpec {
  std::size_t enc_layers = 3;
  std::size_t dec_layers = 3;
  std::size_t clf_layers = 4;
  std::size_t hidden = 600;
  double lr = 0.001;
  std::size_t batch = 64;
  int epochs = 20;  // autoencoder phase
  double recon_target = 30.0;
  double lambda1 = 10.0;
  double lambda2 = 1.0;
  double lambda3 = 10.0;
};

struct GnnSpec {
  std::size_t layers = 3;
  std::size_t hidden = 512;
  std::size_t fc_layers = 2;
  std::size_t fc_hidden = 512;
  double lr = 0.01;
  std::size_t batch = 64;
};

using ModelSpec = std::variant<LinearSvmSpec, KernelSvmSpec, KnnSpec, RandomForestSpec, MultimodalMlpSpec,
                               AttentionMlpSpec, MlpSpec, LstmSpec, CnnSpec, AeClassifierSpec, GnnSpec>;

std::string_view family_name(const ModelSpec& spec);
// Throws ConfigError naming the offending field.
void validate_spec(const ModelSpec& spec);

nlohmann::json spec_to_json(const ModelSpec& spec);
// {"family": ..., fields...}; missing fields keep their defaults.
ModelSpec spec_from_json(const nlohmann::json& j);
// Applies field overrides on top of an existing spec of the same family.
ModelSpec apply_overrides(const ModelSpec& spec, const nlohmann::json& overrides);

// Desk-scale width: max(min(w, 8), ceil(w / factor)); factor 1 is identity.
std::size_t scaled_width(std::size_t w, double factor);

struct TrainConfig {
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 1;
  double desk_scale_factor = 10.0;
};

void validate_train_config(const TrainConfig& cfg);

struct EpochLog {
  int epoch = 0;
  std::string phase;
  double train_loss = 0.0;
  double val_f1 = 0.0;
};

class Model {
 public:
  virtual ~Model() = default;

  const ModelSpec& spec() const { return spec_; }
  std::string_view family() const { return family_name(spec_); }
  virtual bool differentiable() const { return false; }

  // Checks labels (binary, non-empty, both classes unless the family
  // tolerates one) and input kind, then trains.
  void fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg);
  virtual std::vector<double> predict_scores(const EncodedDataset& ds) const = 0;
  // score > threshold -> malicious; default threshold per family (0 for the
  // SVM decision function, 0.5 for probabilities and vote shares).
  std::vector<int> predict_labels(const EncodedDataset& ds, std::optional<double> threshold = {}) const;
  virtual double default_threshold() const { return 0.5; }

  bool fitted() const { return fitted_; }
  const std::vector<EpochLog>& training_log() const { return log_; }
  void write_training_log(const std::string& path) const;

  // Learned state as a list of matrices (shape metadata first).
  virtual std::vector<DenseMatrix> state() const = 0;
  virtual void load_state(const std::vector<DenseMatrix>& state) = 0;

 protected:
  explicit Model(ModelSpec spec) : spec_(std::move(spec)) {}
  virtual void do_fit(const EncodedDataset& train, const EncodedDataset& val, const TrainConfig& cfg) = 0;
  virtual bool accepts(EncodingKind kind) const = 0;
  virtual bool allows_single_class() const { return false; }
  void require_fitted() const;
  void check_input(const EncodedDataset& ds) const;

  ModelSpec spec_;
  bool fitted_ = false;
  std::vector<EpochLog> log_;
};

// `scale` is the desk-scale factor applied to neural widths (1 = as given).
std::unique_ptr<Model> build_model(const ModelSpec& spec, double scale = 1.0);

// Central-difference check of the training loss gradient on at most
// `max_params` randomly chosen parameters; builds the network for `ds` when the
// model is untrained. Returns the largest relative error. Throws Error
// ("not applicable") for non-differentiable families.
double finite_difference_check(Model& model, const EncodedDataset& ds, double epsilon = 1e-5,
                               std::size_t max_params = 20, std::uint64_t seed = 1);

// Versioned checkpoint: magic, version, spec JSON, desk scale, state blobs.
void save_checkpoint(const Model& model, double scale, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

}  // namespace mdbench
