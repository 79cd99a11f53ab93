#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mdbench/encoders.hpp"
#include "mdbench/models.hpp"
#include "mdbench/profiler.hpp"
#include "mdbench/record.hpp"

namespace mdbench {

enum class Approach {
  drebin,
  mamadroid,
  mclaughlin,
  hindroid,
  deeprefiner,
  kim,
  malscan,
  sdac,
  homdroid,
  xmal,
  ramda,
  msdroid,
};

std::string_view to_string(Approach approach);
// Throws ConfigError listing the valid tags.
Approach parse_approach(std::string_view tag);
const std::vector<Approach>& all_approaches();

struct PipelineOptions {
  double desk_scale = 10.0;
  TrainConfig train;
  std::size_t opcode_image_maxlen = 2048;
  std::size_t token_maxlen = 4096;
  int msdroid_k_hops = 2;
  graph::CentralityKind malscan_centrality = graph::CentralityKind::degree;
  bool hindroid_cosine = false;
  SdacOptions sdac;
  ApiPermissionMap api_permissions;
  // Model hyperparameter overrides as a JSON object (see apply_overrides).
  nlohmann::json model_overrides = nlohmann::json::object();
  // Independent repeats averaged by the runner; 0 = approach default
  // (5 for SDAC, 1 otherwise).
  int repeats = 0;
};

// Default model spec of an approach before overrides.
ModelSpec default_model_spec(Approach approach);
int default_repeats(Approach approach);
// Only binary-vector encodings admit the addition-only attacks.
bool attackable(Approach approach);

// One encoder + one model with the approach's default hyperparameters.
class Pipeline {
 public:
  Pipeline(Approach approach, SensitiveApiCatalog catalog, PipelineOptions options = {});

  Approach approach() const { return approach_; }
  const PipelineOptions& options() const { return options_; }

  // Fits the encoder on `train`, then the model with validation-based early
  // stopping. Timings (transform and train) are appended when requested.
  void fit(std::span<const FeatureRecord> train, std::span<const FeatureRecord> val, std::uint64_t seed,
           std::vector<TimingRecord>* timings = nullptr, std::int32_t year = 0);

  EncodedDataset encode(std::span<const FeatureRecord> records) const;
  std::vector<int> predict(std::span<const FeatureRecord> records, std::vector<TimingRecord>* timings = nullptr,
                           std::int32_t year = 0) const;
  std::vector<int> predict_encoded(const EncodedDataset& ds) const;
  std::vector<double> scores(std::span<const FeatureRecord> records) const;

  const Encoder& encoder() const { return *encoder_; }
  const Model& model() const { return *model_; }
  bool fitted() const { return fitted_; }

 private:
  void require_fitted() const;

  Approach approach_;
  SensitiveApiCatalog catalog_;
  PipelineOptions options_;
  std::unique_ptr<Encoder> encoder_;
  std::unique_ptr<Model> model_;
  bool fitted_ = false;
};

}  // namespace mdbench
