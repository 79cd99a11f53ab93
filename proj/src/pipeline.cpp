#include "mdbench/pipeline.hpp"

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

namespace {

constexpr std::string_view kTags[] = {"drebin", "mamadroid", "mclaughlin", "hindroid", "deeprefiner", "kim",
                                      "malscan", "sdac", "homdroid", "xmal", "ramda", "msdroid"};

}  // namespace

std::string_view to_string(Approach approach) { return kTags[static_cast<std::size_t>(approach)]; }

Approach parse_approach(std::string_view tag) {
  std::string valid;
  for (std::size_t i = 0; i < std::size(kTags); ++i) {
    if (tag == kTags[i]) return static_cast<Approach>(i);
    valid += (i ? ", " : "") + std::string(kTags[i]);
  }
  throw ConfigError("unknown approach '" + std::string(tag) + "' (valid: " + valid + ")");
}

const std::vector<Approach>& all_approaches() {
  static const std::vector<Approach> all = [] {
    std::vector<Approach> v;
    for (std::size_t i = 0; i < std::size(kTags); ++i) v.push_back(static_cast<Approach>(i));
    return v;
  }();
  return all;
}

ModelSpec default_model_spec(Approach approach) {
  switch (approach) {
    case Approach::drebin: return LinearSvmSpec{};
    case Approach::mamadroid: return RandomForestSpec{};
    case Approach::mclaughlin: return CnnSpec{};
    case Approach::hindroid: return KernelSvmSpec{};
    case Approach::deeprefiner: return LstmSpec{};
    case Approach::kim: return MultimodalMlpSpec{};
    case Approach::malscan: return KnnSpec{3};
    case Approach::sdac: {
      LinearSvmSpec s;
      s.max_iter = 5000;
      return s;
    }
    case Approach::homdroid: return KnnSpec{1};
    case Approach::xmal: return AttentionMlpSpec{};
    case Approach::ramda: return AeClassifierSpec{};
    case Approach::msdroid: return GnnSpec{};
  }
  throw Error("unreachable approach");
}

int default_repeats(Approach approach) { return approach == Approach::sdac ? 5 : 1; }

bool attackable(Approach approach) {
  return approach == Approach::drebin || approach == Approach::xmal || approach == Approach::ramda;
}

Pipeline::Pipeline(Approach approach, SensitiveApiCatalog catalog, PipelineOptions options)
    : approach_(approach), catalog_(std::move(catalog)), options_(std::move(options)) {
  validate_train_config(options_.train);
  auto spec = apply_overrides(default_model_spec(approach), options_.model_overrides);
  switch (approach) {
    case Approach::drebin: encoder_ = BinaryFeatureEncoder::drebin(); break;
    case Approach::xmal: encoder_ = BinaryFeatureEncoder::xmal(); break;
    case Approach::ramda: encoder_ = BinaryFeatureEncoder::ramda(); break;
    case Approach::mamadroid: encoder_ = std::make_unique<MamaDroidEncoder>(); break;
    case Approach::mclaughlin: {
      const auto& cnn = std::get<CnnSpec>(spec);
      encoder_ = std::make_unique<OpcodeImageEncoder>(cnn.vocab, options_.opcode_image_maxlen);
      break;
    }
    case Approach::hindroid: encoder_ = std::make_unique<HinDroidEncoder>(options_.hindroid_cosine); break;
    case Approach::deeprefiner: encoder_ = std::make_unique<TokenSequenceEncoder>(options_.token_maxlen); break;
    case Approach::kim: encoder_ = std::make_unique<MultimodalEncoder>(); break;
    case Approach::malscan:
      encoder_ = std::make_unique<MalScanEncoder>(catalog_, options_.malscan_centrality);
      break;
    case Approach::sdac: encoder_ = std::make_unique<SdacEncoder>(options_.sdac); break;
    case Approach::homdroid: encoder_ = std::make_unique<HomDroidEncoder>(catalog_); break;
    case Approach::msdroid:
      encoder_ = std::make_unique<MsDroidEncoder>(catalog_, options_.msdroid_k_hops, options_.api_permissions);
      break;
  }
  model_ = build_model(spec, options_.desk_scale);
}

void Pipeline::require_fitted() const {
  if (!fitted_) throw Error(std::string(to_string(approach_)) + ": pipeline used before fit");
}

void Pipeline::fit(std::span<const FeatureRecord> train, std::span<const FeatureRecord> val, std::uint64_t seed,
                   std::vector<TimingRecord>* timings, std::int32_t year) {
  const std::string tag(to_string(approach_));
  const auto n_items = static_cast<std::int64_t>(train.size() + val.size());
  auto [encoded, t_enc] = time_phase({tag, Phase::transform, year, n_items}, [&] {
    encoder_->fit(train, mix_seed(seed, 0xe1));
    return std::make_pair(encoder_->transform(train), encoder_->transform(val));
  });
  TrainConfig cfg = options_.train;
  cfg.seed = mix_seed(seed, 0x3f);
  cfg.desk_scale_factor = options_.desk_scale;
  auto t_fit = time_phase({tag, Phase::train, year, static_cast<std::int64_t>(train.size())},
                          [&] { model_->fit(encoded.first, encoded.second, cfg); });
  fitted_ = true;
  if (timings) {
    timings->push_back(t_enc);
    timings->push_back(t_fit);
  }
}

EncodedDataset Pipeline::encode(std::span<const FeatureRecord> records) const {
  require_fitted();
  return encoder_->transform(records);
}

std::vector<int> Pipeline::predict_encoded(const EncodedDataset& ds) const {
  require_fitted();
  return model_->predict_labels(ds);
}

std::vector<int> Pipeline::predict(std::span<const FeatureRecord> records, std::vector<TimingRecord>* timings,
                                   std::int32_t year) const {
  auto [labels, t] = time_phase({std::string(to_string(approach_)), Phase::test, year,
                                 static_cast<std::int64_t>(records.size())},
                                [&] { return predict_encoded(encode(records)); });
  if (timings) timings->push_back(t);
  return labels;
}

std::vector<double> Pipeline::scores(std::span<const FeatureRecord> records) const {
  return model_->predict_scores(encode(records));
}

}  // namespace mdbench
