#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mdbench/record.hpp"

namespace mdbench {

// VirusTotal-style detection count for one app.
struct DetectionReport {
  std::string app_id;
  std::int32_t positives = 0;
};

// p >= 4 malicious, p == 0 benign, otherwise grayware.
Label apply_vt_rule(std::int32_t positives);
inline Label apply_vt_rule(const DetectionReport& report) { return apply_vt_rule(report.positives); }

// CSV with columns app_id,positives (header line optional).
std::vector<DetectionReport> read_detection_reports(const std::string& path);

// Sets vt_positives and label on every record named by a report. Returns the
// number of records relabeled.
std::size_t apply_reports(std::vector<FeatureRecord>& records, std::span<const DetectionReport> reports);

// Index from app_id to position; records must outlive it.
class CorpusIndex {
 public:
  explicit CorpusIndex(std::span<const FeatureRecord> records);
  const FeatureRecord& at(std::string_view app_id) const;
  bool contains(std::string_view app_id) const;
  std::vector<FeatureRecord> gather(std::span<const std::string> ids) const;

 private:
  std::span<const FeatureRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ScenarioSpec {
  std::size_t train_benign = 0;
  std::size_t train_malicious = 0;
  std::size_t val_benign = 0;
  std::size_t val_malicious = 0;
  std::size_t test_benign = 0;
  std::size_t test_malicious = 0;
  bool stratify_by_year = true;
  std::uint64_t seed = 0;

  // The four benchmark sub-datasets (1..4) with every count multiplied by
  // `scale` and rounded.
  static ScenarioSpec preset(int scenario, double scale = 1.0, std::uint64_t seed = 0);
};

struct DataSplit {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;

  bool operator==(const DataSplit&) const = default;
};

// Exact-count sampling without replacement, uniform inside (year, label)
// strata. Grayware and unknown records are never drawn. With stratification
// each year contributes an equal share; remainders go to the earliest years.
DataSplit sample_scenario(std::span<const FeatureRecord> records, const ScenarioSpec& spec);

// Shrinks the training set to `fraction` of each class (rounded), keeping the
// original order of the survivors. Validation and test are untouched.
DataSplit downsample_training(const DataSplit& split, std::span<const FeatureRecord> records, double fraction,
                              std::uint64_t seed);

enum class FeatureKind { hardware, app_intent, permission, api_call, opcode, code_string };

std::string_view to_string(FeatureKind kind);
FeatureKind parse_feature_kind(std::string_view text);

// Empties the listed feature kinds. app_intent removes components and intents
// together. Removing api_call clears api_calls and strips API names (and the
// sensitive flag) from external nodes; topology is kept.
FeatureRecord ablate_features(const FeatureRecord& record, const std::set<FeatureKind>& removed);

struct EvolutionPlan {
  std::int32_t base_year = 2011;
  std::int32_t bucket_months = 3;
  std::int32_t horizon_months = 24;
};

struct EvolutionSplits {
  DataSplit base;                                // 8:1:1 over the base year
  std::vector<std::vector<std::string>> buckets; // j-th window after the base year
  std::vector<std::int32_t> bucket_start_month;  // month index (year*12 + month-1)
};

EvolutionSplits rolling_splits(std::span<const FeatureRecord> records, const EvolutionPlan& plan,
                               std::uint64_t seed);

}  // namespace mdbench
