#include "mdbench/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

Label apply_vt_rule(std::int32_t positives) {
  if (positives >= 4) return Label::malicious;
  if (positives == 0) return Label::benign;
  return Label::grayware;
}

std::vector<DetectionReport> read_detection_reports(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open detection reports: " + path);
  std::vector<DetectionReport> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw ParseError(path + ": line " + std::to_string(line_number) + ": expected app_id,positives",
                       line_number);
    }
    std::string id = line.substr(0, comma);
    std::string count = line.substr(comma + 1);
    if (line_number == 1 && id == "app_id") continue;
    try {
      std::size_t used = 0;
      long p = std::stol(count, &used);
      if (used != count.size() || p < 0) throw std::invalid_argument("bad count");
      out.push_back({id, static_cast<std::int32_t>(p)});
    } catch (const std::exception&) {
      throw ParseError(path + ": line " + std::to_string(line_number) + ": bad positives '" + count + "'",
                       line_number);
    }
  }
  return out;
}

std::size_t apply_reports(std::vector<FeatureRecord>& records, std::span<const DetectionReport> reports) {
  std::unordered_map<std::string, std::int32_t> by_id;
  for (const auto& r : reports) {
    if (r.positives < 0) throw Error("negative positives for " + r.app_id);
    by_id[r.app_id] = r.positives;
  }
  std::size_t n = 0;
  for (auto& rec : records) {
    auto it = by_id.find(rec.app_id);
    if (it == by_id.end()) continue;
    rec.vt_positives = it->second;
    rec.label = apply_vt_rule(it->second);
    ++n;
  }
  return n;
}

CorpusIndex::CorpusIndex(std::span<const FeatureRecord> records) : records_(records) {
  index_.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) index_.emplace(records[i].app_id, i);
}

const FeatureRecord& CorpusIndex::at(std::string_view app_id) const {
  auto it = index_.find(std::string(app_id));
  if (it == index_.end()) throw Error("unknown app_id " + std::string(app_id));
  return records_[it->second];
}

bool CorpusIndex::contains(std::string_view app_id) const { return index_.count(std::string(app_id)) > 0; }

std::vector<FeatureRecord> CorpusIndex::gather(std::span<const std::string> ids) const {
  std::vector<FeatureRecord> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(at(id));
  return out;
}

ScenarioSpec ScenarioSpec::preset(int scenario, double scale, std::uint64_t seed) {
  if (scenario < 1 || scenario > 4) throw ConfigError("scenario preset must be 1..4");
  if (!(scale > 0.0)) throw ConfigError("scenario scale must be positive");
  auto s = [scale](double v) { return static_cast<std::size_t>(std::llround(v * scale)); };
  ScenarioSpec spec;
  const bool balanced_train = scenario >= 3;
  const bool balanced_test = scenario == 2 || scenario == 4;
  spec.train_benign = balanced_train ? s(8000) : s(14400);
  spec.train_malicious = balanced_train ? s(8000) : s(1600);
  spec.val_benign = spec.test_benign = balanced_test ? s(1000) : s(1800);
  spec.val_malicious = spec.test_malicious = balanced_test ? s(1000) : s(200);
  spec.stratify_by_year = true;
  spec.seed = seed;
  return spec;
}

namespace {

// Splits `total` into `parts` near-equal shares; remainders to the first parts.
std::vector<std::size_t> equal_shares(std::size_t total, std::size_t parts) {
  std::vector<std::size_t> out(parts, parts ? total / parts : 0);
  for (std::size_t i = 0; parts && i < total % parts; ++i) ++out[i];
  return out;
}

bool usable(const FeatureRecord& r) { return r.label == Label::benign || r.label == Label::malicious; }

}  // namespace

DataSplit sample_scenario(std::span<const FeatureRecord> records, const ScenarioSpec& spec) {
  // stratum key: (label, year); year collapses to 0 without stratification
  std::map<std::pair<int, std::int32_t>, std::vector<std::size_t>> strata;
  std::set<std::int32_t> years;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!usable(r)) continue;
    years.insert(r.year);
    const int lab = r.label == Label::malicious ? 1 : 0;
    strata[{lab, spec.stratify_by_year ? r.year : 0}].push_back(i);
  }
  std::vector<std::int32_t> year_list = spec.stratify_by_year ? std::vector<std::int32_t>(years.begin(), years.end())
                                                              : std::vector<std::int32_t>{0};
  if (year_list.empty()) year_list.push_back(0);

  Rng rng(spec.seed);
  DataSplit split;
  for (int lab = 0; lab <= 1; ++lab) {
    const std::size_t want[3] = {
        lab ? spec.train_malicious : spec.train_benign,
        lab ? spec.val_malicious : spec.val_benign,
        lab ? spec.test_malicious : spec.test_benign,
    };
    std::vector<std::size_t> shares[3];
    for (int s = 0; s < 3; ++s) shares[s] = equal_shares(want[s], year_list.size());
    for (std::size_t y = 0; y < year_list.size(); ++y) {
      const std::size_t need = shares[0][y] + shares[1][y] + shares[2][y];
      if (need == 0) continue;
      auto it = strata.find({lab, year_list[y]});
      const std::size_t have = it == strata.end() ? 0 : it->second.size();
      if (have < need) {
        std::ostringstream msg;
        msg << "insufficient " << (lab ? "malicious" : "benign") << " records";
        if (spec.stratify_by_year) msg << " in year " << year_list[y];
        msg << ": need " << need << ", have " << have;
        throw Error(msg.str());
      }
      std::vector<std::size_t> pool = it->second;
      rng.shuffle(pool);
      std::size_t pos = 0;
      std::vector<std::string>* targets[3] = {&split.train, &split.validation, &split.test};
      for (int s = 0; s < 3; ++s) {
        for (std::size_t k = 0; k < shares[s][y]; ++k) targets[s]->push_back(records[pool[pos++]].app_id);
      }
    }
  }
  return split;
}

DataSplit downsample_training(const DataSplit& split, std::span<const FeatureRecord> records, double fraction,
                              std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("downsample fraction must be in (0, 1]");
  if (fraction == 1.0) return split;
  CorpusIndex index(records);
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    by_class[index.at(split.train[i]).label == Label::malicious ? 1 : 0].push_back(i);
  }
  Rng rng(seed);
  std::vector<char> keep(split.train.size(), 0);
  for (auto& cls : by_class) {
    const auto k = static_cast<std::size_t>(std::llround(static_cast<double>(cls.size()) * fraction));
    for (std::size_t pick : rng.sample_indices(cls.size(), k)) keep[cls[pick]] = 1;
  }
  DataSplit out;
  out.validation = split.validation;
  out.test = split.test;
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    if (keep[i]) out.train.push_back(split.train[i]);
  }
  return out;
}

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::hardware: return "hardware";
    case FeatureKind::app_intent: return "app_intent";
    case FeatureKind::permission: return "permission";
    case FeatureKind::api_call: return "api_call";
    case FeatureKind::opcode: return "opcode";
    case FeatureKind::code_string: return "code_string";
  }
  return "hardware";
}

FeatureKind parse_feature_kind(std::string_view text) {
  for (auto k : {FeatureKind::hardware, FeatureKind::app_intent, FeatureKind::permission, FeatureKind::api_call,
                 FeatureKind::opcode, FeatureKind::code_string}) {
    if (to_string(k) == text) return k;
  }
  throw Error("unknown feature kind '" + std::string(text) +
              "' (expected hardware, app_intent, permission, api_call, opcode, code_string)");
}

FeatureRecord ablate_features(const FeatureRecord& record, const std::set<FeatureKind>& removed) {
  FeatureRecord out = record;
  for (auto kind : removed) {
    switch (kind) {
      case FeatureKind::hardware: out.manifest.hardware.clear(); break;
      case FeatureKind::app_intent:
        out.manifest.components.clear();
        out.manifest.intents.clear();
        break;
      case FeatureKind::permission: out.manifest.permissions.clear(); break;
      case FeatureKind::api_call:
        out.code.api_calls.clear();
        for (auto& node : out.graph.nodes) {
          if (node.kind == NodeKind::external_api) {
            node.api_name.reset();
            node.sensitive = false;
          }
        }
        break;
      case FeatureKind::opcode: out.code.opcode_seq.clear(); break;
      case FeatureKind::code_string: out.code.code_strings.clear(); break;
    }
  }
  return out;
}

EvolutionSplits rolling_splits(std::span<const FeatureRecord> records, const EvolutionPlan& plan,
                               std::uint64_t seed) {
  if (plan.bucket_months < 1) throw Error("bucket_months must be >= 1");
  if (plan.horizon_months < plan.bucket_months || plan.horizon_months % plan.bucket_months != 0) {
    throw Error("horizon_months must be a positive multiple of bucket_months");
  }
  std::int32_t max_year = INT32_MIN;
  for (const auto& r : records) max_year = std::max(max_year, r.year);
  const std::int32_t start = (plan.base_year + 1) * 12;
  const std::int32_t end = start + plan.horizon_months;  // exclusive
  const std::int32_t last_year = (end - 1) / 12;
  if (last_year > max_year) {
    throw Error("evolution horizon reaches year " + std::to_string(last_year) + " but corpus ends in " +
                std::to_string(max_year));
  }

  EvolutionSplits out;
  const std::size_t n_buckets = static_cast<std::size_t>(plan.horizon_months / plan.bucket_months);
  out.buckets.resize(n_buckets);
  for (std::size_t j = 0; j < n_buckets; ++j) {
    out.bucket_start_month.push_back(start + static_cast<std::int32_t>(j) * plan.bucket_months);
  }

  std::vector<std::size_t> base[2];
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!usable(r)) continue;
    if (r.year == plan.base_year) {
      base[r.label == Label::malicious ? 1 : 0].push_back(i);
      continue;
    }
    const std::int32_t m = r.month_index();
    if (m >= start && m < end) {
      out.buckets[static_cast<std::size_t>((m - start) / plan.bucket_months)].push_back(r.app_id);
    }
  }
  if (base[0].empty() && base[1].empty()) {
    throw Error("corpus has no labeled records in base year " + std::to_string(plan.base_year));
  }

  Rng rng(seed);
  for (auto& cls : base) {
    rng.shuffle(cls);
    const std::size_t n_val = cls.size() / 10;
    const std::size_t n_test = cls.size() / 10;
    const std::size_t n_train = cls.size() - n_val - n_test;
    for (std::size_t k = 0; k < cls.size(); ++k) {
      const auto& id = records[cls[k]].app_id;
      if (k < n_train) {
        out.base.train.push_back(id);
      } else if (k < n_train + n_val) {
        out.base.validation.push_back(id);
      } else {
        out.base.test.push_back(id);
      }
    }
  }
  return out;
}

}  // namespace mdbench
