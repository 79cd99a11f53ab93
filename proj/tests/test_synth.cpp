#include <gtest/gtest.h>

#include <set>

#include "mdbench/corpus.hpp"
#include "mdbench/error.hpp"
#include "mdbench/feature_store.hpp"
#include "mdbench/metrics.hpp"
#include "mdbench/pipeline.hpp"
#include "mdbench/synth.hpp"

using namespace mdbench;

namespace {

std::size_t count_label(const std::vector<FeatureRecord>& rs, Label label) {
  std::size_t n = 0;
  for (const auto& r : rs) n += r.label == label;
  return n;
}

std::size_t overlap(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sa(a.begin(), a.end());
  std::size_t n = 0;
  for (const auto& x : b) n += sa.count(x);
  return n;
}

}  // namespace

TEST(Synth, ExactMaliciousCount) {
  SynthSpec spec;
  spec.n_apps = 100;
  spec.malware_ratio = 0.1;
  const auto c = generate(spec);
  EXPECT_EQ(c.records.size(), 100u);
  EXPECT_EQ(count_label(c.records, Label::malicious), 10u);
  EXPECT_EQ(count_label(c.records, Label::benign), 90u);
}

TEST(Synth, GraywareRatio) {
  SynthSpec spec;
  spec.n_apps = 200;
  spec.malware_ratio = 0.2;
  spec.grayware_ratio = 0.05;
  const auto c = generate(spec);
  EXPECT_EQ(count_label(c.records, Label::malicious), 40u);
  EXPECT_EQ(count_label(c.records, Label::grayware), 10u);
  for (const auto& r : c.records) EXPECT_EQ(apply_vt_rule(*r.vt_positives), r.label);
}

TEST(Synth, SameSpecGivesIdenticalCorpus) {
  SynthSpec spec;
  spec.n_apps = 150;
  spec.drift_strength = 0.5;
  const auto a = generate(spec);
  const auto b = generate(spec);
  EXPECT_EQ(a.records, b.records);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(record_to_json_line(a.records[i]), record_to_json_line(b.records[i]));
  }
  spec.seed = 2;
  EXPECT_NE(generate(spec).records, a.records);
}

TEST(Synth, EveryRecordValidates) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthSpec spec;
    spec.n_apps = 120;
    spec.malware_ratio = 0.3;
    spec.grayware_ratio = 0.1;
    spec.drift_strength = 0.4;
    spec.seed = seed;
    const auto c = generate(spec);
    ValidationOptions opts;
    opts.year_range = std::make_pair(spec.year_from, spec.year_to);
    const auto v = validate_corpus(c.records, c.catalog, opts);
    EXPECT_TRUE(v.ok()) << (v.ok() ? "" : v.violations.front().message);
  }
}

TEST(Synth, NoDriftKeepsSignatureFixed) {
  SynthSpec spec;
  spec.drift_strength = 0.0;
  const auto sched = describe_signal(spec);
  ASSERT_EQ(sched.size(), 10u);
  for (const auto& y : sched) {
    EXPECT_EQ(y.features, sched.front().features);
    EXPECT_TRUE(y.changes.empty());
  }
}

TEST(Synth, FullDriftRotatesEveryYear) {
  SynthSpec spec;
  spec.drift_strength = 1.0;
  const auto sched = describe_signal(spec);
  EXPECT_TRUE(sched.front().changes.empty());
  for (std::int32_t year = spec.year_from + 1; year <= spec.year_to; ++year) {
    const auto before = signature_at(sched, year - 1, 12);
    const auto after = signature_at(sched, year, 12);
    ASSERT_EQ(before.size(), after.size());
    for (std::size_t k = 0; k < before.size(); ++k) EXPECT_NE(before[k], after[k]) << year << " slot " << k;
  }
}

TEST(Synth, SingleYearSchedule) {
  SynthSpec spec;
  spec.year_from = spec.year_to = 2015;
  const auto sched = describe_signal(spec);
  ASSERT_EQ(sched.size(), 1u);
  EXPECT_EQ(sched[0].year, 2015);
}

TEST(Synth, DescribeMatchesGenerate) {
  SynthSpec spec;
  spec.n_apps = 80;
  spec.drift_strength = 0.5;
  const auto c = generate(spec);
  const auto sched = describe_signal(spec);
  ASSERT_EQ(c.schedule.size(), sched.size());
  for (std::size_t i = 0; i < sched.size(); ++i) {
    EXPECT_EQ(c.schedule[i].features, sched[i].features);
    EXPECT_EQ(c.schedule[i].changes.size(), sched[i].changes.size());
  }
  EXPECT_FALSE(format_signal(sched).empty());
}

TEST(Synth, FullSignalPlantsWholeSignature) {
  SynthSpec spec;
  spec.n_apps = 100;
  spec.malware_ratio = 0.5;
  spec.signal_min = spec.signal_max = 1.0;
  const auto c = generate(spec);
  for (const auto& r : c.records) {
    if (r.label != Label::malicious) continue;
    for (const auto& f : signature_at(c.schedule, r.year, r.month)) {
      if (f.rfind("perm::", 0) == 0) EXPECT_TRUE(r.manifest.permissions.count(f.substr(6))) << f;
      if (f.rfind("api::", 0) == 0) EXPECT_TRUE(r.code.api_calls.count(f.substr(5))) << f;
    }
  }
}

TEST(Synth, DriftLowersOverlapWithFirstYear) {
  // Mean overlap between the last and first year signature over seeds, for
  // increasing drift.
  double previous = 1e9;
  for (double drift : {0.0, 0.2, 0.5, 1.0}) {
    double total = 0.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      SynthSpec spec;
      spec.drift_strength = drift;
      spec.seed = seed;
      const auto sched = describe_signal(spec);
      total += static_cast<double>(overlap(sched.front().features, sched.back().features));
    }
    EXPECT_LT(total, previous) << drift;
    previous = total;
  }
}

TEST(Synth, UnsatisfiableKnobsThrow) {
  SynthSpec spec;
  spec.signature_permissions = spec.n_permissions + 1;
  EXPECT_THROW(generate(spec), Error);
  SynthSpec s2;
  s2.n_sensitive = s2.n_apis + 1;
  EXPECT_THROW(s2.validate(), Error);
  SynthSpec s3;
  s3.year_from = 2020;
  s3.year_to = 2011;
  EXPECT_THROW(s3.validate(), Error);
  SynthSpec s4;
  s4.benign_marker_rate = 1.5;
  EXPECT_THROW(s4.validate(), Error);
}

TEST(Synth, SeparableKnobsGivePerfectTrainingFit) {
  SynthSpec spec;
  spec.n_apps = 600;
  spec.malware_ratio = 0.5;
  spec.signal_min = spec.signal_max = 1.0;
  spec.lookalike_ratio = 0.0;
  const auto c = generate(spec);
  std::vector<FeatureRecord> train;
  for (const auto& r : c.records) {
    if (r.label == Label::benign || r.label == Label::malicious) train.push_back(r);
  }
  Pipeline p(Approach::drebin, c.catalog);
  p.fit(train, train, 1);
  std::vector<int> y;
  for (const auto& r : train) y.push_back(binary_label(r.label));
  const auto pred = p.predict(train);
  EXPECT_DOUBLE_EQ(f1_score(confusion(y, pred)).value, 1.0);
}
