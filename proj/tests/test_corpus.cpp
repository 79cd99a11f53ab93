#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "mdbench/corpus.hpp"
#include "mdbench/error.hpp"
#include "mdbench/synth.hpp"
#include "support.hpp"
#include "temp_dir.hpp"

using namespace mdbench;
using testsupport::make_record;

namespace {

// n benign and m malicious records per year, all labeled.
std::vector<FeatureRecord> labeled_corpus(std::int32_t from, std::int32_t to, std::size_t benign, std::size_t mal,
                                          std::size_t gray = 0) {
  std::vector<FeatureRecord> rs;
  for (std::int32_t y = from; y <= to; ++y) {
    auto add = [&](Label label, std::size_t count) {
      for (std::size_t i = 0; i < count; ++i) {
        auto r = make_record(std::string(to_string(label)) + std::to_string(y) + "_" + std::to_string(i), label, y,
                             {}, {});
        r.month = 1 + static_cast<std::int32_t>(i % 12);
        if (label == Label::grayware) r.vt_positives = 2;
        rs.push_back(std::move(r));
      }
    };
    add(Label::benign, benign);
    add(Label::malicious, mal);
    add(Label::grayware, gray);
  }
  return rs;
}

std::map<std::string, const FeatureRecord*> by_id(const std::vector<FeatureRecord>& rs) {
  std::map<std::string, const FeatureRecord*> m;
  for (const auto& r : rs) m[r.app_id] = &r;
  return m;
}

std::size_t count_label(const std::vector<std::string>& ids, const std::map<std::string, const FeatureRecord*>& m,
                        Label label) {
  return static_cast<std::size_t>(
      std::count_if(ids.begin(), ids.end(), [&](const auto& id) { return m.at(id)->label == label; }));
}

}  // namespace

TEST(Corpus, VtRuleThresholds) {
  EXPECT_EQ(apply_vt_rule(0), Label::benign);
  for (int p = 1; p <= 3; ++p) EXPECT_EQ(apply_vt_rule(p), Label::grayware);
  for (int p = 4; p <= 70; ++p) EXPECT_EQ(apply_vt_rule(p), Label::malicious);
}

TEST(Corpus, ReportsRelabelRecords) {
  testsupport::TempDir dir;
  {
    std::ofstream out(dir.file("r.csv"));
    out << "app_id,positives\na,0\nb,2\nc,9\nzzz,5\n";
  }
  const auto reports = read_detection_reports(dir.file("r.csv"));
  ASSERT_EQ(reports.size(), 4u);
  std::vector<FeatureRecord> rs{make_record("a", Label::unknown, 2012, {}, {}),
                                make_record("b", Label::unknown, 2012, {}, {}),
                                make_record("c", Label::unknown, 2012, {}, {})};
  EXPECT_EQ(apply_reports(rs, reports), 3u);
  EXPECT_EQ(rs[0].label, Label::benign);
  EXPECT_EQ(rs[1].label, Label::grayware);
  EXPECT_EQ(rs[2].label, Label::malicious);
  EXPECT_EQ(rs[2].vt_positives, 9);
}

TEST(Corpus, MalformedReportLineIsRejected) {
  testsupport::TempDir dir;
  {
    std::ofstream out(dir.file("r.csv"));
    out << "a,0\nb,x\n";
  }
  EXPECT_THROW(read_detection_reports(dir.file("r.csv")), ParseError);
}

TEST(Corpus, PresetCounts) {
  const auto s1 = ScenarioSpec::preset(1);
  EXPECT_EQ(s1.train_benign, 14400u);
  EXPECT_EQ(s1.train_malicious, 1600u);
  EXPECT_EQ(s1.val_benign, 1800u);
  EXPECT_EQ(s1.test_malicious, 200u);
  const auto s4 = ScenarioSpec::preset(4);
  EXPECT_EQ(s4.train_benign, 8000u);
  EXPECT_EQ(s4.train_malicious, 8000u);
  EXPECT_EQ(s4.test_benign, 1000u);
  const auto scaled = ScenarioSpec::preset(4, 0.1);
  EXPECT_EQ(scaled.train_malicious, 800u);
  EXPECT_THROW(ScenarioSpec::preset(5), ConfigError);
}

TEST(Corpus, SampleScenarioExactCountsAndDisjoint) {
  const auto rs = labeled_corpus(2011, 2015, 40, 20, 5);
  const auto m = by_id(rs);
  ScenarioSpec spec{100, 50, 20, 10, 30, 15, true, 7};
  const auto split = sample_scenario(rs, spec);
  EXPECT_EQ(count_label(split.train, m, Label::benign), 100u);
  EXPECT_EQ(count_label(split.train, m, Label::malicious), 50u);
  EXPECT_EQ(count_label(split.validation, m, Label::malicious), 10u);
  EXPECT_EQ(count_label(split.test, m, Label::benign), 30u);
  std::set<std::string> all;
  for (const auto* part : {&split.train, &split.validation, &split.test}) {
    for (const auto& id : *part) {
      EXPECT_TRUE(all.insert(id).second) << id;
      EXPECT_NE(m.at(id)->label, Label::grayware);
    }
  }
}

TEST(Corpus, StratificationSpreadsYearsEvenly) {
  const auto rs = labeled_corpus(2011, 2015, 40, 20);
  const auto m = by_id(rs);
  const auto split = sample_scenario(rs, ScenarioSpec{100, 50, 0, 0, 0, 0, true, 3});
  std::map<std::int32_t, std::size_t> per_year;
  for (const auto& id : split.train) ++per_year[m.at(id)->year];
  for (const auto& [y, c] : per_year) EXPECT_EQ(c, 30u) << y;
}

TEST(Corpus, SampleScenarioIsDeterministicUnderSeed) {
  const auto rs = labeled_corpus(2011, 2013, 30, 30);
  const ScenarioSpec spec{20, 20, 5, 5, 5, 5, true, 9};
  EXPECT_EQ(sample_scenario(rs, spec), sample_scenario(rs, spec));
  auto other = spec;
  other.seed = 10;
  EXPECT_NE(sample_scenario(rs, spec), sample_scenario(rs, other));
}

TEST(Corpus, InsufficientClassThrows) {
  const auto rs = labeled_corpus(2011, 2011, 20, 5);
  EXPECT_THROW(sample_scenario(rs, ScenarioSpec{0, 10, 0, 0, 0, 0, true, 1}), Error);
}

TEST(Corpus, DownsampleKeepsClassCountsAndOrder) {
  const auto rs = labeled_corpus(2011, 2014, 60, 10);
  const auto m = by_id(rs);
  const auto split = sample_scenario(rs, ScenarioSpec{180, 20, 10, 5, 10, 5, true, 4});
  const auto half = downsample_training(split, rs, 0.5, 1);
  EXPECT_EQ(count_label(half.train, m, Label::benign), 90u);
  EXPECT_EQ(count_label(half.train, m, Label::malicious), 10u);
  EXPECT_EQ(half.validation, split.validation);
  EXPECT_EQ(half.test, split.test);
  std::size_t pos = 0;
  for (const auto& id : half.train) {
    const auto it = std::find(split.train.begin() + static_cast<std::ptrdiff_t>(pos), split.train.end(), id);
    ASSERT_NE(it, split.train.end());
    pos = static_cast<std::size_t>(it - split.train.begin()) + 1;
  }
  EXPECT_EQ(downsample_training(split, rs, 1.0, 1), split);
  EXPECT_THROW(downsample_training(split, rs, 0.0, 1), Error);
  EXPECT_THROW(downsample_training(split, rs, 1.5, 1), Error);
}

TEST(Corpus, AblationEmptiesOnlyListedKinds) {
  auto r = make_record("a", Label::benign, 2012, {"android.permission.INTERNET"}, {{"java.io.File.delete", 1}}, {1, 2});
  r.manifest.intents.insert("android.intent.action.MAIN");
  r.manifest.components.insert({ComponentKind::activity, "Main"});
  r.manifest.hardware.insert("camera");
  r.code.code_strings.insert("id:x");
  const auto no_perm = ablate_features(r, {FeatureKind::permission});
  EXPECT_TRUE(no_perm.manifest.permissions.empty());
  EXPECT_EQ(no_perm.manifest.intents, r.manifest.intents);
  EXPECT_EQ(ablate_features(r, {}), r);
  const auto no_intent = ablate_features(r, {FeatureKind::app_intent});
  EXPECT_TRUE(no_intent.manifest.intents.empty());
  EXPECT_TRUE(no_intent.manifest.components.empty());
  const auto no_api = ablate_features(r, {FeatureKind::api_call});
  EXPECT_TRUE(no_api.code.api_calls.empty());
  EXPECT_EQ(no_api.graph.edges, r.graph.edges);
  for (const auto& n : no_api.graph.nodes) {
    EXPECT_FALSE(n.api_name.has_value());
    EXPECT_FALSE(n.sensitive);
  }
  EXPECT_TRUE(ablate_features(r, {FeatureKind::opcode}).code.opcode_seq.empty());
  EXPECT_THROW(parse_feature_kind("bogus"), Error);
}

TEST(Corpus, RollingSplitsBaseRatioAndBuckets) {
  std::vector<FeatureRecord> rs;
  for (int i = 0; i < 1000; ++i) {
    auto r = make_record("b" + std::to_string(i), i % 2 ? Label::malicious : Label::benign, 2011, {}, {});
    r.month = 1 + i % 12;
    rs.push_back(std::move(r));
  }
  for (std::int32_t y = 2012; y <= 2013; ++y) {
    for (int i = 0; i < 120; ++i) {
      auto r = make_record("e" + std::to_string(y) + "_" + std::to_string(i), i % 2 ? Label::malicious : Label::benign,
                           y, {}, {});
      r.month = 1 + i % 12;
      rs.push_back(std::move(r));
    }
  }
  const auto ev = rolling_splits(rs, EvolutionPlan{2011, 3, 24}, 5);
  EXPECT_EQ(ev.base.train.size(), 800u);
  EXPECT_EQ(ev.base.validation.size(), 100u);
  EXPECT_EQ(ev.base.test.size(), 100u);
  ASSERT_EQ(ev.buckets.size(), 8u);
  for (const auto& b : ev.buckets) EXPECT_EQ(b.size(), 30u);
  EXPECT_EQ(ev.bucket_start_month[0], 2012 * 12);
  EXPECT_EQ(ev.bucket_start_month[1], 2012 * 12 + 3);
}

TEST(Corpus, RollingSplitsPastCorpusEndThrows) {
  const auto rs = labeled_corpus(2019, 2020, 10, 10);
  EXPECT_THROW(rolling_splits(rs, EvolutionPlan{2020, 3, 24}, 1), Error);
}

TEST(Corpus, CorpusIndexGathersInOrder) {
  const auto rs = labeled_corpus(2011, 2011, 3, 3);
  CorpusIndex idx(rs);
  const std::vector<std::string> ids{rs[4].app_id, rs[0].app_id};
  const auto got = idx.gather(ids);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0], rs[4]);
  EXPECT_EQ(got[1], rs[0]);
  EXPECT_THROW(idx.at("missing"), Error);
}

TEST(Corpus, RandomSpecsAlwaysHitExactCounts) {
  std::mt19937_64 rng(17);
  const auto rs = labeled_corpus(2011, 2016, 60, 30, 4);
  const auto m = by_id(rs);
  for (int trial = 0; trial < 50; ++trial) {
    auto pick = [&](std::size_t hi) { return static_cast<std::size_t>(rng() % (hi + 1)); };
    ScenarioSpec spec;
    spec.train_benign = pick(200);
    spec.val_benign = pick(60);
    spec.test_benign = pick(60);
    spec.train_malicious = pick(100);
    spec.val_malicious = pick(30);
    spec.test_malicious = pick(30);
    spec.stratify_by_year = trial % 2 == 0;
    spec.seed = rng();
    const auto split = sample_scenario(rs, spec);
    EXPECT_EQ(count_label(split.train, m, Label::benign), spec.train_benign);
    EXPECT_EQ(count_label(split.train, m, Label::malicious), spec.train_malicious);
    EXPECT_EQ(count_label(split.validation, m, Label::benign), spec.val_benign);
    EXPECT_EQ(count_label(split.test, m, Label::malicious), spec.test_malicious);
  }
}
