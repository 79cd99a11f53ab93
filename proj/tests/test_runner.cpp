#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mdbench/config.hpp"
#include "mdbench/error.hpp"
#include "mdbench/runner.hpp"
#include "temp_dir.hpp"

using namespace mdbench;
namespace fs = std::filesystem;

namespace {

const char* kBase = R"(
name = "unit"
seed = 5
jobs = 1

[corpus.synth]
n_apps = 300
malware_ratio = 0.3
year_from = 2011
year_to = 2012

[pipeline]
max_epochs = 2
patience = 1

[detectors]
approaches = ["drebin", "malscan"]

[[scenario]]
name = "ratio_small"
type = "ratio"
[scenario.counts]
train_benign = 60
train_malicious = 30
val_benign = 10
val_malicious = 5
test_benign = 20
test_malicious = 10
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParsesBaseConfig) {
  const auto cfg = parse_run_config(kBase);
  EXPECT_EQ(cfg.name, "unit");
  EXPECT_EQ(cfg.detectors.size(), 2u);
  ASSERT_EQ(cfg.scenarios.size(), 1u);
  ASSERT_TRUE(cfg.scenarios[0].counts.has_value());
  EXPECT_EQ(cfg.scenarios[0].counts->train_malicious, 30u);
  ASSERT_TRUE(cfg.corpus.synth.has_value());
  EXPECT_EQ(cfg.corpus.synth->n_apps, 300u);
}

TEST(Config, UnknownKeyIsRejected) {
  EXPECT_THROW(parse_run_config(std::string(kBase) + "\nbogus_key = 1\n"), ConfigError);
  std::string bad = kBase;
  bad.replace(bad.find("max_epochs"), 10, "max_epocs");
  EXPECT_THROW(parse_run_config(bad), ConfigError);
}

TEST(Config, UnknownApproachListsValidTags) {
  std::string bad = kBase;
  bad.replace(bad.find("\"malscan\""), 9, "\"drebin2\"");
  try {
    parse_run_config(bad);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("drebin2"), std::string::npos);
    EXPECT_NE(what.find("mamadroid"), std::string::npos);
  }
}

TEST(Config, MalformedTomlIsConfigError) { EXPECT_THROW(parse_run_config("name = \n[["), ConfigError); }

TEST(Config, SeedOverrideChangesDerivedSeeds) {
  const auto a = parse_run_config(kBase);
  const auto b = parse_run_config(kBase, ".", 99);
  EXPECT_EQ(b.seed, 99u);
  EXPECT_NE(a.scenarios[0].seed, b.scenarios[0].seed);
  EXPECT_NE(a.corpus.synth->seed, b.corpus.synth->seed);
}

TEST(Config, SynthOnlyDocument) {
  const auto spec = parse_synth_config("[synth]\nn_apps = 50\nmalware_ratio = 0.2\nseed = 3\n");
  EXPECT_EQ(spec.n_apps, 50u);
  EXPECT_EQ(spec.seed, 3u);
  EXPECT_THROW(parse_synth_config("[synth]\nn_appz = 50\n"), ConfigError);
}

TEST(Runner, ProducesOneCellPerDetectorAndIsDeterministic) {
  const auto cfg = parse_run_config(kBase);
  const auto corpus = load_corpus(cfg.corpus);
  const auto a = execute(cfg, corpus);
  ASSERT_EQ(a.cells.size(), 2u);
  EXPECT_FALSE(a.any_failed());
  EXPECT_EQ(a.cells[0].approach, "drebin");
  EXPECT_EQ(a.cells[1].approach, "malscan");
  testsupport::TempDir d1, d2;
  const auto files = write_report(a, cfg, corpus, d1.path().string());
  RunOptions two;
  two.jobs = 2;
  write_report(execute(cfg, corpus, two), cfg, corpus, d2.path().string());
  for (const auto& f : files) {
    if (fs::path(f).extension() == ".csv" && fs::path(f).filename() != "timings.csv") {
      EXPECT_EQ(slurp(d1.path() / f), slurp(d2.path() / f)) << f;
    }
  }
}

TEST(Runner, ManifestListsFilesAndCells) {
  const auto cfg = parse_run_config(kBase);
  const auto corpus = load_corpus(cfg.corpus);
  testsupport::TempDir dir;
  const auto files = write_report(execute(cfg, corpus), cfg, corpus, dir.path().string());
  ASSERT_TRUE(fs::exists(dir.path() / "manifest.json"));
  const auto manifest = nlohmann::json::parse(slurp(dir.path() / "manifest.json"));
  const auto dump = manifest.dump();
  for (const auto& f : files) {
    if (f != "manifest.json") EXPECT_NE(dump.find(f), std::string::npos) << f;
  }
  EXPECT_NE(dump.find("malscan"), std::string::npos);
  for (const char* name : {"metrics.csv", "attacks.csv", "evolution.csv", "aut.csv", "timings.csv", "summary.md"}) {
    EXPECT_TRUE(fs::exists(dir.path() / name)) << name;
  }
}

TEST(Runner, CellsAreIsolatedFromEachOther) {
  // Removing one detector does not change the other detector's results.
  const auto both = parse_run_config(kBase);
  std::string single = kBase;
  single.replace(single.find(", \"malscan\""), 11, "");
  const auto one = parse_run_config(single);
  const auto corpus = load_corpus(both.corpus);
  const auto a = execute(both, corpus);
  const auto b = execute(one, corpus);
  ASSERT_EQ(b.cells.size(), 1u);
  ASSERT_EQ(a.cells[0].metrics.size(), b.cells[0].metrics.size());
  for (std::size_t i = 0; i < a.cells[0].metrics.size(); ++i) {
    EXPECT_EQ(a.cells[0].metrics[i].value, b.cells[0].metrics[i].value);
  }
}

TEST(Runner, UnsatisfiableCountsFailTheCellOnly) {
  std::string cfg_text = kBase;
  cfg_text.replace(cfg_text.find("train_malicious = 30"), 20, "train_malicious = 5000");
  auto cfg = parse_run_config(cfg_text);
  const auto corpus = load_corpus(cfg.corpus);
  const auto report = execute(cfg, corpus);
  EXPECT_TRUE(report.any_failed());
  for (const auto& c : report.cells) EXPECT_EQ(c.status, CellStatus::failed);
  RunOptions ff;
  ff.fail_fast = true;
  ff.jobs = 1;
  const auto fast = execute(cfg, corpus, ff);
  EXPECT_EQ(fast.cells[0].status, CellStatus::failed);
  EXPECT_EQ(fast.cells[1].status, CellStatus::skipped);
}
