#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mdbench/config.hpp"
#include "mdbench/profiler.hpp"
#include "mdbench/record.hpp"

namespace mdbench {

struct Corpus {
  std::vector<FeatureRecord> records;
  SensitiveApiCatalog catalog;
  std::string description;
};

Corpus load_corpus(const CorpusSource& source);

struct MetricRow {
  std::string approach;
  std::string scenario;
  std::string metric;
  double value = 0.0;
  std::string flags;
};

struct AttackRow {
  std::string approach;
  std::string attack;
  double asr = 0.0;
  double apr = 0.0;
  int budget = 0;
  std::uint64_t seed = 0;
  std::string scenario;
  std::int64_t n_total = 0;
  std::int64_t n_success = 0;
  std::int64_t removed_features = 0;
  std::string flags;
};

struct EvolutionRow {
  std::string approach;
  std::string scenario;
  std::string metric;
  int period = 0;
  int month_offset = 0;
  double value = 0.0;
  bool missing = false;
};

struct AutRow {
  std::string approach;
  std::string scenario;
  std::string metric;
  int horizon_months = 0;
  double value = 0.0;
  std::string flags;
};

enum class CellStatus { ok, failed, skipped };
std::string_view to_string(CellStatus status);

struct CellResult {
  std::string approach;
  std::string scenario;
  std::string type;
  std::uint64_t seed = 0;
  CellStatus status = CellStatus::ok;
  std::string message;
  std::vector<MetricRow> metrics;
  std::vector<AttackRow> attacks;
  std::vector<EvolutionRow> evolution;
  std::vector<AutRow> aut;
  std::vector<TimingRecord> timings;
};

struct RunReport {
  std::vector<CellResult> cells;  // scenario order, then detector order
  double timer_overhead = 0.0;

  bool any_failed() const;
};

struct RunOptions {
  std::optional<std::set<ScenarioType>> only;  // restrict to these scenario types
  std::optional<int> jobs;
  std::optional<bool> fail_fast;
};

// Runs every (scenario, detector) cell. Cells are independent and run on a
// worker pool; results are ordered deterministically. Failures are recorded
// per cell; with fail_fast the remaining cells are skipped.
RunReport execute(const RunConfig& config, const Corpus& corpus, const RunOptions& options = {});

// Writes metrics.csv, attacks.csv, evolution.csv, aut.csv, evolution.md,
// timings.csv, summary.md, optional SVG plots, and manifest.json listing
// every file and every cell. Returns the written file names.
std::vector<std::string> write_report(const RunReport& report, const RunConfig& config, const Corpus& corpus,
                                      const std::string& out_dir);

}  // namespace mdbench
