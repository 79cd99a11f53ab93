#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mdbench/corpus.hpp"
#include "mdbench/pipeline.hpp"
#include "mdbench/robustness.hpp"
#include "mdbench/synth.hpp"

namespace mdbench {

struct CorpusSource {
  std::optional<std::string> path;          // features.jsonl
  std::optional<std::string> catalog_path;  // sensitive_apis.txt
  std::optional<std::string> reports_path;  // app_id,positives relabeling CSV
  std::optional<SynthSpec> synth;
};

enum class ScenarioType { ratio, downsample, ablation, evolution, obfuscation, attack };

std::string_view to_string(ScenarioType type);
ScenarioType parse_scenario_type(std::string_view text);

struct ScenarioConfig {
  std::string name;
  ScenarioType type = ScenarioType::ratio;
  std::uint64_t seed = 0;
  std::vector<Approach> approaches;  // empty = every configured detector

  int preset = 1;
  double scale = 1.0;
  std::optional<ScenarioSpec> counts;  // explicit counts instead of a preset

  std::vector<double> fractions{1.0, 0.5, 0.1};
  std::vector<std::set<FeatureKind>> ablations;
  EvolutionPlan evolution;
  std::vector<ObfuscationKind> obfuscations;
  double intensity = 1.0;
  std::vector<AttackKind> attacks;
  int budget = 0;
  double ri_fraction = 0.05;
};

struct DetectorConfig {
  Approach approach = Approach::drebin;
  nlohmann::json overrides = nlohmann::json::object();
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  int jobs = 0;  // 0 = hardware concurrency
  bool fail_fast = false;
  bool plots = false;
  std::string out_dir;
  CorpusSource corpus;
  PipelineOptions pipeline;
  std::vector<DetectorConfig> detectors;
  std::vector<ScenarioConfig> scenarios;
};

// Strict TOML schema: unknown keys, unknown approach tags and unsatisfiable
// scenario settings raise ConfigError. Relative paths resolve against
// `base_dir`. A seed override replaces the top-level seed before scenario
// and synth seeds are derived from it.
RunConfig parse_run_config(std::string_view text, const std::string& base_dir = ".",
                           std::optional<std::uint64_t> seed_override = {});
RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed_override = {});

// Synth-only documents: the [synth] table of a `synth` command config.
SynthSpec parse_synth_config(std::string_view text);
SynthSpec load_synth_config(const std::string& path);

}  // namespace mdbench
