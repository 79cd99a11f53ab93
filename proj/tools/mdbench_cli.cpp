#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mdbench/config.hpp"
#include "mdbench/error.hpp"
#include "mdbench/feature_store.hpp"
#include "mdbench/runner.hpp"
#include "mdbench/synth.hpp"

namespace fs = std::filesystem;
using namespace mdbench;

namespace {

constexpr int kOk = 0;
constexpr int kRunFailure = 1;
constexpr int kConfigError = 2;

struct RunFlags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  bool fail_fast = false;
};

int cmd_synth(const RunFlags& f) {
  auto spec = load_synth_config(f.config);
  if (f.seed) spec.seed = *f.seed;
  const fs::path dir = f.out.empty() ? fs::path("corpus") : fs::path(f.out);
  fs::create_directories(dir);
  const auto corpus = generate(spec);
  write_records(corpus.records, (dir / "features.jsonl").string());
  corpus.catalog.save((dir / "sensitive_apis.txt").string());
  {
    std::ofstream out(dir / "signal.txt");
    out << format_signal(corpus.schedule);
  }
  std::size_t mal = 0;
  for (const auto& r : corpus.records) mal += r.label == Label::malicious;
  std::cout << "wrote " << corpus.records.size() << " records (" << mal << " malicious) to "
            << (dir / "features.jsonl").string() << "\n";
  return kOk;
}

int cmd_validate(const std::string& path, std::string catalog_path) {
  if (catalog_path.empty()) catalog_path = (fs::path(path).parent_path() / "sensitive_apis.txt").string();
  const auto records = read_records(path);
  const auto catalog = SensitiveApiCatalog::load(catalog_path);
  const auto result = validate_corpus(records, catalog);
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& r : records) ++counts[static_cast<int>(r.label)];
  std::cout << records.size() << " records: " << counts[0] << " benign, " << counts[1] << " malicious, "
            << counts[2] << " grayware, " << counts[3] << " unknown\n";
  if (result.ok()) {
    std::cout << "valid\n";
    return kOk;
  }
  std::cout << result.violations.size() << " violation(s)\n";
  std::size_t shown = 0;
  for (const auto& v : result.violations) {
    std::cout << "  [" << v.code << "] " << v.message << "\n";
    if (++shown == 50) {
      std::cout << "  ...\n";
      break;
    }
  }
  return kRunFailure;
}

int cmd_run(const RunFlags& f, std::optional<std::set<ScenarioType>> only) {
  const auto config = load_run_config(f.config, f.seed);
  std::string out = f.out.empty() ? config.out_dir : f.out;
  if (out.empty()) out = (fs::path("reports") / config.name).string();
  const auto corpus = load_corpus(config.corpus);
  RunOptions opts;
  opts.only = std::move(only);
  opts.jobs = f.jobs;
  if (f.fail_fast) opts.fail_fast = true;
  const auto report = execute(config, corpus, opts);
  if (report.cells.empty()) throw ConfigError("no scenario of the requested kind in " + f.config);
  const auto files = write_report(report, config, corpus, out);
  std::size_t failed = 0;
  for (const auto& c : report.cells) {
    if (c.status == CellStatus::failed) {
      ++failed;
      std::cerr << "failed: " << c.approach << " / " << c.scenario << ": " << c.message << "\n";
    }
  }
  std::cout << "wrote " << files.size() << " files to " << out << " (" << report.cells.size() << " cells, " << failed
            << " failed)\n";
  return failed ? kRunFailure : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Android malware detection benchmark"};
  app.require_subcommand(1);

  RunFlags flags;
  auto add_run_flags = [&](CLI::App* sub, bool run_like) {
    sub->add_option("--config", flags.config, "TOML config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", flags.out, "output directory");
    sub->add_option("--seed", flags.seed, "override the config seed");
    if (run_like) {
      sub->add_option("--jobs", flags.jobs, "worker threads (default: CPU count)")->check(CLI::PositiveNumber);
      sub->add_flag("--fail-fast", flags.fail_fast, "stop scheduling cells after the first failure");
    }
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_run_flags(synth, false);
  auto* run = app.add_subcommand("run", "run every scenario of a config");
  add_run_flags(run, true);
  auto* attack = app.add_subcommand("attack", "run the attack scenarios of a config");
  add_run_flags(attack, true);
  auto* evolve = app.add_subcommand("evolve", "run the evolution scenarios of a config");
  add_run_flags(evolve, true);

  std::string corpus_path, catalog_path;
  auto* validate = app.add_subcommand("validate", "validate a features.jsonl corpus");
  validate->add_option("corpus", corpus_path, "features.jsonl")->required()->check(CLI::ExistingFile);
  validate->add_option("--catalog", catalog_path, "sensitive API catalog (default: sibling sensitive_apis.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*synth) return cmd_synth(flags);
    if (*validate) return cmd_validate(corpus_path, catalog_path);
    if (*run) return cmd_run(flags, std::nullopt);
    if (*attack) return cmd_run(flags, std::set<ScenarioType>{ScenarioType::attack});
    if (*evolve) return cmd_run(flags, std::set<ScenarioType>{ScenarioType::evolution});
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRunFailure;
  }
  return kOk;
}
