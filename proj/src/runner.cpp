#include "mdbench/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mdbench/corpus.hpp"
#include "mdbench/encoded.hpp"
#include "mdbench/error.hpp"
#include "mdbench/feature_store.hpp"
#include "mdbench/metrics.hpp"
#include "mdbench/pipeline.hpp"
#include "mdbench/rng.hpp"
#include "mdbench/robustness.hpp"
#include "mdbench/synth.hpp"

namespace mdbench {

namespace fs = std::filesystem;

std::string_view to_string(CellStatus status) {
  switch (status) {
    case CellStatus::ok: return "ok";
    case CellStatus::failed: return "failed";
    case CellStatus::skipped: return "skipped";
  }
  return "ok";
}

bool RunReport::any_failed() const {
  return std::any_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.status == CellStatus::failed; });
}

Corpus load_corpus(const CorpusSource& source) {
  Corpus c;
  if (source.synth) {
    auto gen = generate(*source.synth);
    c.records = std::move(gen.records);
    c.catalog = std::move(gen.catalog);
    std::ostringstream d;
    d << "synthetic corpus: " << source.synth->n_apps << " apps, years " << source.synth->year_from << "-"
      << source.synth->year_to << ", malware ratio " << source.synth->malware_ratio << ", drift "
      << source.synth->drift_strength << ", seed " << source.synth->seed;
    c.description = d.str();
  } else {
    if (!source.path || !source.catalog_path) throw ConfigError("corpus needs a path and a catalog");
    c.records = read_records(*source.path);
    c.catalog = SensitiveApiCatalog::load(*source.catalog_path);
    c.description = "corpus " + fs::path(*source.path).filename().string() + " (" +
                    std::to_string(c.records.size()) + " records)";
  }
  if (source.reports_path) {
    const auto reports = read_detection_reports(*source.reports_path);
    apply_reports(c.records, reports);
  }
  return c;
}

namespace {

constexpr MetricKind kTableMetrics[] = {MetricKind::f1, MetricKind::accuracy, MetricKind::tpr, MetricKind::fpr};
constexpr MetricKind kEvolutionMetrics[] = {MetricKind::f1, MetricKind::tpr, MetricKind::fpr};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string fraction_label(double f) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", f);
  return buf;
}

std::string ablation_label(const std::set<FeatureKind>& kinds) {
  if (kinds.empty()) return "full";
  std::string s = "w/o ";
  bool first = true;
  for (auto k : kinds) {
    s += (first ? "" : "+") + std::string(to_string(k));
    first = false;
  }
  return s;
}

std::vector<int> truth(std::span<const FeatureRecord> records) {
  std::vector<int> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(binary_label(r.label));
  return y;
}

void add_metric_rows(CellResult& cell, const std::string& scenario, const ConfusionCounts& c) {
  for (auto k : kTableMetrics) {
    const auto m = metric(k, c);
    cell.metrics.push_back({cell.approach, scenario, to_string(k), m.value, m.undefined ? "undefined" : ""});
  }
}

ConfusionCounts evaluate(const Pipeline& pipe, std::span<const FeatureRecord> test, std::vector<TimingRecord>* t,
                         std::int32_t year = 0) {
  const auto pred = pipe.predict(test, t, year);
  return confusion(truth(test), pred);
}

struct CellContext {
  const RunConfig& config;
  const Corpus& corpus;
  const CorpusIndex& index;
  const ScenarioConfig& scenario;
  const DetectorConfig& detector;
};

PipelineOptions pipeline_options(const CellContext& ctx) {
  auto opts = ctx.config.pipeline;
  opts.model_overrides = ctx.detector.overrides;
  return opts;
}

ScenarioSpec scenario_spec(const ScenarioConfig& sc) {
  if (sc.counts) {
    auto s = *sc.counts;
    s.seed = sc.seed;
    return s;
  }
  return ScenarioSpec::preset(sc.preset, sc.scale, sc.seed);
}

struct Split {
  std::vector<FeatureRecord> train, val, test;
};

Split materialize(const CorpusIndex& index, const DataSplit& s) {
  return {index.gather(s.train), index.gather(s.validation), index.gather(s.test)};
}

std::vector<FeatureRecord> ablate_all(const std::vector<FeatureRecord>& records, const std::set<FeatureKind>& kinds) {
  std::vector<FeatureRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(ablate_features(r, kinds));
  return out;
}

// One repeat of one cell; `seed` drives the model side only, the split comes
// from the scenario seed so every detector sees the same data.
CellResult run_once(const CellContext& ctx, std::uint64_t seed) {
  const auto& sc = ctx.scenario;
  CellResult cell;
  cell.approach = std::string(to_string(ctx.detector.approach));
  cell.scenario = sc.name;
  const auto opts = pipeline_options(ctx);
  auto make = [&] { return Pipeline(ctx.detector.approach, ctx.corpus.catalog, opts); };

  switch (sc.type) {
    case ScenarioType::ratio: {
      const auto split = materialize(ctx.index, sample_scenario(ctx.corpus.records, scenario_spec(sc)));
      auto pipe = make();
      pipe.fit(split.train, split.val, seed, &cell.timings);
      add_metric_rows(cell, sc.name, evaluate(pipe, split.test, &cell.timings));
      break;
    }
    case ScenarioType::downsample: {
      const auto base = sample_scenario(ctx.corpus.records, scenario_spec(sc));
      for (double f : sc.fractions) {
        const auto split = materialize(ctx.index, downsample_training(base, ctx.corpus.records, f, sc.seed));
        auto pipe = make();
        pipe.fit(split.train, split.val, seed, &cell.timings);
        add_metric_rows(cell, sc.name + ":" + fraction_label(f), evaluate(pipe, split.test, &cell.timings));
      }
      break;
    }
    case ScenarioType::ablation: {
      const auto split = materialize(ctx.index, sample_scenario(ctx.corpus.records, scenario_spec(sc)));
      std::vector<std::set<FeatureKind>> variants{{}};
      for (const auto& a : sc.ablations) {
        if (!a.empty()) variants.push_back(a);
      }
      for (const auto& kinds : variants) {
        const auto train = ablate_all(split.train, kinds);
        const auto val = ablate_all(split.val, kinds);
        const auto test = ablate_all(split.test, kinds);
        auto pipe = make();
        pipe.fit(train, val, seed, &cell.timings);
        add_metric_rows(cell, sc.name + ":" + ablation_label(kinds), evaluate(pipe, test, &cell.timings));
      }
      break;
    }
    case ScenarioType::obfuscation: {
      const auto split = materialize(ctx.index, sample_scenario(ctx.corpus.records, scenario_spec(sc)));
      auto pipe = make();
      pipe.fit(split.train, split.val, seed, &cell.timings);
      add_metric_rows(cell, sc.name + ":none", evaluate(pipe, split.test, &cell.timings));
      for (auto kind : sc.obfuscations) {
        std::vector<FeatureRecord> test;
        test.reserve(split.test.size());
        for (const auto& r : split.test) {
          test.push_back(obfuscate(r, kind, mix_seed(sc.seed, static_cast<std::uint64_t>(kind)), sc.intensity));
        }
        add_metric_rows(cell, sc.name + ":" + std::string(to_string(kind)), evaluate(pipe, test, &cell.timings));
      }
      break;
    }
    case ScenarioType::attack: {
      const auto split = materialize(ctx.index, sample_scenario(ctx.corpus.records, scenario_spec(sc)));
      auto pipe = make();
      pipe.fit(split.train, split.val, seed, &cell.timings);
      add_metric_rows(cell, sc.name + ":clean", evaluate(pipe, split.test, &cell.timings));
      const auto test = pipe.encode(split.test);
      std::vector<std::size_t> mal;
      for (std::size_t i = 0; i < test.rows(); ++i) {
        if (test.labels[i] == 1) mal.push_back(i);
      }
      const auto mal_ds = test.subset(mal);
      TargetPredict target = [&](const DenseMatrix& m) {
        EncodedDataset ds;
        ds.kind = EncodingKind::dense_matrix;
        ds.payload = m;
        ds.blocks = test.blocks;
        ds.app_ids.assign(m.rows, "");
        ds.labels.assign(m.rows, 1);
        return pipe.predict_encoded(ds);
      };
      std::unique_ptr<MlpSubstitute> substitute;
      if (std::find(sc.attacks.begin(), sc.attacks.end(), AttackKind::jsma) != sc.attacks.end()) {
        substitute = train_substitute(pipe.encode(split.train), mix_seed(seed, 0x5b5), opts.desk_scale,
                                      opts.train.max_epochs);
      }
      for (auto kind : sc.attacks) {
        AttackSpec spec;
        spec.kind = kind;
        spec.budget = sc.budget;
        spec.fraction = sc.ri_fraction;
        spec.seed = mix_seed(sc.seed, 0xa7 + static_cast<std::uint64_t>(kind));
        const auto out = evaluate_attack(target, substitute.get(), mal_ds.dense(), spec);
        AttackRow row;
        row.approach = cell.approach;
        row.attack = std::string(to_string(kind));
        row.asr = out.asr();
        const auto apr = out.apr();
        row.apr = apr.value;
        row.budget = kind == AttackKind::jsma ? out.budget : 0;
        row.seed = spec.seed;
        row.scenario = sc.name;
        row.n_total = out.n_total;
        row.n_success = out.n_success;
        row.removed_features = out.removed_features;
        std::string flags;
        if (apr.undefined) flags = "apr_undefined";
        if (out.removed_features != 0) flags += flags.empty() ? "constraint_violation" : ";constraint_violation";
        row.flags = flags;
        cell.attacks.push_back(std::move(row));
        if (out.removed_features != 0) throw Error("attack removed features; addition-only constraint violated");
      }
      break;
    }
    case ScenarioType::evolution: {
      const auto ev = rolling_splits(ctx.corpus.records, sc.evolution, sc.seed);
      const auto base = materialize(ctx.index, ev.base);
      auto pipe = make();
      pipe.fit(base.train, base.val, seed, &cell.timings, sc.evolution.base_year);
      std::vector<ConfusionCounts> periods;
      periods.push_back(evaluate(pipe, base.test, &cell.timings, sc.evolution.base_year));
      for (std::size_t j = 0; j < ev.buckets.size(); ++j) {
        const auto recs = ctx.index.gather(ev.buckets[j]);
        if (recs.empty()) {
          periods.emplace_back();
        } else {
          periods.push_back(evaluate(pipe, recs, &cell.timings, ev.bucket_start_month[j] / 12));
        }
      }
      for (auto kind : kEvolutionMetrics) {
        const auto series = evolution_series(periods, kind);
        for (std::size_t p = 0; p < series.size(); ++p) {
          cell.evolution.push_back({cell.approach, sc.name, to_string(kind), static_cast<int>(p),
                                    static_cast<int>(p) * sc.evolution.bucket_months, series.values[p],
                                    static_cast<bool>(series.missing[p])});
        }
        cell.aut.push_back(
            {cell.approach, sc.name, to_string(kind), 0, series.values[0], series.missing[0] ? "missing" : "baseline"});
        for (std::size_t j = 1; j < series.size(); ++j) {
          const auto a = series.aut_over(j + 1);
          cell.aut.push_back({cell.approach, sc.name, to_string(kind), static_cast<int>(j) * sc.evolution.bucket_months,
                              a.value, a.undefined ? "undefined" : ""});
        }
      }
      break;
    }
  }
  return cell;
}

void merge_flags(std::string& into, const std::string& flags) {
  if (flags.empty() || into.find(flags) != std::string::npos) return;
  into += into.empty() ? flags : ";" + flags;
}

// Averages aligned rows of several repeats.
CellResult average(std::vector<CellResult> runs) {
  CellResult out = runs.front();
  const double n = static_cast<double>(runs.size());
  if (runs.size() == 1) return out;
  const std::string tag = "mean_of_" + std::to_string(runs.size());
  for (std::size_t i = 0; i < out.metrics.size(); ++i) {
    double s = 0.0;
    for (const auto& r : runs) {
      s += r.metrics.at(i).value;
      merge_flags(out.metrics[i].flags, r.metrics.at(i).flags);
    }
    out.metrics[i].value = s / n;
    merge_flags(out.metrics[i].flags, tag);
  }
  for (std::size_t i = 0; i < out.attacks.size(); ++i) {
    double asr = 0.0, apr = 0.0;
    for (const auto& r : runs) {
      asr += r.attacks.at(i).asr;
      apr += r.attacks.at(i).apr;
      merge_flags(out.attacks[i].flags, r.attacks.at(i).flags);
    }
    out.attacks[i].asr = asr / n;
    out.attacks[i].apr = apr / n;
    merge_flags(out.attacks[i].flags, tag);
  }
  for (std::size_t i = 0; i < out.evolution.size(); ++i) {
    double s = 0.0;
    int present = 0;
    for (const auto& r : runs) {
      if (!r.evolution.at(i).missing) {
        s += r.evolution[i].value;
        ++present;
      }
    }
    out.evolution[i].missing = present == 0;
    out.evolution[i].value = present ? s / present : 0.0;
  }
  for (std::size_t i = 0; i < out.aut.size(); ++i) {
    double s = 0.0;
    for (const auto& r : runs) {
      s += r.aut.at(i).value;
      merge_flags(out.aut[i].flags, r.aut.at(i).flags);
    }
    out.aut[i].value = s / n;
    merge_flags(out.aut[i].flags, tag);
  }
  out.timings.clear();
  for (auto& r : runs) out.timings.insert(out.timings.end(), r.timings.begin(), r.timings.end());
  return out;
}

CellResult run_cell(const CellContext& ctx) {
  const auto approach = ctx.detector.approach;
  const std::string tag(to_string(approach));
  CellResult base;
  base.approach = tag;
  base.scenario = ctx.scenario.name;
  base.type = std::string(to_string(ctx.scenario.type));
  base.seed = ctx.scenario.seed;
  if (ctx.scenario.type == ScenarioType::attack && !attackable(approach)) {
    base.status = CellStatus::skipped;
    base.message = "not attackable: " + tag + " does not encode apps as binary feature vectors";
    return base;
  }
  const int repeats = ctx.config.pipeline.repeats > 0 ? ctx.config.pipeline.repeats : default_repeats(approach);
  std::vector<CellResult> runs;
  for (int r = 0; r < repeats; ++r) {
    runs.push_back(run_once(ctx, mix_seed(mix_seed(ctx.scenario.seed, hash_string(tag)), static_cast<std::uint64_t>(r))));
  }
  auto out = average(std::move(runs));
  out.type = base.type;
  out.seed = base.seed;
  return out;
}

}  // namespace

RunReport execute(const RunConfig& config, const Corpus& corpus, const RunOptions& options) {
  RunReport report;
  report.timer_overhead = timer_overhead();
  const CorpusIndex index(corpus.records);

  std::vector<CellContext> contexts;
  for (const auto& sc : config.scenarios) {
    if (options.only && !options.only->count(sc.type)) continue;
    for (const auto& det : config.detectors) {
      if (!sc.approaches.empty() &&
          std::find(sc.approaches.begin(), sc.approaches.end(), det.approach) == sc.approaches.end()) {
        continue;
      }
      contexts.push_back({config, corpus, index, sc, det});
    }
  }
  report.cells.resize(contexts.size());
  const bool fail_fast = options.fail_fast.value_or(config.fail_fast);
  int jobs = options.jobs.value_or(config.jobs);
  if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(1, contexts.size())));

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= contexts.size()) return;
      const auto& ctx = contexts[i];
      auto& slot = report.cells[i];
      if (stop.load()) {
        slot.approach = std::string(to_string(ctx.detector.approach));
        slot.scenario = ctx.scenario.name;
        slot.type = std::string(to_string(ctx.scenario.type));
        slot.seed = ctx.scenario.seed;
        slot.status = CellStatus::skipped;
        slot.message = "skipped after an earlier failure (--fail-fast)";
        continue;
      }
      try {
        slot = run_cell(ctx);
      } catch (const std::exception& e) {
        slot = CellResult{};
        slot.approach = std::string(to_string(ctx.detector.approach));
        slot.scenario = ctx.scenario.name;
        slot.type = std::string(to_string(ctx.scenario.type));
        slot.seed = ctx.scenario.seed;
        slot.status = CellStatus::failed;
        slot.message = e.what();
        if (const auto* te = dynamic_cast<const TimedError*>(&e)) slot.timings.push_back(te->record());
        if (fail_fast) stop.store(true);
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report files

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string approach_order_key(const std::string& tag) {
  const auto a = parse_approach(tag);
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", static_cast<int>(a));
  return buf;
}

void write_svg_lines(const fs::path& path, const std::string& title, const std::string& x_label,
                     const std::map<std::string, std::vector<std::pair<double, double>>>& lines) {
  const double W = 640, H = 400, L = 60, R = 150, T = 40, B = 50;
  double x0 = 1e300, x1 = -1e300;
  for (const auto& [name, pts] : lines) {
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
    }
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - std::clamp(y, 0.0, 1.0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
                                 "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"};
  auto out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = i / 4.0;
    out << "<text x=\"" << L - 8 << "\" y=\"" << py(y) + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
        << fmt_short(y) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
      << x_label << "</text>\n";
  std::set<double> ticks;
  for (const auto& [name, pts] : lines) {
    for (const auto& p : pts) ticks.insert(p.first);
  }
  for (double x : ticks) {
    out << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
        << fraction_label(x) << "</text>\n";
  }
  std::size_t c = 0;
  for (const auto& [name, pts] : lines) {
    const char* color = colors[c % std::size(colors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) out << px(x) << "," << py(y) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 14 * static_cast<double>(c) + 10 << "\" fill=\"" << color
        << "\" font-size=\"11\">" << name << "</text>\n";
    ++c;
  }
  out << "</svg>\n";
}

}  // namespace

std::vector<std::string> write_report(const RunReport& report, const RunConfig& config, const Corpus& corpus,
                                      const std::string& out_dir) {
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error("cannot create output directory " + out_dir);
  std::vector<std::string> files;

  {
    auto out = open_out(dir / "metrics.csv");
    out << "approach,scenario,metric,value,flags\n";
    for (const auto& c : report.cells) {
      for (const auto& m : c.metrics) {
        out << m.approach << ',' << csv_field(m.scenario) << ',' << m.metric << ',' << fmt(m.value) << ','
            << csv_field(m.flags) << '\n';
      }
    }
    files.push_back("metrics.csv");
  }
  {
    auto out = open_out(dir / "attacks.csv");
    out << "approach,attack,asr,apr,budget,seed,scenario,n_total,n_success,removed_features,flags\n";
    for (const auto& c : report.cells) {
      for (const auto& a : c.attacks) {
        out << a.approach << ',' << a.attack << ',' << fmt(a.asr) << ',' << fmt(a.apr) << ',' << a.budget << ','
            << a.seed << ',' << csv_field(a.scenario) << ',' << a.n_total << ',' << a.n_success << ','
            << a.removed_features << ',' << csv_field(a.flags) << '\n';
      }
    }
    files.push_back("attacks.csv");
  }
  {
    auto out = open_out(dir / "evolution.csv");
    out << "approach,scenario,metric,period,month_offset,value,missing\n";
    for (const auto& c : report.cells) {
      for (const auto& e : c.evolution) {
        out << e.approach << ',' << csv_field(e.scenario) << ',' << e.metric << ',' << e.period << ','
            << e.month_offset << ',' << fmt(e.value) << ',' << (e.missing ? 1 : 0) << '\n';
      }
    }
    files.push_back("evolution.csv");
  }
  {
    auto out = open_out(dir / "aut.csv");
    out << "approach,scenario,metric,horizon_months,value,flags\n";
    for (const auto& c : report.cells) {
      for (const auto& a : c.aut) {
        out << a.approach << ',' << csv_field(a.scenario) << ',' << a.metric << ',' << a.horizon_months << ','
            << fmt(a.value) << ',' << csv_field(a.flags) << '\n';
      }
    }
    files.push_back("aut.csv");
  }
  {
    auto out = open_out(dir / "cells.csv");
    out << "approach,scenario,type,seed,status,message\n";
    for (const auto& c : report.cells) {
      out << c.approach << ',' << csv_field(c.scenario) << ',' << c.type << ',' << c.seed << ','
          << to_string(c.status) << ',' << csv_field(c.message) << '\n';
    }
    files.push_back("cells.csv");
  }
  {
    std::vector<TimingRecord> all;
    for (const auto& c : report.cells) all.insert(all.end(), c.timings.begin(), c.timings.end());
    write_timings_csv(efficiency_report(all), report.timer_overhead, (dir / "timings.csv").string());
    files.push_back("timings.csv");
  }

  // AUT tables: one per evolution scenario and metric, columns N = 0..horizon.
  bool has_evolution = false;
  {
    std::ostringstream md;
    md << "# Evolution report\n";
    for (const auto& sc : config.scenarios) {
      if (sc.type != ScenarioType::evolution) continue;
      for (auto kind : kEvolutionMetrics) {
        const auto mname = to_string(kind);
        std::map<std::string, std::vector<const AutRow*>> rows;
        for (const auto& c : report.cells) {
          if (c.scenario != sc.name) continue;
          for (const auto& a : c.aut) {
            if (a.metric == mname) rows[approach_order_key(a.approach) + a.approach].push_back(&a);
          }
        }
        if (rows.empty()) continue;
        has_evolution = true;
        md << "\n## " << sc.name << ": AUT(" << mname << ", N)\n\n| Approach |";
        for (int h = 0; h <= sc.evolution.horizon_months; h += sc.evolution.bucket_months) md << " N=" << h << " |";
        md << "\n|---|";
        for (int h = 0; h <= sc.evolution.horizon_months; h += sc.evolution.bucket_months) md << "---|";
        md << "\n";
        for (const auto& [key, list] : rows) {
          md << "| " << list.front()->approach << " |";
          const double base = list.front()->value;
          for (const auto* a : list) {
            md << ' ' << fmt_short(a->value);
            if (a->horizon_months > 0 && base > 0.0) {
              char buf[32];
              std::snprintf(buf, sizeof buf, " (%+.1f%%)", 100.0 * (a->value - base) / base);
              md << buf;
            }
            md << " |";
          }
          md << "\n";
        }
      }
    }
    if (has_evolution) {
      auto out = open_out(dir / "evolution.md");
      out << md.str();
      files.push_back("evolution.md");
    }
  }

  {
    std::ostringstream md;
    md << "# Run report: " << config.name << "\n\n";
    md << "- Corpus: " << corpus.description << "\n";
    md << "- Run seed: " << config.seed << "\n";
    std::size_t ok = 0, failed = 0, skipped = 0;
    for (const auto& c : report.cells) {
      ok += c.status == CellStatus::ok;
      failed += c.status == CellStatus::failed;
      skipped += c.status == CellStatus::skipped;
    }
    md << "- Cells: " << ok << " ok, " << failed << " failed, " << skipped << " skipped\n";
    if (std::any_of(config.detectors.begin(), config.detectors.end(),
                    [](const DetectorConfig& d) { return d.approach == Approach::ramda; })) {
      md << "- RAMDA joint loss: lambda2*CE + lambda1*max(0, L_rec - target) + lambda3*L_rec\n";
    }
    for (const auto& sc : config.scenarios) {
      if (sc.type == ScenarioType::evolution) continue;
      std::vector<std::string> variants;
      std::map<std::string, std::map<std::string, std::string>> table;
      for (const auto& c : report.cells) {
        if (c.scenario != sc.name) continue;
        for (const auto& m : c.metrics) {
          if (m.metric != "f1") continue;
          if (std::find(variants.begin(), variants.end(), m.scenario) == variants.end()) variants.push_back(m.scenario);
          table[approach_order_key(c.approach) + c.approach][m.scenario] =
              fmt_short(m.value) + (m.flags.find("undefined") != std::string::npos ? "*" : "");
        }
      }
      if (table.empty()) continue;
      md << "\n## " << sc.name << " (" << to_string(sc.type) << "): F1\n\n| Approach |";
      for (const auto& v : variants) md << ' ' << v << " |";
      md << "\n|---|";
      for (std::size_t i = 0; i < variants.size(); ++i) md << "---|";
      md << "\n";
      for (const auto& [key, cells] : table) {
        md << "| " << key.substr(2) << " |";
        for (const auto& v : variants) {
          auto it = cells.find(v);
          md << ' ' << (it == cells.end() ? "-" : it->second) << " |";
        }
        md << "\n";
      }
    }
    bool header = false;
    for (const auto& c : report.cells) {
      for (const auto& a : c.attacks) {
        if (!header) {
          md << "\n## Attacks\n\n| Approach | Scenario | Attack | ASR | APR | Budget |\n|---|---|---|---|---|---|\n";
          header = true;
        }
        md << "| " << a.approach << " | " << a.scenario << " | " << a.attack << " | " << fmt_short(a.asr) << " | "
           << fmt_short(a.apr) << (a.flags.find("apr_undefined") != std::string::npos ? "*" : "") << " | "
           << a.budget << " |\n";
      }
    }
    if (has_evolution) md << "\nSee evolution.md for AUT tables.\n";
    header = false;
    for (const auto& c : report.cells) {
      if (c.status == CellStatus::ok) continue;
      if (!header) {
        md << "\n## Failed or skipped cells\n\n";
        header = true;
      }
      md << "- " << c.approach << " / " << c.scenario << " (" << to_string(c.status) << "): " << c.message << "\n";
    }
    md << "\n`*` marks a 0/0 metric reported as 0.\n";
    auto out = open_out(dir / "summary.md");
    out << md.str();
    files.push_back("summary.md");
  }

  if (config.plots) {
    std::map<std::string, std::vector<std::pair<double, double>>> size_lines;
    std::map<std::string, std::vector<std::pair<double, double>>> aut_lines;
    for (const auto& sc : config.scenarios) {
      for (const auto& c : report.cells) {
        if (c.scenario != sc.name) continue;
        if (sc.type == ScenarioType::downsample) {
          for (const auto& m : c.metrics) {
            if (m.metric != "f1") continue;
            const double f = std::stod(m.scenario.substr(m.scenario.rfind(':') + 1));
            size_lines[sc.name + "/" + c.approach].emplace_back(f, m.value);
          }
        }
        if (sc.type == ScenarioType::evolution) {
          for (const auto& a : c.aut) {
            if (a.metric == "f1") aut_lines[sc.name + "/" + c.approach].emplace_back(a.horizon_months, a.value);
          }
        }
      }
    }
    for (auto* lines : {&size_lines, &aut_lines}) {
      for (auto& [k, pts] : *lines) std::sort(pts.begin(), pts.end());
    }
    if (!size_lines.empty()) {
      write_svg_lines(dir / "f1_vs_size.svg", "F1 vs training-set fraction", "training fraction", size_lines);
      files.push_back("f1_vs_size.svg");
    }
    if (!aut_lines.empty()) {
      write_svg_lines(dir / "aut_vs_horizon.svg", "AUT(F1, N) vs horizon", "N (months)", aut_lines);
      files.push_back("aut_vs_horizon.svg");
    }
  }

  {
    nlohmann::ordered_json m;
    m["name"] = config.name;
    m["seed"] = config.seed;
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016" PRIx64, corpus_hash(corpus.records));
    m["corpus"] = {{"description", corpus.description}, {"records", corpus.records.size()}, {"hash", hash}};
    auto listed = files;
    listed.push_back("manifest.json");
    std::sort(listed.begin(), listed.end());
    m["files"] = listed;
    m["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : report.cells) {
      std::vector<std::string> outputs;
      if (!c.metrics.empty()) outputs.push_back("metrics.csv");
      if (!c.attacks.empty()) outputs.push_back("attacks.csv");
      if (!c.evolution.empty()) outputs.push_back("evolution.csv");
      if (!c.aut.empty()) outputs.push_back("aut.csv");
      std::vector<std::string> variants;
      for (const auto& r : c.metrics) {
        if (std::find(variants.begin(), variants.end(), r.scenario) == variants.end()) variants.push_back(r.scenario);
      }
      m["cells"].push_back({{"approach", c.approach},
                            {"scenario", c.scenario},
                            {"type", c.type},
                            {"seed", c.seed},
                            {"status", std::string(to_string(c.status))},
                            {"message", c.message},
                            {"variants", variants},
                            {"outputs", outputs}});
    }
    auto out = open_out(dir / "manifest.json");
    out << m.dump(2) << "\n";
    files.push_back("manifest.json");
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace mdbench
