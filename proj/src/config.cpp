#include "mdbench/config.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <toml.hpp>

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

namespace {

namespace fs = std::filesystem;

// Table view that remembers which keys were read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const toml::table& table, std::string where) : table_(table), where_(std::move(where)) {}

  bool has(std::string_view key) const { return table_.contains(key); }

  template <typename T>
  std::optional<T> get(std::string_view key) {
    const toml::node* node = table_.get(key);
    if (!node) return std::nullopt;
    used_.insert(std::string(key));
    if constexpr (std::is_same_v<T, double>) {
      if (auto v = node->value<double>()) return *v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (node->is_boolean()) return node->as_boolean()->get();
    } else if constexpr (std::is_integral_v<T>) {
      if (node->is_integer()) {
        const auto v = node->as_integer()->get();
        if (std::is_unsigned_v<T> && v < 0) fail(key, "must be non-negative");
        return static_cast<T>(v);
      }
    } else {
      if (node->is_string()) return T(node->as_string()->get());
    }
    fail(key, "has the wrong type");
  }

  template <typename T>
  void read(std::string_view key, T& out) {
    if (auto v = get<T>(key)) out = *v;
  }

  template <typename T>
  std::optional<std::vector<T>> list(std::string_view key) {
    const toml::node* node = table_.get(key);
    if (!node) return std::nullopt;
    used_.insert(std::string(key));
    const auto* arr = node->as_array();
    if (!arr) fail(key, "must be an array");
    std::vector<T> out;
    for (const auto& item : *arr) {
      if constexpr (std::is_same_v<T, double>) {
        auto v = item.value<double>();
        if (!v) fail(key, "must hold numbers");
        out.push_back(*v);
      } else if constexpr (std::is_integral_v<T>) {
        if (!item.is_integer()) fail(key, "must hold integers");
        out.push_back(static_cast<T>(item.as_integer()->get()));
      } else {
        if (!item.is_string()) fail(key, "must hold strings");
        out.push_back(item.as_string()->get());
      }
    }
    return out;
  }

  const toml::table* table(std::string_view key) {
    const toml::node* node = table_.get(key);
    if (!node) return nullptr;
    used_.insert(std::string(key));
    if (!node->is_table()) fail(key, "must be a table");
    return node->as_table();
  }

  const toml::node* raw(std::string_view key) {
    const toml::node* node = table_.get(key);
    if (node) used_.insert(std::string(key));
    return node;
  }

  void finish() const {
    for (const auto& [key, node] : table_) {
      if (!used_.count(std::string(key.str()))) {
        throw ConfigError("unknown key '" + std::string(key.str()) + "' in " + where_);
      }
    }
  }

  [[noreturn]] void fail(std::string_view key, const std::string& why) const {
    throw ConfigError(where_ + "." + std::string(key) + " " + why);
  }

 private:
  const toml::table& table_;
  std::string where_;
  std::set<std::string> used_;
};

nlohmann::json to_json(const toml::node& node) {
  if (node.is_table()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : *node.as_table()) j[std::string(k.str())] = to_json(v);
    return j;
  }
  if (node.is_array()) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : *node.as_array()) j.push_back(to_json(v));
    return j;
  }
  if (node.is_integer()) return node.as_integer()->get();
  if (node.is_floating_point()) return node.as_floating_point()->get();
  if (node.is_boolean()) return node.as_boolean()->get();
  if (node.is_string()) return node.as_string()->get();
  throw ConfigError("unsupported TOML value in overrides");
}

toml::table parse_toml(std::string_view text) {
  try {
    return toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "config parse error at line " << e.source().begin.line << ": " << e.description();
    throw ConfigError(msg.str());
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base) / path).lexically_normal().string();
}

SynthSpec read_synth(Section& s) {
  SynthSpec spec;
  s.read("n_apps", spec.n_apps);
  s.read("malware_ratio", spec.malware_ratio);
  s.read("grayware_ratio", spec.grayware_ratio);
  s.read("year_from", spec.year_from);
  s.read("year_to", spec.year_to);
  s.read("drift_strength", spec.drift_strength);
  s.read("n_permissions", spec.n_permissions);
  s.read("n_apis", spec.n_apis);
  s.read("n_sensitive", spec.n_sensitive);
  auto pair = [&](std::string_view key, std::pair<std::size_t, std::size_t>& out) {
    if (auto v = s.list<std::int64_t>(key)) {
      if (v->size() != 2 || (*v)[0] < 1 || (*v)[1] < (*v)[0]) s.fail(key, "must be [lo, hi] with 1 <= lo <= hi");
      out = {static_cast<std::size_t>((*v)[0]), static_cast<std::size_t>((*v)[1])};
    }
  };
  pair("graph_size", spec.graph_size_range);
  pair("opcode_len", spec.opcode_len_range);
  s.read("opcode_vocab", spec.opcode_vocab);
  s.read("signature_permissions", spec.signature_permissions);
  s.read("signature_apis", spec.signature_apis);
  s.read("signature_ngrams", spec.signature_ngrams);
  s.read("signal_min", spec.signal_min);
  s.read("signal_max", spec.signal_max);
  s.read("lookalike_ratio", spec.lookalike_ratio);
  s.read("lookalike_strength", spec.lookalike_strength);
  s.read("benign_markers", spec.benign_markers);
  s.read("benign_marker_rate", spec.benign_marker_rate);
  s.read("malware_marker_rate", spec.malware_marker_rate);
  s.read("seed", spec.seed);
  s.finish();
  try {
    spec.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
  return spec;
}

void read_pipeline(Section& s, PipelineOptions& p) {
  s.read("desk_scale", p.desk_scale);
  s.read("max_epochs", p.train.max_epochs);
  s.read("patience", p.train.patience);
  s.read("opcode_image_maxlen", p.opcode_image_maxlen);
  s.read("token_maxlen", p.token_maxlen);
  s.read("msdroid_k_hops", p.msdroid_k_hops);
  if (auto c = s.get<std::string>("malscan_centrality")) {
    try {
      p.malscan_centrality = graph::parse_centrality(*c);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  s.read("hindroid_cosine", p.hindroid_cosine);
  s.read("sdac_clusters", p.sdac.max_clusters);
  s.read("repeats", p.repeats);
  s.finish();
  p.train.desk_scale_factor = p.desk_scale;
  try {
    validate_train_config(p.train);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (p.desk_scale < 1.0) throw ConfigError("pipeline.desk_scale must be >= 1");
  if (p.msdroid_k_hops < 0) throw ConfigError("pipeline.msdroid_k_hops must be >= 0");
  if (p.repeats < 0) throw ConfigError("pipeline.repeats must be >= 0");
  if (p.opcode_image_maxlen == 0 || p.token_maxlen == 0) throw ConfigError("pipeline maxlen must be >= 1");
}

template <typename T, typename Parse>
std::vector<T> parse_all(const std::vector<std::string>& names, Parse parse) {
  std::vector<T> out;
  for (const auto& n : names) {
    try {
      out.push_back(parse(n));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

ScenarioConfig read_scenario(Section& s, std::size_t index, std::uint64_t run_seed) {
  ScenarioConfig sc;
  sc.name = s.get<std::string>("name").value_or("scenario" + std::to_string(index + 1));
  if (sc.name.empty() || sc.name.find_first_of(",\"\n/") != std::string::npos) {
    throw ConfigError("scenario name '" + sc.name + "' is empty or holds a reserved character");
  }
  const auto type = s.get<std::string>("type");
  if (!type) throw ConfigError("scenario '" + sc.name + "' needs a type");
  sc.type = parse_scenario_type(*type);
  sc.seed = s.get<std::uint64_t>("seed").value_or(mix_seed(run_seed, hash_string(sc.name)));
  if (auto a = s.list<std::string>("approaches")) sc.approaches = parse_all<Approach>(*a, parse_approach);
  s.read("preset", sc.preset);
  s.read("scale", sc.scale);
  if (sc.preset < 1 || sc.preset > 4) throw ConfigError("scenario '" + sc.name + "': preset must be 1..4");
  if (!(sc.scale > 0.0)) throw ConfigError("scenario '" + sc.name + "': scale must be > 0");
  if (const auto* counts = s.table("counts")) {
    Section c(*counts, "scenario." + sc.name + ".counts");
    ScenarioSpec spec;
    c.read("train_benign", spec.train_benign);
    c.read("train_malicious", spec.train_malicious);
    c.read("val_benign", spec.val_benign);
    c.read("val_malicious", spec.val_malicious);
    c.read("test_benign", spec.test_benign);
    c.read("test_malicious", spec.test_malicious);
    c.read("stratify_by_year", spec.stratify_by_year);
    c.finish();
    sc.counts = spec;
  }
  if (auto f = s.list<double>("fractions")) sc.fractions = *f;
  for (double f : sc.fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("scenario '" + sc.name + "': fractions must be in (0, 1]");
  }
  if (const auto* node = s.raw("ablations")) {
    const auto* arr = node->as_array();
    if (!arr) throw ConfigError("scenario '" + sc.name + "': ablations must be an array of arrays");
    for (const auto& item : *arr) {
      const auto* inner = item.as_array();
      if (!inner) throw ConfigError("scenario '" + sc.name + "': ablations must be an array of arrays");
      std::set<FeatureKind> kinds;
      for (const auto& k : *inner) {
        if (!k.is_string()) throw ConfigError("scenario '" + sc.name + "': ablation kinds must be strings");
        try {
          kinds.insert(parse_feature_kind(k.as_string()->get()));
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
      }
      sc.ablations.push_back(std::move(kinds));
    }
  }
  s.read("base_year", sc.evolution.base_year);
  s.read("bucket_months", sc.evolution.bucket_months);
  s.read("horizon_months", sc.evolution.horizon_months);
  if (sc.evolution.bucket_months < 1 || sc.evolution.horizon_months < sc.evolution.bucket_months ||
      sc.evolution.horizon_months % sc.evolution.bucket_months != 0) {
    throw ConfigError("scenario '" + sc.name + "': horizon_months must be a positive multiple of bucket_months");
  }
  if (auto o = s.list<std::string>("obfuscations")) {
    sc.obfuscations = parse_all<ObfuscationKind>(*o, parse_obfuscation_kind);
  }
  s.read("intensity", sc.intensity);
  if (!(sc.intensity > 0.0 && sc.intensity <= 1.0)) {
    throw ConfigError("scenario '" + sc.name + "': intensity must be in (0, 1]");
  }
  if (auto a = s.list<std::string>("attacks")) sc.attacks = parse_all<AttackKind>(*a, parse_attack_kind);
  s.read("budget", sc.budget);
  s.read("ri_fraction", sc.ri_fraction);
  if (sc.budget < 0) throw ConfigError("scenario '" + sc.name + "': budget must be >= 0");
  if (!(sc.ri_fraction > 0.0 && sc.ri_fraction <= 1.0)) {
    throw ConfigError("scenario '" + sc.name + "': ri_fraction must be in (0, 1]");
  }
  s.finish();

  if (sc.type == ScenarioType::obfuscation && sc.obfuscations.empty()) {
    sc.obfuscations = {ObfuscationKind::rename_identifiers, ObfuscationKind::encrypt_resources,
                       ObfuscationKind::modify_code, ObfuscationKind::reflect_invocation};
  }
  if (sc.type == ScenarioType::attack && sc.attacks.empty()) {
    sc.attacks = {AttackKind::jsma, AttackKind::randomized_input};
  }
  if (sc.type == ScenarioType::ablation && sc.ablations.empty()) {
    throw ConfigError("scenario '" + sc.name + "': ablation needs a non-empty 'ablations' list");
  }
  return sc;
}

}  // namespace

std::string_view to_string(ScenarioType type) {
  switch (type) {
    case ScenarioType::ratio: return "ratio";
    case ScenarioType::downsample: return "downsample";
    case ScenarioType::ablation: return "ablation";
    case ScenarioType::evolution: return "evolution";
    case ScenarioType::obfuscation: return "obfuscation";
    case ScenarioType::attack: return "attack";
  }
  return "ratio";
}

ScenarioType parse_scenario_type(std::string_view text) {
  for (auto t : {ScenarioType::ratio, ScenarioType::downsample, ScenarioType::ablation, ScenarioType::evolution,
                 ScenarioType::obfuscation, ScenarioType::attack}) {
    if (text == to_string(t)) return t;
  }
  throw ConfigError("unknown scenario type '" + std::string(text) +
                    "' (valid: ratio, downsample, ablation, evolution, obfuscation, attack)");
}

RunConfig parse_run_config(std::string_view text, const std::string& base_dir,
                           std::optional<std::uint64_t> seed_override) {
  const auto doc = parse_toml(text);
  Section root(doc, "config");
  RunConfig cfg;
  root.read("name", cfg.name);
  root.read("seed", cfg.seed);
  if (seed_override) cfg.seed = *seed_override;
  root.read("jobs", cfg.jobs);
  root.read("plots", cfg.plots);
  root.read("fail_fast", cfg.fail_fast);
  if (auto out = root.get<std::string>("out")) cfg.out_dir = resolve(base_dir, *out);
  if (cfg.jobs < 0) throw ConfigError("jobs must be >= 0");

  const auto* corpus = root.table("corpus");
  if (!corpus) throw ConfigError("config needs a [corpus] table");
  {
    Section c(*corpus, "corpus");
    if (auto p = c.get<std::string>("path")) cfg.corpus.path = resolve(base_dir, *p);
    if (auto p = c.get<std::string>("catalog")) cfg.corpus.catalog_path = resolve(base_dir, *p);
    if (auto p = c.get<std::string>("reports")) cfg.corpus.reports_path = resolve(base_dir, *p);
    if (const auto* synth = c.table("synth")) {
      Section s(*synth, "corpus.synth");
      if (!s.has("seed")) {
        auto spec = read_synth(s);
        spec.seed = mix_seed(cfg.seed, 0x5e7);
        cfg.corpus.synth = spec;
      } else {
        cfg.corpus.synth = read_synth(s);
      }
    }
    c.finish();
    if (cfg.corpus.path.has_value() == cfg.corpus.synth.has_value()) {
      throw ConfigError("[corpus] needs exactly one of 'path' or a [corpus.synth] table");
    }
    if (cfg.corpus.path && !cfg.corpus.catalog_path) throw ConfigError("[corpus] with 'path' needs 'catalog'");
  }

  if (const auto* p = root.table("pipeline")) {
    Section s(*p, "pipeline");
    read_pipeline(s, cfg.pipeline);
  }

  const auto* det = root.table("detectors");
  if (!det) throw ConfigError("config needs a [detectors] table");
  {
    Section d(*det, "detectors");
    const auto tags = d.list<std::string>("approaches");
    if (!tags || tags->empty()) throw ConfigError("detectors.approaches must list at least one approach");
    std::set<Approach> seen;
    for (auto a : parse_all<Approach>(*tags, parse_approach)) {
      if (!seen.insert(a).second) throw ConfigError("duplicate approach '" + std::string(to_string(a)) + "'");
      cfg.detectors.push_back({a, nlohmann::json::object()});
    }
    if (const auto* ov = d.table("overrides")) {
      for (const auto& [key, node] : *ov) {
        const auto a = parse_approach(key.str());
        auto it = std::find_if(cfg.detectors.begin(), cfg.detectors.end(),
                               [&](const DetectorConfig& x) { return x.approach == a; });
        if (it == cfg.detectors.end()) {
          throw ConfigError("overrides given for '" + std::string(key.str()) + "', which is not a listed approach");
        }
        if (!node.is_table()) throw ConfigError("detectors.overrides." + std::string(key.str()) + " must be a table");
        it->overrides = to_json(node);
        try {
          validate_spec(apply_overrides(default_model_spec(a), it->overrides));
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          throw ConfigError(e.what());
        }
      }
    }
    d.finish();
  }

  if (const auto* node = root.raw("scenario")) {
    const auto* arr = node->as_array();
    if (!arr) throw ConfigError("'scenario' must be an array of tables ([[scenario]])");
    std::set<std::string> names;
    for (std::size_t i = 0; i < arr->size(); ++i) {
      const auto* t = (*arr)[i].as_table();
      if (!t) throw ConfigError("'scenario' entries must be tables");
      Section s(*t, "scenario[" + std::to_string(i) + "]");
      auto sc = read_scenario(s, i, cfg.seed);
      if (!names.insert(sc.name).second) throw ConfigError("duplicate scenario name '" + sc.name + "'");
      for (auto a : sc.approaches) {
        if (std::none_of(cfg.detectors.begin(), cfg.detectors.end(),
                         [&](const DetectorConfig& d) { return d.approach == a; })) {
          throw ConfigError("scenario '" + sc.name + "' names approach '" + std::string(to_string(a)) +
                            "', which is not listed under [detectors]");
        }
      }
      cfg.scenarios.push_back(std::move(sc));
    }
  }
  if (cfg.scenarios.empty()) throw ConfigError("config needs at least one [[scenario]]");
  root.finish();
  return cfg;
}

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig load_run_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
  return parse_run_config(slurp(path), fs::path(path).parent_path().string(), seed_override);
}

SynthSpec parse_synth_config(std::string_view text) {
  const auto doc = parse_toml(text);
  Section root(doc, "config");
  const auto* synth = root.table("synth");
  if (!synth) throw ConfigError("synth config needs a [synth] table");
  Section s(*synth, "synth");
  auto spec = read_synth(s);
  root.finish();
  return spec;
}

SynthSpec load_synth_config(const std::string& path) { return parse_synth_config(slurp(path)); }

}  // namespace mdbench
