#include "mdbench/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "mdbench/error.hpp"
#include "mdbench/neural.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

std::string_view to_string(ObfuscationKind kind) {
  switch (kind) {
    case ObfuscationKind::rename_identifiers: return "rename_identifiers";
    case ObfuscationKind::encrypt_resources: return "encrypt_resources";
    case ObfuscationKind::modify_code: return "modify_code";
    case ObfuscationKind::reflect_invocation: return "reflect_invocation";
  }
  return "rename_identifiers";
}

ObfuscationKind parse_obfuscation_kind(std::string_view text) {
  for (auto k : {ObfuscationKind::rename_identifiers, ObfuscationKind::encrypt_resources,
                 ObfuscationKind::modify_code, ObfuscationKind::reflect_invocation}) {
    if (text == to_string(k)) return k;
  }
  throw Error("unknown obfuscation kind '" + std::string(text) + "'");
}

namespace {

std::size_t affected(double intensity, std::size_t n) {
  return std::min(n, static_cast<std::size_t>(std::ceil(intensity * static_cast<double>(n) - 1e-9)));
}

std::string random_token(Rng& rng, std::string_view prefix) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string s(prefix);
  for (int i = 0; i < 12; ++i) s.push_back(kHex[rng.index(16)]);
  return s;
}

void rename_identifiers(FeatureRecord& r, Rng& rng, double intensity) {
  std::vector<Component> comps(r.manifest.components.begin(), r.manifest.components.end());
  std::set<std::size_t> chosen;
  for (auto i : rng.sample_indices(comps.size(), affected(intensity, comps.size()))) chosen.insert(i);
  std::set<Component> renamed;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (chosen.count(i)) comps[i].name = random_token(rng, "o.");
    renamed.insert(comps[i]);
  }
  r.manifest.components = std::move(renamed);

  std::vector<std::string> ids;
  for (const auto& s : r.code.code_strings) {
    if (s.starts_with(kIdentifierStringPrefix)) ids.push_back(s);
  }
  for (auto i : rng.sample_indices(ids.size(), affected(intensity, ids.size()))) {
    r.code.code_strings.erase(ids[i]);
    r.code.code_strings.insert(random_token(rng, std::string(kIdentifierStringPrefix) + "o."));
  }
}

void add_call(FeatureRecord& r, Rng& rng, const std::string& api) {
  auto& g = r.graph;
  std::optional<std::int64_t> target;
  for (const auto& n : g.nodes) {
    if (n.api_name == api) target = n.node_id;
  }
  if (!target) {
    target = g.next_node_id();
    g.nodes.push_back({*target, NodeKind::external_api, api, false});
  }
  std::vector<std::int64_t> callers;
  for (const auto& n : g.nodes) {
    if (n.kind == NodeKind::internal) callers.push_back(n.node_id);
  }
  if (!callers.empty()) {
    g.edges.emplace_back(callers[static_cast<std::size_t>(rng.index(callers.size()))], *target);
  }
  ++r.code.api_calls[api];
}

void encrypt_resources(FeatureRecord& r, Rng& rng, double intensity) {
  std::vector<std::string> res(r.manifest.resources.begin(), r.manifest.resources.end());
  for (auto i : rng.sample_indices(res.size(), affected(intensity, res.size()))) {
    r.manifest.resources.erase(res[i]);
    r.manifest.resources.insert(random_token(rng, "enc/"));
    r.code.code_strings.erase(std::string(kResourceStringPrefix) + res[i]);
  }
  add_call(r, rng, std::string(kCryptoApi));
}

void modify_code(FeatureRecord& r, Rng& rng, double intensity) {
  auto& g = r.graph;
  const std::size_t n_junk = affected(intensity, g.nodes.size());
  const auto original_ops = r.code.opcode_seq;
  for (std::size_t k = 0; k < n_junk; ++k) {
    const std::int64_t junk = g.next_node_id();
    g.nodes.push_back({junk, NodeKind::internal, std::nullopt, false});
    if (!g.edges.empty()) {
      const auto e = static_cast<std::size_t>(rng.index(g.edges.size()));
      const auto [a, b] = g.edges[e];
      g.edges[e] = {a, junk};
      g.edges.emplace_back(junk, b);
    } else if (g.nodes.size() > 1) {
      const auto a = g.nodes[static_cast<std::size_t>(rng.index(g.nodes.size() - 1))].node_id;
      g.edges.emplace_back(a, junk);
    }
    if (!original_ops.empty()) {
      std::array<std::int32_t, 3> gram{};
      for (auto& op : gram) op = original_ops[static_cast<std::size_t>(rng.index(original_ops.size()))];
      auto& ops = r.code.opcode_seq;
      const auto pos = static_cast<std::ptrdiff_t>(rng.index(ops.size() + 1));
      ops.insert(ops.begin() + pos, gram.begin(), gram.end());
    }
  }
}

void reflect_invocation(FeatureRecord& r, Rng& rng, double intensity) {
  auto& g = r.graph;
  std::map<std::int64_t, const GraphNode*> sensitive;
  for (const auto& n : g.nodes) {
    if (n.sensitive && n.api_name) sensitive.emplace(n.node_id, &n);
  }
  std::vector<std::size_t> into;
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    if (sensitive.count(g.edges[e].second)) into.push_back(e);
  }
  const auto chosen = rng.sample_indices(into.size(), affected(intensity, into.size()));
  if (chosen.empty()) return;
  std::int64_t reflect = -1;
  for (const auto& n : g.nodes) {
    if (n.api_name == kReflectionApi) reflect = n.node_id;
  }
  std::vector<std::pair<std::size_t, std::string>> rerouted;
  for (auto c : chosen) rerouted.emplace_back(into[c], *sensitive.at(g.edges[into[c]].second)->api_name);
  if (reflect < 0) {
    reflect = g.next_node_id();
    g.nodes.push_back({reflect, NodeKind::external_api, std::string(kReflectionApi), false});
  }
  for (const auto& [e, api] : rerouted) {
    g.edges[e].second = reflect;
    r.code.code_strings.insert(api);
    auto it = r.code.api_calls.find(api);
    if (it != r.code.api_calls.end() && --it->second <= 0) r.code.api_calls.erase(it);
    ++r.code.api_calls[std::string(kReflectionApi)];
  }
}

}  // namespace

FeatureRecord obfuscate(const FeatureRecord& record, ObfuscationKind kind, std::uint64_t seed, double intensity) {
  if (!(intensity > 0.0 && intensity <= 1.0)) throw Error("obfuscation intensity must be in (0, 1]");
  FeatureRecord out = record;
  Rng rng(mix_seed(mix_seed(seed, hash_string(record.app_id)), static_cast<std::uint64_t>(kind)));
  switch (kind) {
    case ObfuscationKind::rename_identifiers: rename_identifiers(out, rng, intensity); break;
    case ObfuscationKind::encrypt_resources: encrypt_resources(out, rng, intensity); break;
    case ObfuscationKind::modify_code: modify_code(out, rng, intensity); break;
    case ObfuscationKind::reflect_invocation: reflect_invocation(out, rng, intensity); break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Substitutes

double LinearSubstitute::logit(std::span<const double> x) const {
  if (x.size() != w_.size()) throw Error("substitute: input width mismatch");
  double s = b_;
  for (std::size_t j = 0; j < x.size(); ++j) s += w_[j] * x[j];
  return s;
}

std::vector<double> LinearSubstitute::gradient(std::span<const double> x) const {
  if (x.size() != w_.size()) throw Error("substitute: input width mismatch");
  return w_;
}

MlpSubstitute::MlpSubstitute(std::unique_ptr<Mlp> model) : model_(std::move(model)) {}
MlpSubstitute::~MlpSubstitute() = default;
std::size_t MlpSubstitute::dim() const { return model_->state().at(1).cols; }
double MlpSubstitute::logit(std::span<const double> x) const { return model_->logit(x); }
std::vector<double> MlpSubstitute::gradient(std::span<const double> x) const { return model_->logit_gradient(x); }

bool is_binary(const DenseMatrix& m) {
  return std::all_of(m.data.begin(), m.data.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::unique_ptr<MlpSubstitute> train_substitute(const EncodedDataset& train, std::uint64_t seed, double desk_scale,
                                                int max_epochs) {
  if (train.kind != EncodingKind::dense_matrix) throw Error("substitute needs a binary feature matrix");
  if (train.rows() == 0) throw Error("substitute: empty training set");
  if (!is_binary(train.dense())) throw Error("substitute: features must be binary");
  std::vector<std::size_t> order(train.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5b));
  rng.shuffle(order);
  const std::size_t n_val = train.rows() >= 20 ? train.rows() / 10 : 0;
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> fit_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(fit_rows.begin(), fit_rows.end());
  auto model = std::make_unique<Mlp>(MlpSpec{}, desk_scale);
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.max_epochs = max_epochs;
  cfg.desk_scale_factor = desk_scale;
  model->fit(train.subset(fit_rows), train.subset(val_rows), cfg);
  return std::make_unique<MlpSubstitute>(std::move(model));
}

// ---------------------------------------------------------------------------
// Attacks

JsmaResult jsma_attack(const Substitute& substitute, std::span<const double> x, int budget) {
  if (budget < 1) throw Error("attack budget must be >= 1");
  JsmaResult r;
  r.x.assign(x.begin(), x.end());
  while (true) {
    if (substitute.logit(r.x) <= 0.0) {
      r.success = true;
      break;
    }
    if (r.flips >= budget) break;
    const auto g = substitute.gradient(r.x);
    std::size_t best = r.x.size();
    double best_g = 0.0;
    for (std::size_t j = 0; j < r.x.size(); ++j) {
      if (r.x[j] == 0.0 && g[j] < best_g) {
        best_g = g[j];
        best = j;
      }
    }
    if (best == r.x.size()) break;
    r.x[best] = 1.0;
    ++r.flips;
  }
  return r;
}

std::vector<double> randomized_input(std::span<const double> x, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("randomized input fraction must be in (0, 1]");
  std::vector<double> out(x.begin(), x.end());
  std::vector<std::size_t> zeros;
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (out[j] == 0.0) zeros.push_back(j);
  }
  Rng rng(mix_seed(seed, 0x121));
  for (auto i : rng.sample_indices(zeros.size(), affected(fraction, zeros.size()))) out[zeros[i]] = 1.0;
  return out;
}

std::string_view to_string(AttackKind kind) { return kind == AttackKind::jsma ? "jsma" : "randomized_input"; }

AttackKind parse_attack_kind(std::string_view text) {
  if (text == "jsma") return AttackKind::jsma;
  if (text == "randomized_input" || text == "ri") return AttackKind::randomized_input;
  throw Error("unknown attack '" + std::string(text) + "'");
}

int default_budget(std::size_t n_features) {
  return std::max(50, static_cast<int>(std::ceil(0.01 * static_cast<double>(n_features))));
}

double AttackOutcome::asr() const {
  return n_total == 0 ? 0.0 : static_cast<double>(n_success) / static_cast<double>(n_total);
}

MetricValue AttackOutcome::apr() const {
  if (flips_per_success.empty() || features_total == 0) return {0.0, true};
  double s = 0.0;
  for (int f : flips_per_success) s += static_cast<double>(f) / static_cast<double>(features_total);
  return {s / static_cast<double>(flips_per_success.size()), false};
}

AttackOutcome evaluate_attack(const TargetPredict& target, const Substitute* substitute,
                              const DenseMatrix& malicious_rows, const AttackSpec& spec) {
  if (!is_binary(malicious_rows)) throw Error("not attackable: features are not binary");
  if (spec.kind == AttackKind::jsma && !substitute) throw Error("JSMA needs a substitute model");
  if (substitute && malicious_rows.rows > 0 && substitute->dim() != malicious_rows.cols) {
    throw Error("substitute width does not match the target features");
  }
  AttackOutcome out;
  out.features_total = static_cast<std::int64_t>(malicious_rows.cols);
  out.budget = spec.budget > 0 ? spec.budget : default_budget(malicious_rows.cols);
  const auto initial = target(malicious_rows);
  DenseMatrix adversarial;
  adversarial.cols = malicious_rows.cols;
  std::vector<int> flips;
  for (std::size_t i = 0; i < malicious_rows.rows; ++i) {
    if (initial.at(i) != 1) continue;
    const auto x = malicious_rows.row(i);
    std::vector<double> xa;
    int f = 0;
    if (spec.kind == AttackKind::jsma) {
      auto r = jsma_attack(*substitute, x, out.budget);
      xa = std::move(r.x);
      f = r.flips;
    } else {
      xa = randomized_input(x, spec.fraction, mix_seed(spec.seed, i));
    }
    f = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (x[j] == 1.0 && xa[j] == 0.0) ++out.removed_features;
      if (x[j] != xa[j]) ++f;
    }
    adversarial.append_row(xa);
    flips.push_back(f);
  }
  out.n_total = static_cast<std::int64_t>(adversarial.rows);
  if (adversarial.rows == 0) return out;
  const auto after = target(adversarial);
  for (std::size_t i = 0; i < adversarial.rows; ++i) {
    if (after.at(i) == 0) {
      ++out.n_success;
      out.flips_per_success.push_back(flips[i]);
    }
  }
  return out;
}

}  // namespace mdbench
