#include "mdbench/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench {

namespace {

constexpr std::array<std::string_view, 18> kApiPackages = {
    "android.telephony", "android.location", "android.net.wifi", "android.content.pm", "android.app",
    "java.net",          "java.io",          "java.lang.reflect", "javax.crypto",      "com.google.android.gms",
    "org.apache.http.client", "org.json",    "org.w3c.dom",       "org.xml.sax",       "org.xmlpull.v1",
    "junit.framework",   "com.thirdparty.ads", "a.b",
};

constexpr std::array<std::string_view, 24> kNamedPermissions = {
    "SEND_SMS", "READ_SMS", "RECEIVE_SMS", "READ_CONTACTS", "READ_PHONE_STATE", "CALL_PHONE",
    "ACCESS_FINE_LOCATION", "ACCESS_COARSE_LOCATION", "INTERNET", "ACCESS_NETWORK_STATE", "CAMERA", "RECORD_AUDIO",
    "READ_EXTERNAL_STORAGE", "WRITE_EXTERNAL_STORAGE", "RECEIVE_BOOT_COMPLETED", "WAKE_LOCK", "VIBRATE",
    "GET_ACCOUNTS", "SYSTEM_ALERT_WINDOW", "INSTALL_PACKAGES", "READ_CALL_LOG", "WRITE_SETTINGS",
    "BLUETOOTH", "CHANGE_WIFI_STATE",
};

constexpr std::array<std::string_view, 4> kComponentSuffix = {"Activity", "Service", "Receiver", "Provider"};

enum class Slot { permission, api, ngram };

struct SlotTimeline {
  Slot slot;
  std::vector<std::pair<std::int32_t, std::string>> entries;  // (month index from, feature)
};

std::string perm_name(std::size_t i) {
  if (i < kNamedPermissions.size()) return "android.permission." + std::string(kNamedPermissions[i]);
  return "android.permission.EXT_" + std::to_string(i);
}

std::string intent_name(std::size_t i) { return "android.intent.action.A" + std::to_string(i); }

std::string ngram_name(const std::array<std::int32_t, 3>& g) {
  return std::to_string(g[0]) + "-" + std::to_string(g[1]) + "-" + std::to_string(g[2]);
}

std::array<std::int32_t, 3> parse_ngram(std::string_view s) {
  std::array<std::int32_t, 3> g{};
  std::size_t pos = 0;
  for (int k = 0; k < 3; ++k) {
    auto dash = s.find('-', pos);
    g[static_cast<std::size_t>(k)] = std::stoi(std::string(s.substr(pos, dash - pos)));
    pos = dash + 1;
  }
  return g;
}

std::string_view slot_prefix(Slot s) {
  switch (s) {
    case Slot::permission: return "perm::";
    case Slot::api: return "api::";
    case Slot::ngram: return "ngram::";
  }
  return "";
}

// Deterministic pools derived from the knobs.
struct Pools {
  std::vector<std::string> permissions;
  std::vector<std::string> apis;
  std::vector<std::size_t> sensitive;  // indices into apis
  std::vector<std::string> ngrams;
  std::vector<std::string> marker_intents;
  std::vector<std::string> marker_apis;
};

std::vector<std::size_t> sensitive_indices(std::size_t n_apis, std::size_t n_sensitive) {
  Rng rng(0x5e5217e5ULL);
  auto idx = rng.sample_indices(n_apis, n_sensitive);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Pools make_pools(const SynthSpec& spec) {
  Pools p;
  for (std::size_t i = 0; i < spec.n_permissions; ++i) p.permissions.push_back(perm_name(i));
  p.apis = synth_api_names(spec.n_apis);
  p.sensitive = sensitive_indices(spec.n_apis, spec.n_sensitive);
  Rng rng(mix_seed(spec.seed, 17));
  std::set<std::string> seen;
  const std::size_t want = std::max<std::size_t>(64, spec.signature_ngrams * 16);
  std::size_t guard = 0;
  while (p.ngrams.size() < want && guard++ < want * 100) {
    std::array<std::int32_t, 3> g{};
    for (auto& x : g) x = static_cast<std::int32_t>(rng.index(static_cast<std::uint64_t>(spec.opcode_vocab)));
    auto name = ngram_name(g);
    if (seen.insert(name).second) p.ngrams.push_back(name);
  }
  const std::size_t n_intent_markers = spec.benign_markers / 2;
  for (std::size_t i = 0; i < n_intent_markers; ++i) p.marker_intents.push_back(intent_name(i));
  std::vector<std::size_t> plain;
  for (std::size_t i = 0, k = 0; i < p.apis.size(); ++i) {
    if (k < p.sensitive.size() && p.sensitive[k] == i) {
      ++k;
      continue;
    }
    plain.push_back(i);
  }
  for (std::size_t i : rng.sample_indices(plain.size(), spec.benign_markers - n_intent_markers)) {
    p.marker_apis.push_back(p.apis[plain[i]]);
  }
  return p;
}

std::vector<SlotTimeline> build_schedule(const SynthSpec& spec, const Pools& pools) {
  Rng rng(mix_seed(spec.seed, 1));
  std::vector<SlotTimeline> slots;
  const std::int32_t start = spec.year_from * 12;

  auto init = [&](Slot kind, const std::vector<std::string>& pool, std::size_t count) {
    for (std::size_t i : rng.sample_indices(pool.size(), count)) {
      slots.push_back({kind, {{start, pool[i]}}});
    }
  };
  std::vector<std::string> sensitive_names;
  for (auto i : pools.sensitive) sensitive_names.push_back(pools.apis[i]);
  init(Slot::permission, pools.permissions, spec.signature_permissions);
  init(Slot::api, sensitive_names, spec.signature_apis);
  init(Slot::ngram, pools.ngrams, spec.signature_ngrams);

  auto pool_for = [&](Slot s) -> const std::vector<std::string>& {
    if (s == Slot::permission) return pools.permissions;
    if (s == Slot::api) return sensitive_names;
    return pools.ngrams;
  };

  std::map<Slot, std::set<std::string>> used;
  for (const auto& t : slots) used[t.slot].insert(t.entries.back().second);

  for (std::int32_t year = spec.year_from + 1; year <= spec.year_to; ++year) {
    for (auto& t : slots) {
      if (!rng.bernoulli(spec.drift_strength)) continue;
      const std::int32_t month = static_cast<std::int32_t>(rng.range(1, 12));
      // Prefer never-used features, then anything not currently active.
      std::set<std::string> active;
      for (const auto& other : slots) {
        if (other.slot == t.slot) active.insert(other.entries.back().second);
      }
      const auto& pool = pool_for(t.slot);
      std::vector<std::string> fresh;
      for (const auto& f : pool) {
        if (!used[t.slot].count(f)) fresh.push_back(f);
      }
      if (fresh.empty()) {
        for (const auto& f : pool) {
          if (!active.count(f)) fresh.push_back(f);
        }
      }
      if (fresh.empty()) continue;
      const auto& pick = fresh[static_cast<std::size_t>(rng.index(fresh.size()))];
      used[t.slot].insert(pick);
      t.entries.emplace_back(year * 12 + month - 1, pick);
    }
  }
  return slots;
}

std::vector<YearSignature> schedule_by_year(const SynthSpec& spec, const std::vector<SlotTimeline>& slots) {
  std::vector<YearSignature> out;
  for (std::int32_t year = spec.year_from; year <= spec.year_to; ++year) {
    YearSignature ys;
    ys.year = year;
    const std::int32_t jan = year * 12;
    for (const auto& t : slots) {
      std::string current;
      for (const auto& [from, f] : t.entries) {
        if (from <= jan) current = f;
      }
      ys.features.push_back(std::string(slot_prefix(t.slot)) + current);
      std::string prev = current;
      for (const auto& [from, f] : t.entries) {
        if (from > jan && from < jan + 12) {
          ys.changes.push_back({from - jan + 1, std::string(slot_prefix(t.slot)) + prev,
                                std::string(slot_prefix(t.slot)) + f});
          prev = f;
        }
      }
    }
    std::stable_sort(ys.changes.begin(), ys.changes.end(),
                     [](const SignatureChange& a, const SignatureChange& b) { return a.month < b.month; });
    out.push_back(std::move(ys));
  }
  return out;
}

struct ActiveSignature {
  std::vector<std::string> permissions;
  std::vector<std::string> apis;
  std::vector<std::array<std::int32_t, 3>> ngrams;
};

ActiveSignature active_at(const std::vector<SlotTimeline>& slots, std::int32_t month_index) {
  ActiveSignature a;
  for (const auto& t : slots) {
    std::string current = t.entries.front().second;
    for (const auto& [from, f] : t.entries) {
      if (from <= month_index) current = f;
    }
    switch (t.slot) {
      case Slot::permission: a.permissions.push_back(current); break;
      case Slot::api: a.apis.push_back(current); break;
      case Slot::ngram: a.ngrams.push_back(parse_ngram(current)); break;
    }
  }
  return a;
}

// Zipf-like opcode frequencies over a seeded permutation of the vocabulary.
struct OpcodeSampler {
  std::vector<std::int32_t> ids;
  std::vector<double> cumulative;

  OpcodeSampler(std::int32_t vocab, std::uint64_t seed) {
    ids.resize(static_cast<std::size_t>(vocab));
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(mix_seed(seed, 23));
    rng.shuffle(ids);
    double acc = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      acc += 1.0 / std::pow(static_cast<double>(i + 1), 0.9);
      cumulative.push_back(acc);
    }
  }

  std::int32_t draw(Rng& rng) const {
    const double u = rng.uniform() * cumulative.back();
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    auto pos = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                                  static_cast<std::ptrdiff_t>(ids.size()) - 1));
    return ids[pos];
  }
};

template <typename Pool>
void pick_some(Rng& rng, const Pool& pool, std::size_t lo, std::size_t hi, std::set<std::string>& out,
               std::string_view prefix = "") {
  const auto k = static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  for (std::size_t i : rng.sample_indices(pool.size(), k)) out.insert(std::string(prefix) + std::string(pool[i]));
}

FeatureRecord make_record(const SynthSpec& spec, const Pools& pools, const SensitiveApiCatalog& catalog,
                          const OpcodeSampler& opcodes, const std::vector<SlotTimeline>& slots, std::size_t index,
                          Label label, std::int32_t year, std::int32_t month) {
  Rng rng(mix_seed(spec.seed, 1000 + index));
  FeatureRecord rec;
  char id[32];
  std::snprintf(id, sizeof id, "app-%06zu", index);
  rec.app_id = id;
  rec.label = label;
  rec.year = year;
  rec.month = month;
  rec.size_mb = std::round(std::exp(1.0 + 0.8 * rng.normal()) * 100.0) / 100.0;
  switch (label) {
    case Label::malicious: rec.vt_positives = static_cast<std::int32_t>(rng.range(4, 40)); break;
    case Label::grayware: rec.vt_positives = static_cast<std::int32_t>(rng.range(1, 3)); break;
    case Label::benign: rec.vt_positives = 0; break;
    case Label::unknown: break;
  }

  double intensity = 0.0;
  if (label == Label::malicious) {
    intensity = spec.signal_min + (spec.signal_max - spec.signal_min) * rng.uniform();
  } else if (rng.bernoulli(spec.lookalike_ratio)) {
    intensity = spec.lookalike_strength;
  }
  const ActiveSignature sig = active_at(slots, rec.month_index());

  // manifest
  auto& m = rec.manifest;
  pick_some(rng, pools.permissions, 2, 10, m.permissions);
  for (const auto& p : sig.permissions) {
    if (rng.bernoulli(intensity)) m.permissions.insert(p);
  }
  static const std::array<std::string_view, 12> hardware = {
      "android.hardware.camera", "android.hardware.telephony", "android.hardware.location.gps",
      "android.hardware.wifi", "android.hardware.bluetooth", "android.hardware.nfc",
      "android.hardware.microphone", "android.hardware.sensor.accelerometer", "android.hardware.touchscreen",
      "android.hardware.screen.portrait", "android.hardware.usb.host", "android.hardware.fingerprint"};
  pick_some(rng, hardware, 0, 3, m.hardware);
  const auto n_comp = rng.range(2, 8);
  for (std::int64_t c = 0; c < n_comp; ++c) {
    const auto kind = static_cast<std::size_t>(rng.index(4));
    m.components.insert(Component{static_cast<ComponentKind>(kind),
                                  "com.example.c" + std::to_string(rng.index(60)) + "." +
                                      std::string(kComponentSuffix[kind]) + std::to_string(rng.index(8))});
  }
  std::vector<std::string> intent_pool;
  for (std::size_t i = 0; i < 40; ++i) intent_pool.push_back(intent_name(i));
  pick_some(rng, intent_pool, 1, 5, m.intents);
  const double marker_rate = label == Label::malicious ? spec.malware_marker_rate : spec.benign_marker_rate;
  for (const auto& intent : pools.marker_intents) {
    if (rng.bernoulli(marker_rate)) m.intents.insert(intent);
  }
  std::vector<std::string> res_pool;
  for (int i = 0; i < 200; ++i) res_pool.push_back("res/drawable/r" + std::to_string(i));
  pick_some(rng, res_pool, 3, 10, m.resources);

  // code strings: identifiers, resource references, literals
  auto& cs = rec.code.code_strings;
  for (std::int64_t k = rng.range(2, 6); k > 0; --k) {
    cs.insert(std::string(kIdentifierStringPrefix) + "com.example.c" + std::to_string(rng.index(60)) + ".M" +
              std::to_string(rng.index(40)));
  }
  {
    std::vector<std::string> res(m.resources.begin(), m.resources.end());
    for (std::int64_t k = rng.range(0, 2); k > 0 && !res.empty(); --k) {
      cs.insert(std::string(kResourceStringPrefix) + res[static_cast<std::size_t>(rng.index(res.size()))]);
    }
  }
  for (std::int64_t k = rng.range(2, 5); k > 0; --k) cs.insert("str:literal" + std::to_string(rng.index(200)));

  // program graph
  auto& g = rec.graph;
  const auto n_internal = static_cast<std::int64_t>(
      rng.range(static_cast<std::int64_t>(spec.graph_size_range.first),
                static_cast<std::int64_t>(spec.graph_size_range.second)));
  for (std::int64_t i = 0; i < n_internal; ++i) g.nodes.push_back({i, NodeKind::internal, std::nullopt, false});
  for (std::int64_t i = 1; i < n_internal; ++i) g.edges.emplace_back(rng.range(0, i - 1), i);
  for (std::int64_t k = n_internal / 3; k > 0 && n_internal > 1; --k) {
    const auto a = rng.range(0, n_internal - 1);
    auto b = rng.range(0, n_internal - 2);
    if (b >= a) ++b;
    g.edges.emplace_back(a, b);
  }
  std::map<std::string, std::int64_t> api_node;
  auto call = [&](std::int64_t caller, const std::string& api) {
    auto it = api_node.find(api);
    if (it == api_node.end()) {
      const std::int64_t id = static_cast<std::int64_t>(g.nodes.size());
      g.nodes.push_back({id, NodeKind::external_api, api, catalog.contains(api)});
      it = api_node.emplace(api, id).first;
    }
    g.edges.emplace_back(caller, it->second);
    ++rec.code.api_calls[api];
  };
  const auto n_bg = static_cast<std::size_t>(rng.range(std::max<std::int64_t>(1, n_internal / 2), n_internal * 3 / 2));
  for (std::size_t i : rng.sample_indices(pools.apis.size(), n_bg)) {
    for (std::int64_t c = rng.range(1, 3); c > 0; --c) call(rng.range(0, n_internal - 1), pools.apis[i]);
  }
  for (const auto& api : pools.marker_apis) {
    if (rng.bernoulli(marker_rate)) call(rng.range(0, n_internal - 1), api);
  }
  if (intensity > 0.0) {
    std::vector<const std::string*> planted;
    for (const auto& api : sig.apis) {
      if (rng.bernoulli(intensity)) planted.push_back(&api);
    }
    if (!planted.empty()) {
      // payload method hanging off a random internal method
      const std::int64_t payload = static_cast<std::int64_t>(g.nodes.size());
      g.nodes.push_back({payload, NodeKind::internal, std::nullopt, false});
      g.edges.emplace_back(rng.range(0, n_internal - 1), payload);
      for (const auto* api : planted) {
        for (std::int64_t c = rng.range(1, 2); c > 0; --c) call(payload, *api);
      }
    }
  }

  // opcode sequence
  const auto len = static_cast<std::size_t>(
      rng.range(static_cast<std::int64_t>(spec.opcode_len_range.first),
                static_cast<std::int64_t>(spec.opcode_len_range.second)));
  auto& ops = rec.code.opcode_seq;
  ops.reserve(len);
  for (std::size_t i = 0; i < len; ++i) ops.push_back(opcodes.draw(rng));
  for (const auto& ng : sig.ngrams) {
    if (!rng.bernoulli(intensity)) continue;
    for (std::int64_t c = rng.range(1, 2); c > 0; --c) {
      const auto pos = static_cast<std::size_t>(rng.index(len - 2));
      std::copy(ng.begin(), ng.end(), ops.begin() + static_cast<std::ptrdiff_t>(pos));
    }
  }
  return rec;
}

}  // namespace

void SynthSpec::validate() const {
  auto fail = [](const std::string& why) { throw Error("invalid synth spec: " + why); };
  if (n_apps == 0) fail("n_apps must be positive");
  if (!(malware_ratio > 0.0 && malware_ratio < 1.0)) fail("malware_ratio must be in (0,1)");
  if (grayware_ratio < 0.0 || malware_ratio + grayware_ratio > 1.0) fail("grayware_ratio out of range");
  if (year_to < year_from) fail("empty year range");
  if (drift_strength < 0.0 || drift_strength > 1.0) fail("drift_strength must be in [0,1]");
  if (n_sensitive > n_apis) fail("n_sensitive exceeds n_apis");
  if (n_sensitive == 0) fail("n_sensitive must be positive");
  if (signature_permissions > n_permissions) fail("signature size exceeds n_permissions");
  if (signature_apis > n_sensitive) fail("signature size exceeds n_sensitive");
  if (graph_size_range.first < 2 || graph_size_range.first > graph_size_range.second) fail("bad graph_size_range");
  if (opcode_len_range.first < 3 || opcode_len_range.first > opcode_len_range.second) fail("bad opcode_len_range");
  if (opcode_vocab < 2) fail("opcode_vocab must be >= 2");
  if (!(signal_min >= 0.0 && signal_min <= signal_max && signal_max <= 1.0)) fail("bad signal range");
  if (lookalike_ratio < 0.0 || lookalike_ratio > 1.0) fail("lookalike_ratio out of range");
  if (lookalike_strength < 0.0 || lookalike_strength > 1.0) fail("lookalike_strength out of range");
  if (benign_markers / 2 > 40 || benign_markers - benign_markers / 2 > n_apis - n_sensitive) {
    fail("too many benign markers");
  }
  if (benign_marker_rate < 0.0 || benign_marker_rate > 1.0) fail("benign_marker_rate out of range");
  if (malware_marker_rate < 0.0 || malware_marker_rate > 1.0) fail("malware_marker_rate out of range");
}

std::vector<std::string> synth_api_names(std::size_t n_apis) {
  std::vector<std::string> out;
  out.reserve(n_apis);
  const std::size_t P = kApiPackages.size();
  for (std::size_t i = 0; i < n_apis; ++i) {
    out.push_back(std::string(kApiPackages[i % P]) + ".C" + std::to_string((i / P) % 5) + ".m" + std::to_string(i));
  }
  return out;
}

SensitiveApiCatalog synth_catalog(const SynthSpec& spec) {
  const auto apis = synth_api_names(spec.n_apis);
  std::vector<std::string> names;
  for (auto i : sensitive_indices(spec.n_apis, spec.n_sensitive)) names.push_back(apis[i]);
  return SensitiveApiCatalog(std::move(names),
                             "synth-" + std::to_string(spec.n_apis) + "-" + std::to_string(spec.n_sensitive));
}

std::vector<YearSignature> describe_signal(const SynthSpec& spec) {
  spec.validate();
  const Pools pools = make_pools(spec);
  return schedule_by_year(spec, build_schedule(spec, pools));
}

std::string format_signal(const std::vector<YearSignature>& schedule) {
  std::ostringstream out;
  for (const auto& ys : schedule) {
    out << ys.year << ":";
    for (const auto& f : ys.features) out << " " << f;
    out << "\n";
    for (const auto& c : ys.changes) {
      out << "  month " << c.month << ": " << c.removed << " -> " << c.added << "\n";
    }
  }
  return out.str();
}

std::vector<std::string> signature_at(const std::vector<YearSignature>& schedule, std::int32_t year,
                                      std::int32_t month) {
  for (const auto& ys : schedule) {
    if (ys.year != year) continue;
    auto features = ys.features;
    for (const auto& c : ys.changes) {
      if (c.month > month) break;
      std::replace(features.begin(), features.end(), c.removed, c.added);
    }
    return features;
  }
  throw Error("year " + std::to_string(year) + " outside the synth schedule");
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  const Pools pools = make_pools(spec);
  const auto slots = build_schedule(spec, pools);
  SynthCorpus out;
  out.catalog = synth_catalog(spec);
  out.schedule = schedule_by_year(spec, slots);
  const OpcodeSampler opcodes(spec.opcode_vocab, spec.seed);

  const auto n_mal = static_cast<std::size_t>(std::llround(static_cast<double>(spec.n_apps) * spec.malware_ratio));
  const auto n_gray = static_cast<std::size_t>(std::llround(static_cast<double>(spec.n_apps) * spec.grayware_ratio));
  if (n_mal + n_gray > spec.n_apps) throw Error("invalid synth spec: label counts exceed n_apps");
  std::vector<Label> labels(spec.n_apps, Label::benign);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_mal), Label::malicious);
  std::fill(labels.begin() + static_cast<std::ptrdiff_t>(n_mal),
            labels.begin() + static_cast<std::ptrdiff_t>(n_mal + n_gray), Label::grayware);
  Rng rng(mix_seed(spec.seed, 2));
  rng.shuffle(labels);

  // Years cycle within each label class so every year holds an equal share
  // of each class; the class order itself is shuffled above.
  const std::int32_t n_years = spec.year_to - spec.year_from + 1;
  std::array<std::int32_t, 4> seen_per_label{};
  out.records.reserve(spec.n_apps);
  for (std::size_t i = 0; i < spec.n_apps; ++i) {
    auto& seen = seen_per_label[static_cast<std::size_t>(labels[i])];
    const std::int32_t year = spec.year_from + (seen++ % n_years);
    const auto month = static_cast<std::int32_t>(rng.range(1, 12));
    out.records.push_back(make_record(spec, pools, out.catalog, opcodes, slots, i, labels[i], year, month));
  }
  return out;
}

}  // namespace mdbench
