#include "mdbench/feature_store.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mdbench/error.hpp"

namespace mdbench {

using ojson = nlohmann::ordered_json;

std::string_view to_string(Label label) {
  switch (label) {
    case Label::benign: return "benign";
    case Label::malicious: return "malicious";
    case Label::grayware: return "grayware";
    case Label::unknown: return "unknown";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  if (text == "benign") return Label::benign;
  if (text == "malicious") return Label::malicious;
  if (text == "grayware") return Label::grayware;
  if (text == "unknown") return Label::unknown;
  throw Error("unknown label '" + std::string(text) + "'");
}

std::string_view to_string(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::activity: return "activity";
    case ComponentKind::service: return "service";
    case ComponentKind::receiver: return "receiver";
    case ComponentKind::provider: return "provider";
  }
  return "activity";
}

ComponentKind parse_component_kind(std::string_view text) {
  if (text == "activity") return ComponentKind::activity;
  if (text == "service") return ComponentKind::service;
  if (text == "receiver") return ComponentKind::receiver;
  if (text == "provider") return ComponentKind::provider;
  throw Error("unknown component kind '" + std::string(text) + "'");
}

std::int64_t ProgramGraph::next_node_id() const {
  std::int64_t next = 0;
  for (const auto& n : nodes) next = std::max(next, n.node_id + 1);
  return next;
}

// ---------------------------------------------------------------------------
// SensitiveApiCatalog

SensitiveApiCatalog::SensitiveApiCatalog(std::vector<std::string> apis, std::string version)
    : apis_(std::move(apis)), version_(std::move(version)) {
  for (std::size_t i = 0; i < apis_.size(); ++i) {
    if (!index_.emplace(apis_[i], i).second) {
      throw Error("duplicate API in sensitive catalog: " + apis_[i]);
    }
  }
}

bool SensitiveApiCatalog::contains(std::string_view api) const {
  return index_.find(std::string(api)) != index_.end();
}

std::optional<std::size_t> SensitiveApiCatalog::index_of(std::string_view api) const {
  auto it = index_.find(std::string(api));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

SensitiveApiCatalog SensitiveApiCatalog::parse(std::string_view text) {
  std::vector<std::string> apis;
  std::string version;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      std::string body = trim(std::string_view(t).substr(1));
      if (body.rfind("version:", 0) == 0) version = trim(std::string_view(body).substr(8));
      continue;
    }
    auto hash = t.find('#');
    if (hash != std::string::npos) t = trim(std::string_view(t).substr(0, hash));
    if (!t.empty()) apis.push_back(std::move(t));
  }
  return SensitiveApiCatalog(std::move(apis), std::move(version));
}

SensitiveApiCatalog SensitiveApiCatalog::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open sensitive API catalog: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void SensitiveApiCatalog::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write sensitive API catalog: " + path);
  out << "# version: " << version_ << "\n";
  for (const auto& api : apis_) out << api << "\n";
}

// ---------------------------------------------------------------------------
// Validation

bool ValidationResult::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

bool is_valid_utf8(std::string_view text) {
  std::size_t i = 0;
  const auto* s = reinterpret_cast<const unsigned char*>(text.data());
  const std::size_t n = text.size();
  while (i < n) {
    unsigned char c = s[i];
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (s[i + k] & 0x3F);
    }
    // overlong forms, surrogates, out of range
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

namespace {

void add(ValidationResult& r, std::string code, std::string message) {
  r.violations.push_back({std::move(code), std::move(message)});
}

void check_strings(ValidationResult& r, const std::set<std::string>& values, std::string_view field) {
  for (const auto& v : values) {
    if (v.empty()) add(r, "empty_string", std::string(field) + " contains an empty string");
    if (!is_valid_utf8(v)) add(r, "invalid_utf8", std::string(field) + " contains non-UTF-8 text");
  }
}

}  // namespace

ValidationResult validate_record(const FeatureRecord& rec, const SensitiveApiCatalog& catalog,
                                 const ValidationOptions& options) {
  ValidationResult r;
  if (rec.app_id.empty()) add(r, "empty_app_id", "app_id is empty");
  if (!is_valid_utf8(rec.app_id)) add(r, "invalid_utf8", "app_id is not UTF-8");
  if (rec.month < 1 || rec.month > 12) {
    add(r, "month_out_of_range", "month " + std::to_string(rec.month) + " not in 1..12");
  }
  if (options.year_range &&
      (rec.year < options.year_range->first || rec.year > options.year_range->second)) {
    add(r, "year_out_of_range", "year " + std::to_string(rec.year) + " outside corpus range");
  }
  if (rec.size_mb < 0.0) add(r, "negative_size", "size_mb is negative");
  if (rec.vt_positives) {
    const int p = *rec.vt_positives;
    if (p < 0) add(r, "negative_positives", "vt_positives is negative");
    if ((rec.label == Label::malicious) != (p >= 4)) {
      add(r, "label_mismatch", "label malicious must coincide with vt_positives >= 4");
    }
    if ((rec.label == Label::benign) != (p == 0)) {
      add(r, "label_mismatch", "label benign must coincide with vt_positives == 0");
    }
  }

  check_strings(r, rec.manifest.hardware, "hardware");
  check_strings(r, rec.manifest.intents, "intents");
  check_strings(r, rec.manifest.permissions, "permissions");
  check_strings(r, rec.manifest.resources, "resources");
  check_strings(r, rec.code.code_strings, "code_strings");
  for (const auto& c : rec.manifest.components) {
    if (c.name.empty()) add(r, "empty_string", "component with empty name");
    if (!is_valid_utf8(c.name)) add(r, "invalid_utf8", "component name is not UTF-8");
  }
  for (const auto& [api, count] : rec.code.api_calls) {
    if (api.empty()) add(r, "empty_string", "api_calls contains an empty name");
    if (!is_valid_utf8(api)) add(r, "invalid_utf8", "api name is not UTF-8");
    if (count < 1) add(r, "nonpositive_count", "api '" + api + "' has count < 1");
  }
  for (std::size_t i = 0; i < rec.code.opcode_seq.size(); ++i) {
    const auto op = rec.code.opcode_seq[i];
    if (op < 0 || op >= options.opcode_vocab_size) {
      add(r, "opcode_out_of_range",
          "opcode " + std::to_string(op) + " at position " + std::to_string(i) +
              " outside vocabulary of size " + std::to_string(options.opcode_vocab_size));
      break;
    }
  }

  std::unordered_set<std::int64_t> ids;
  for (const auto& node : rec.graph.nodes) {
    if (!ids.insert(node.node_id).second) {
      add(r, "duplicate_node", "duplicate node_id " + std::to_string(node.node_id));
    }
    if (node.api_name && !is_valid_utf8(*node.api_name)) add(r, "invalid_utf8", "node api_name is not UTF-8");
    if (node.sensitive) {
      if (node.kind != NodeKind::external_api) {
        add(r, "sensitive_flag", "sensitive node " + std::to_string(node.node_id) + " is not external_api");
      } else if (!node.api_name || !catalog.contains(*node.api_name)) {
        add(r, "sensitive_flag",
            "sensitive node " + std::to_string(node.node_id) + " not in the sensitive-API catalog");
      }
    }
  }
  for (const auto& [src, dst] : rec.graph.edges) {
    if (!ids.count(src) || !ids.count(dst)) {
      add(r, "dangling_edge",
          "dangling edge (" + std::to_string(src) + "," + std::to_string(dst) + ")");
    }
  }
  return r;
}

ValidationResult validate_corpus(std::span<const FeatureRecord> records, const SensitiveApiCatalog& catalog,
                                 const ValidationOptions& options) {
  ValidationResult all;
  std::unordered_set<std::string> seen;
  for (const auto& rec : records) {
    auto r = validate_record(rec, catalog, options);
    for (auto& v : r.violations) {
      v.message = rec.app_id + ": " + v.message;
      all.violations.push_back(std::move(v));
    }
    if (!seen.insert(rec.app_id).second) {
      add(all, "duplicate_app_id", "duplicate app_id " + rec.app_id);
    }
  }
  return all;
}

// ---------------------------------------------------------------------------
// JSON lines

namespace {

void require_utf8(const std::string& s, const FeatureRecord& rec) {
  if (!is_valid_utf8(s)) throw Error("record '" + rec.app_id + "' holds non-UTF-8 text");
}

ojson string_array(const std::set<std::string>& values, const FeatureRecord& rec) {
  ojson arr = ojson::array();
  for (const auto& v : values) {
    require_utf8(v, rec);
    arr.push_back(v);
  }
  return arr;
}

ojson to_json(const FeatureRecord& rec) {
  require_utf8(rec.app_id, rec);
  ojson j;
  j["v"] = kRecordSchemaVersion;
  j["app_id"] = rec.app_id;
  j["label"] = to_string(rec.label);
  j["vt_positives"] = rec.vt_positives ? ojson(*rec.vt_positives) : ojson(nullptr);
  j["year"] = rec.year;
  j["month"] = rec.month;
  j["size_mb"] = rec.size_mb;

  ojson manifest;
  manifest["hardware"] = string_array(rec.manifest.hardware, rec);
  ojson comps = ojson::array();
  for (const auto& c : rec.manifest.components) {
    require_utf8(c.name, rec);
    ojson cj;
    cj["kind"] = to_string(c.kind);
    cj["name"] = c.name;
    comps.push_back(std::move(cj));
  }
  manifest["components"] = std::move(comps);
  manifest["intents"] = string_array(rec.manifest.intents, rec);
  manifest["permissions"] = string_array(rec.manifest.permissions, rec);
  manifest["resources"] = string_array(rec.manifest.resources, rec);
  j["manifest"] = std::move(manifest);

  ojson code;
  ojson api = ojson::object();
  for (const auto& [name, count] : rec.code.api_calls) {
    require_utf8(name, rec);
    api[name] = count;
  }
  code["api_calls"] = std::move(api);
  code["opcode_seq"] = rec.code.opcode_seq;
  code["code_strings"] = string_array(rec.code.code_strings, rec);
  j["code"] = std::move(code);

  ojson graph;
  ojson nodes = ojson::array();
  for (const auto& n : rec.graph.nodes) {
    ojson nj;
    nj["id"] = n.node_id;
    nj["kind"] = n.kind == NodeKind::internal ? "internal" : "external_api";
    if (n.api_name) {
      require_utf8(*n.api_name, rec);
      nj["api"] = *n.api_name;
    } else {
      nj["api"] = nullptr;
    }
    nj["sensitive"] = n.sensitive;
    nodes.push_back(std::move(nj));
  }
  graph["nodes"] = std::move(nodes);
  ojson edges = ojson::array();
  for (const auto& [s, d] : rec.graph.edges) edges.push_back(ojson::array({s, d}));
  graph["edges"] = std::move(edges);
  j["graph"] = std::move(graph);
  return j;
}

std::set<std::string> read_string_set(const ojson& arr) {
  std::set<std::string> out;
  for (const auto& v : arr) out.insert(v.get<std::string>());
  return out;
}

}  // namespace

std::string record_to_json_line(const FeatureRecord& record) { return to_json(record).dump(); }

FeatureRecord record_from_json_line(std::string_view line, std::size_t line_number) {
  auto fail = [&](const std::string& why) -> ParseError {
    std::string where = line_number ? "line " + std::to_string(line_number) + ": " : "";
    return ParseError(where + why, line_number);
  };
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("malformed JSON: ") + e.what());
  }
  try {
    if (!j.is_object()) throw fail("record is not a JSON object");
    if (j.value("v", 0) != kRecordSchemaVersion) throw fail("unsupported schema version");
    FeatureRecord rec;
    rec.app_id = j.at("app_id").get<std::string>();
    rec.label = parse_label(j.at("label").get<std::string>());
    if (!j.at("vt_positives").is_null()) rec.vt_positives = j.at("vt_positives").get<std::int32_t>();
    rec.year = j.at("year").get<std::int32_t>();
    rec.month = j.at("month").get<std::int32_t>();
    rec.size_mb = j.at("size_mb").get<double>();

    const auto& m = j.at("manifest");
    rec.manifest.hardware = read_string_set(m.at("hardware"));
    for (const auto& c : m.at("components")) {
      rec.manifest.components.insert(
          Component{parse_component_kind(c.at("kind").get<std::string>()), c.at("name").get<std::string>()});
    }
    rec.manifest.intents = read_string_set(m.at("intents"));
    rec.manifest.permissions = read_string_set(m.at("permissions"));
    rec.manifest.resources = read_string_set(m.at("resources"));

    const auto& c = j.at("code");
    for (const auto& [name, count] : c.at("api_calls").items()) {
      rec.code.api_calls[name] = count.get<std::int64_t>();
    }
    rec.code.opcode_seq = c.at("opcode_seq").get<std::vector<std::int32_t>>();
    rec.code.code_strings = read_string_set(c.at("code_strings"));

    const auto& g = j.at("graph");
    for (const auto& n : g.at("nodes")) {
      GraphNode node;
      node.node_id = n.at("id").get<std::int64_t>();
      const auto kind = n.at("kind").get<std::string>();
      if (kind == "internal") {
        node.kind = NodeKind::internal;
      } else if (kind == "external_api") {
        node.kind = NodeKind::external_api;
      } else {
        throw fail("unknown node kind '" + kind + "'");
      }
      if (!n.at("api").is_null()) node.api_name = n.at("api").get<std::string>();
      node.sensitive = n.at("sensitive").get<bool>();
      rec.graph.nodes.push_back(std::move(node));
    }
    for (const auto& e : g.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw fail("edge is not a pair");
      rec.graph.edges.emplace_back(e[0].get<std::int64_t>(), e[1].get<std::int64_t>());
    }
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("schema error: ") + e.what());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw fail(e.what());
  }
}

void write_records(std::span<const FeatureRecord> records, const std::string& path) {
  // Serialize everything first so an invalid record leaves no partial file.
  std::string buffer;
  for (const auto& rec : records) {
    buffer += record_to_json_line(rec);
    buffer += '\n';
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write records to " + path);
  out << buffer;
  if (!out) throw Error("write failed: " + path);
}

std::vector<FeatureRecord> read_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open records file: " + path);
  std::vector<FeatureRecord> out;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(record_from_json_line(line, line_number));
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), line_number);
    }
  }
  return out;
}

std::vector<FeatureRecord> query(std::span<const FeatureRecord> records, const RecordFilter& filter) {
  if (filter.years && filter.years->first > filter.years->second) throw Error("inverted year range");
  if (filter.months && filter.months->first > filter.months->second) throw Error("inverted month range");
  std::vector<FeatureRecord> out;
  for (const auto& rec : records) {
    if (filter.years && (rec.year < filter.years->first || rec.year > filter.years->second)) continue;
    if (filter.months && (rec.month < filter.months->first || rec.month > filter.months->second)) continue;
    if (filter.label && rec.label != *filter.label) continue;
    out.push_back(rec);
  }
  return out;
}

}  // namespace mdbench
