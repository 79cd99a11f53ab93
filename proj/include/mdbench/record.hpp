#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mdbench {

enum class Label { benign, malicious, grayware, unknown };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

enum class ComponentKind { activity, service, receiver, provider };

std::string_view to_string(ComponentKind kind);
ComponentKind parse_component_kind(std::string_view text);

struct Component {
  ComponentKind kind = ComponentKind::activity;
  std::string name;

  auto operator<=>(const Component&) const = default;
};

struct ManifestFeatures {
  std::set<std::string> hardware;
  std::set<Component> components;
  std::set<std::string> intents;
  std::set<std::string> permissions;
  std::set<std::string> resources;

  bool operator==(const ManifestFeatures&) const = default;
};

// Code-string prefixes used by the synthetic generator and the obfuscation
// transforms: identifier-derived strings and resource references.
inline constexpr std::string_view kIdentifierStringPrefix = "id:";
inline constexpr std::string_view kResourceStringPrefix = "res:";

struct CodeFeatures {
  std::map<std::string, std::int64_t> api_calls;  // api name -> occurrences
  std::vector<std::int32_t> opcode_seq;
  std::set<std::string> code_strings;

  bool operator==(const CodeFeatures&) const = default;
};

enum class NodeKind { internal, external_api };

struct GraphNode {
  std::int64_t node_id = 0;
  NodeKind kind = NodeKind::internal;
  std::optional<std::string> api_name;
  bool sensitive = false;

  bool operator==(const GraphNode&) const = default;
};

using Edge = std::pair<std::int64_t, std::int64_t>;

// Directed method-call graph: nodes are methods, edges are invocations.
struct ProgramGraph {
  std::vector<GraphNode> nodes;
  std::vector<Edge> edges;

  bool operator==(const ProgramGraph&) const = default;

  std::int64_t next_node_id() const;
};

struct FeatureRecord {
  std::string app_id;
  Label label = Label::unknown;
  std::optional<std::int32_t> vt_positives;
  std::int32_t year = 2011;
  std::int32_t month = 1;
  double size_mb = 0.0;
  ManifestFeatures manifest;
  CodeFeatures code;
  ProgramGraph graph;

  bool operator==(const FeatureRecord&) const = default;

  // Months since year 0, for ordering and bucketing.
  std::int32_t month_index() const { return year * 12 + (month - 1); }
};

// Ordered, versioned list of security-relevant API names. The order fixes the
// feature index of centrality and presence vectors.
class SensitiveApiCatalog {
 public:
  SensitiveApiCatalog() = default;
  SensitiveApiCatalog(std::vector<std::string> apis, std::string version);

  const std::vector<std::string>& apis() const { return apis_; }
  const std::string& version() const { return version_; }
  std::size_t size() const { return apis_.size(); }
  bool contains(std::string_view api) const;
  std::optional<std::size_t> index_of(std::string_view api) const;

  // One API per line; `#` starts a comment; `# version: <tag>` sets the tag.
  static SensitiveApiCatalog load(const std::string& path);
  static SensitiveApiCatalog parse(std::string_view text);
  void save(const std::string& path) const;

 private:
  std::vector<std::string> apis_;
  std::string version_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace mdbench
