#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mdbench/record.hpp"

namespace mdbench::graph {

// Simple undirected projection: distinct neighbors, self-loops dropped.
// Positions follow the order of ProgramGraph::nodes.
struct UndirectedView {
  std::vector<std::int64_t> ids;
  std::unordered_map<std::int64_t, std::size_t> position;
  std::vector<std::vector<std::size_t>> adjacency;  // sorted

  std::size_t size() const { return ids.size(); }
  bool adjacent(std::size_t a, std::size_t b) const;
};

UndirectedView undirected_projection(const ProgramGraph& g);

bool is_sensitive(const GraphNode& node, const SensitiveApiCatalog& catalog);

using CentralityMap = std::map<std::int64_t, double>;

enum class CentralityKind { degree, harmonic, katz };
std::string_view to_string(CentralityKind kind);
CentralityKind parse_centrality(std::string_view text);

// degree / (n-1); single-node graphs give 0.
CentralityMap degree_centrality(const ProgramGraph& g);
// (sum over v != u of 1/d(u,v)) / (n-1); unreachable pairs add 0.
CentralityMap harmonic_centrality(const ProgramGraph& g);
// Fixed point of x = alpha*A^T x + 1, L2-normalised. Throws Error when the
// iteration has not converged within max_iter (alpha too large).
CentralityMap katz_centrality(const ProgramGraph& g, double alpha = 0.1, int max_iter = 1000, double tol = 1e-12);
CentralityMap centrality(const ProgramGraph& g, CentralityKind kind);

struct TriadCounts {
  std::int64_t closed = 0;
  std::int64_t open = 0;

  bool operator==(const TriadCounts&) const = default;
};

// Connected 3-node subsets of the undirected projection that hold at least one
// sensitive node: triangles (closed) and 2-paths without the closing edge (open).
TriadCounts count_sensitive_triads(const ProgramGraph& g, const SensitiveApiCatalog& catalog);

struct Subgraph {
  ProgramGraph graph;                    // dense ids 0..m-1
  std::vector<std::int64_t> original_ids;  // new id -> original id
};

// Induced subgraph on nodes within undirected distance <= k of root.
// Throws Error when root is not a node of g.
Subgraph khop_subgraph(const ProgramGraph& g, std::int64_t root, int k);

// Depth-first root-to-leaf walks starting at zero-in-degree nodes (every node
// when there are none), emitting the API names of external nodes in visit
// order. Walks stop at max_len tokens; at most max_paths non-empty sequences
// are returned. Child and root order are shuffled under `seed`.
std::vector<std::vector<std::string>> dfs_api_sequences(const ProgramGraph& g, std::size_t max_len,
                                                        std::size_t max_paths, std::uint64_t seed);

// API-name -> family abstraction. Rules are prefix matches tried in order;
// names with a one-character package segment map to "obfuscated", anything
// else (including internal methods) to "self-defined".
class FamilyAbstraction {
 public:
  FamilyAbstraction(std::vector<std::string> families, std::vector<std::pair<std::string, std::string>> rules);
  static const FamilyAbstraction& default_families();

  const std::vector<std::string>& families() const { return families_; }
  std::size_t size() const { return families_.size(); }
  std::size_t family_index(const std::optional<std::string>& api_name) const;
  const std::string& family_of(const std::optional<std::string>& api_name) const {
    return families_[family_index(api_name)];
  }

 private:
  std::vector<std::string> families_;
  std::vector<std::pair<std::string, std::size_t>> rules_;
  std::size_t self_defined_;
  std::size_t obfuscated_;
};

struct TransitionMatrix {
  std::vector<std::string> families;
  std::vector<double> matrix;  // row-major |F| x |F|

  double at(std::size_t from, std::size_t to) const { return matrix[from * families.size() + to]; }
};

// Row-normalised family-to-family call counts; rows without calls stay zero.
TransitionMatrix family_transition(const ProgramGraph& g, const FamilyAbstraction& abstraction);

struct CommunityResult {
  std::vector<std::int64_t> node_ids;                  // graph order
  std::vector<std::size_t> community;                  // per node, dense ids
  std::vector<std::vector<std::int64_t>> members;      // per community
  std::vector<double> homophily;                       // per community
  std::optional<std::size_t> suspicious;               // none when no sensitive node
};

// Label-propagation communities (deterministic under seed) with per-community
// homophily = share of internal edges whose endpoints agree on the sensitive
// flag (1.0 for edgeless communities). The suspicious community is the least
// homophilous one holding a sensitive node; ties go to the larger community.
CommunityResult community_homophily(const ProgramGraph& g, const SensitiveApiCatalog& catalog,
                                    std::uint64_t seed = 0);

// Induced subgraph on a set of node ids, ids preserved.
ProgramGraph induced_subgraph(const ProgramGraph& g, const std::vector<std::int64_t>& node_ids);

}  // namespace mdbench::graph
