#include "mdbench/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <unordered_set>

#include "mdbench/error.hpp"
#include "mdbench/rng.hpp"

namespace mdbench::graph {

bool UndirectedView::adjacent(std::size_t a, std::size_t b) const {
  const auto& n = adjacency[a];
  return std::binary_search(n.begin(), n.end(), b);
}

UndirectedView undirected_projection(const ProgramGraph& g) {
  UndirectedView v;
  v.ids.reserve(g.nodes.size());
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    v.ids.push_back(g.nodes[i].node_id);
    v.position.emplace(g.nodes[i].node_id, i);
  }
  v.adjacency.resize(g.nodes.size());
  for (const auto& [s, d] : g.edges) {
    auto a = v.position.find(s);
    auto b = v.position.find(d);
    if (a == v.position.end() || b == v.position.end() || a->second == b->second) continue;
    v.adjacency[a->second].push_back(b->second);
    v.adjacency[b->second].push_back(a->second);
  }
  for (auto& n : v.adjacency) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return v;
}

bool is_sensitive(const GraphNode& node, const SensitiveApiCatalog& catalog) {
  if (node.sensitive) return true;
  return node.kind == NodeKind::external_api && node.api_name && catalog.contains(*node.api_name);
}

std::string_view to_string(CentralityKind kind) {
  switch (kind) {
    case CentralityKind::degree: return "degree";
    case CentralityKind::harmonic: return "harmonic";
    case CentralityKind::katz: return "katz";
  }
  return "degree";
}

CentralityKind parse_centrality(std::string_view text) {
  if (text == "degree") return CentralityKind::degree;
  if (text == "harmonic") return CentralityKind::harmonic;
  if (text == "katz") return CentralityKind::katz;
  throw Error("unknown centrality '" + std::string(text) + "' (expected degree, harmonic, katz)");
}

CentralityMap degree_centrality(const ProgramGraph& g) {
  const auto v = undirected_projection(g);
  CentralityMap out;
  const double denom = v.size() > 1 ? static_cast<double>(v.size() - 1) : 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[v.ids[i]] = denom > 0 ? static_cast<double>(v.adjacency[i].size()) / denom : 0.0;
  }
  return out;
}

CentralityMap harmonic_centrality(const ProgramGraph& g) {
  const auto v = undirected_projection(g);
  const std::size_t n = v.size();
  CentralityMap out;
  std::vector<std::int64_t> dist(n);
  std::vector<std::size_t> at_distance(n + 1);
  std::deque<std::size_t> queue;
  for (std::size_t src = 0; src < n; ++src) {
    std::fill(dist.begin(), dist.end(), -1);
    std::fill(at_distance.begin(), at_distance.end(), 0);
    dist[src] = 0;
    queue.assign(1, src);
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop_front();
      for (auto w : v.adjacency[u]) {
        if (dist[w] >= 0) continue;
        dist[w] = dist[u] + 1;
        ++at_distance[static_cast<std::size_t>(dist[w])];
        queue.push_back(w);
      }
    }
    double sum = 0.0;
    for (std::size_t d = 1; d <= n; ++d) sum += static_cast<double>(at_distance[d]) / static_cast<double>(d);
    out[v.ids[src]] = n > 1 ? sum / static_cast<double>(n - 1) : 0.0;
  }
  return out;
}

CentralityMap katz_centrality(const ProgramGraph& g, double alpha, int max_iter, double tol) {
  const auto v = undirected_projection(g);
  const std::size_t n = v.size();
  CentralityMap out;
  if (n == 0) return out;
  std::vector<double> x(n, 1.0), next(n);
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    double change = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (auto j : v.adjacency[i]) acc += x[j];
      next[i] = alpha * acc + 1.0;
      change = std::max(change, std::abs(next[i] - x[i]));
    }
    x.swap(next);
    if (!std::isfinite(change)) break;
    if (change < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error("katz centrality did not converge; alpha must be below 1/spectral radius");
  double norm = 0.0;
  for (double xi : x) norm += xi * xi;
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < n; ++i) out[v.ids[i]] = x[i] / norm;
  return out;
}

CentralityMap centrality(const ProgramGraph& g, CentralityKind kind) {
  switch (kind) {
    case CentralityKind::degree: return degree_centrality(g);
    case CentralityKind::harmonic: return harmonic_centrality(g);
    case CentralityKind::katz: return katz_centrality(g);
  }
  return degree_centrality(g);
}

TriadCounts count_sensitive_triads(const ProgramGraph& g, const SensitiveApiCatalog& catalog) {
  const auto v = undirected_projection(g);
  std::vector<char> sens(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sens[i] = is_sensitive(g.nodes[i], catalog);
  TriadCounts out;
  for (std::size_t c = 0; c < v.size(); ++c) {
    const auto& nb = v.adjacency[c];
    for (std::size_t x = 0; x < nb.size(); ++x) {
      for (std::size_t y = x + 1; y < nb.size(); ++y) {
        const auto a = nb[x], b = nb[y];
        const bool any = sens[a] || sens[b] || sens[c];
        if (!any) continue;
        if (v.adjacent(a, b)) {
          // each triangle is seen from all three centers; count it at the smallest
          if (c < a && c < b) ++out.closed;
        } else {
          ++out.open;
        }
      }
    }
  }
  return out;
}

ProgramGraph induced_subgraph(const ProgramGraph& g, const std::vector<std::int64_t>& node_ids) {
  std::unordered_set<std::int64_t> keep(node_ids.begin(), node_ids.end());
  ProgramGraph out;
  for (const auto& n : g.nodes) {
    if (keep.count(n.node_id)) out.nodes.push_back(n);
  }
  for (const auto& e : g.edges) {
    if (keep.count(e.first) && keep.count(e.second)) out.edges.push_back(e);
  }
  return out;
}

Subgraph khop_subgraph(const ProgramGraph& g, std::int64_t root, int k) {
  if (k < 0) throw Error("k must be non-negative");
  const auto v = undirected_projection(g);
  auto it = v.position.find(root);
  if (it == v.position.end()) throw Error("root node " + std::to_string(root) + " not in graph");
  std::vector<int> dist(v.size(), -1);
  dist[it->second] = 0;
  std::deque<std::size_t> queue{it->second};
  while (!queue.empty()) {
    const auto u = queue.front();
    queue.pop_front();
    if (dist[u] == k) continue;
    for (auto w : v.adjacency[u]) {
      if (dist[w] >= 0) continue;
      dist[w] = dist[u] + 1;
      queue.push_back(w);
    }
  }
  Subgraph out;
  std::unordered_map<std::int64_t, std::int64_t> remap;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (dist[i] < 0) continue;
    GraphNode node = g.nodes[i];
    const auto new_id = static_cast<std::int64_t>(out.original_ids.size());
    remap.emplace(node.node_id, new_id);
    out.original_ids.push_back(node.node_id);
    node.node_id = new_id;
    out.graph.nodes.push_back(std::move(node));
  }
  for (const auto& [s, d] : g.edges) {
    auto a = remap.find(s);
    auto b = remap.find(d);
    if (a != remap.end() && b != remap.end()) out.graph.edges.emplace_back(a->second, b->second);
  }
  return out;
}

namespace {

struct PathWalker {
  const ProgramGraph& g;
  const std::vector<std::vector<std::size_t>>& succ;
  std::size_t max_len;
  std::size_t max_paths;
  std::size_t budget;  // node expansions, bounds work on dense graphs
  std::vector<char> on_path;
  std::vector<std::string> tokens;
  std::vector<std::vector<std::string>> out;

  void emit() {
    if (!tokens.empty() && out.size() < max_paths) out.push_back(tokens);
  }

  void walk(std::size_t u) {
    if (out.size() >= max_paths || budget == 0) return;
    --budget;
    on_path[u] = 1;
    const auto& node = g.nodes[u];
    bool pushed = false;
    if (node.kind == NodeKind::external_api && node.api_name) {
      tokens.push_back(*node.api_name);
      pushed = true;
    }
    bool extended = false;
    if (tokens.size() < max_len) {
      for (auto w : succ[u]) {
        if (on_path[w]) continue;
        extended = true;
        walk(w);
        if (out.size() >= max_paths || budget == 0) break;
      }
    }
    if (!extended) emit();
    if (pushed) tokens.pop_back();
    on_path[u] = 0;
  }
};

}  // namespace

std::vector<std::vector<std::string>> dfs_api_sequences(const ProgramGraph& g, std::size_t max_len,
                                                        std::size_t max_paths, std::uint64_t seed) {
  if (max_len < 1 || max_paths < 1) throw Error("max_len and max_paths must be >= 1");
  const std::size_t n = g.nodes.size();
  std::unordered_map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos.emplace(g.nodes[i].node_id, i);
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<std::size_t> indeg(n, 0);
  for (const auto& [s, d] : g.edges) {
    auto a = pos.find(s);
    auto b = pos.find(d);
    if (a == pos.end() || b == pos.end()) continue;
    succ[a->second].push_back(b->second);
  }
  for (auto& s : succ) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    for (auto w : s) ++indeg[w];
  }
  // self-loops do not make a node non-root
  for (std::size_t i = 0; i < n; ++i) {
    if (std::binary_search(succ[i].begin(), succ[i].end(), i)) --indeg[i];
  }
  Rng rng(seed);
  for (auto& s : succ) rng.shuffle(s);
  std::vector<std::size_t> roots;
  for (std::size_t i = 0; i < n; ++i) {
    if (indeg[i] == 0) roots.push_back(i);
  }
  if (roots.empty()) {
    roots.resize(n);
    std::iota(roots.begin(), roots.end(), std::size_t{0});
  }
  rng.shuffle(roots);

  PathWalker walker{g, succ, max_len, max_paths, 64 * max_paths * (max_len + 1) + 4 * n, std::vector<char>(n, 0), {}, {}};
  for (auto r : roots) {
    if (walker.out.size() >= max_paths || walker.budget == 0) break;
    walker.walk(r);
  }
  return std::move(walker.out);
}

FamilyAbstraction::FamilyAbstraction(std::vector<std::string> families,
                                     std::vector<std::pair<std::string, std::string>> rules)
    : families_(std::move(families)) {
  auto find = [&](const std::string& name) -> std::size_t {
    auto it = std::find(families_.begin(), families_.end(), name);
    if (it == families_.end()) throw Error("family '" + name + "' not in family list");
    return static_cast<std::size_t>(it - families_.begin());
  };
  self_defined_ = find("self-defined");
  obfuscated_ = find("obfuscated");
  for (auto& [prefix, fam] : rules) rules_.emplace_back(prefix, find(fam));
}

const FamilyAbstraction& FamilyAbstraction::default_families() {
  static const FamilyAbstraction instance(
      {"android", "java", "javax", "google", "apache", "json", "dom", "sax", "xml", "junit", "self-defined",
       "obfuscated"},
      {{"android.", "android"},
       {"java.", "java"},
       {"javax.", "javax"},
       {"com.google.", "google"},
       {"org.apache.", "apache"},
       {"org.json.", "json"},
       {"org.w3c.dom.", "dom"},
       {"org.xml.sax.", "sax"},
       {"org.xmlpull.", "xml"},
       {"org.xml.", "xml"},
       {"junit.", "junit"}});
  return instance;
}

std::size_t FamilyAbstraction::family_index(const std::optional<std::string>& api_name) const {
  if (!api_name) return self_defined_;
  const std::string& name = *api_name;
  for (const auto& [prefix, fam] : rules_) {
    if (name.rfind(prefix, 0) == 0) return fam;
  }
  // package segments: everything before the method name
  std::size_t start = 0;
  const auto last_dot = name.rfind('.');
  if (last_dot != std::string::npos) {
    while (start < last_dot) {
      auto dot = name.find('.', start);
      if (dot == std::string::npos || dot > last_dot) dot = last_dot;
      if (dot - start == 1) return obfuscated_;
      start = dot + 1;
    }
  }
  return self_defined_;
}

TransitionMatrix family_transition(const ProgramGraph& g, const FamilyAbstraction& abstraction) {
  const std::size_t F = abstraction.size();
  TransitionMatrix t;
  t.families = abstraction.families();
  t.matrix.assign(F * F, 0.0);
  std::unordered_map<std::int64_t, std::size_t> fam;
  for (const auto& n : g.nodes) fam.emplace(n.node_id, abstraction.family_index(n.api_name));
  std::vector<double> counts(F * F, 0.0);
  for (const auto& [s, d] : g.edges) {
    auto a = fam.find(s);
    auto b = fam.find(d);
    if (a == fam.end() || b == fam.end()) continue;
    counts[a->second * F + b->second] += 1.0;
  }
  for (std::size_t r = 0; r < F; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < F; ++c) total += counts[r * F + c];
    if (total == 0.0) continue;
    for (std::size_t c = 0; c < F; ++c) t.matrix[r * F + c] = counts[r * F + c] / total;
  }
  return t;
}

CommunityResult community_homophily(const ProgramGraph& g, const SensitiveApiCatalog& catalog, std::uint64_t seed) {
  const auto v = undirected_projection(g);
  const std::size_t n = v.size();
  CommunityResult out;
  out.node_ids = v.ids;
  if (n == 0) return out;

  std::vector<std::size_t> label(n);
  std::iota(label.begin(), label.end(), std::size_t{0});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  std::unordered_map<std::size_t, std::size_t> tally;
  for (int iter = 0; iter < 100; ++iter) {
    rng.shuffle(order);
    bool changed = false;
    for (auto u : order) {
      if (v.adjacency[u].empty()) continue;
      tally.clear();
      for (auto w : v.adjacency[u]) ++tally[label[w]];
      std::size_t best_count = 0;
      for (const auto& [lab, c] : tally) best_count = std::max(best_count, c);
      std::size_t chosen = SIZE_MAX;
      auto cur = tally.find(label[u]);
      if (cur != tally.end() && cur->second == best_count) {
        chosen = label[u];
      } else {
        for (const auto& [lab, c] : tally) {
          if (c == best_count) chosen = std::min(chosen, lab);
        }
      }
      if (chosen != label[u]) {
        label[u] = chosen;
        changed = true;
      }
    }
    if (!changed) break;
  }

  // dense community ids by first appearance in graph order
  std::unordered_map<std::size_t, std::size_t> dense;
  out.community.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = dense.emplace(label[i], dense.size());
    out.community[i] = it->second;
  }
  const std::size_t C = dense.size();
  out.members.assign(C, {});
  for (std::size_t i = 0; i < n; ++i) out.members[out.community[i]].push_back(v.ids[i]);

  std::vector<char> sens(n);
  for (std::size_t i = 0; i < n; ++i) sens[i] = is_sensitive(g.nodes[i], catalog);
  std::vector<std::size_t> internal(C, 0), agreeing(C, 0);
  std::vector<char> has_sensitive(C, 0);
  for (std::size_t u = 0; u < n; ++u) {
    if (sens[u]) has_sensitive[out.community[u]] = 1;
    for (auto w : v.adjacency[u]) {
      if (w <= u || out.community[w] != out.community[u]) continue;
      ++internal[out.community[u]];
      if (sens[u] == sens[w]) ++agreeing[out.community[u]];
    }
  }
  out.homophily.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    out.homophily[c] = internal[c] ? static_cast<double>(agreeing[c]) / static_cast<double>(internal[c]) : 1.0;
  }
  for (std::size_t c = 0; c < C; ++c) {
    if (!has_sensitive[c]) continue;
    if (!out.suspicious) {
      out.suspicious = c;
      continue;
    }
    const auto s = *out.suspicious;
    if (out.homophily[c] < out.homophily[s] ||
        (out.homophily[c] == out.homophily[s] && out.members[c].size() > out.members[s].size())) {
      out.suspicious = c;
    }
  }
  return out;
}

}  // namespace mdbench::graph
