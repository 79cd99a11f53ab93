#pragma once

// Hand-rolled generators and brute-force oracles shared by the unit tests
// and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mdbench/record.hpp"

namespace testsupport {

using mdbench::Edge;
using mdbench::FeatureRecord;
using mdbench::GraphNode;
using mdbench::Label;
using mdbench::NodeKind;
using mdbench::ProgramGraph;
using mdbench::SensitiveApiCatalog;

inline const std::vector<std::string>& api_pool() {
  static const std::vector<std::string> pool = {
      "android.telephony.SmsManager.sendTextMessage", "android.location.LocationManager.getLastKnownLocation",
      "java.net.URL.openConnection",                  "java.io.File.delete",
      "android.app.ActivityManager.getRunningTasks",  "javax.crypto.Cipher.init",
      "org.json.JSONObject.put",                      "android.telephony.TelephonyManager.getDeviceId",
      "java.lang.Runtime.exec",                       "android.content.pm.PackageManager.getInstalledPackages",
      "org.apache.http.client.HttpClient.execute",    "android.net.wifi.WifiManager.getScanResults"};
  return pool;
}

// The first half of the pool is security-relevant.
inline SensitiveApiCatalog test_catalog() {
  const auto& p = api_pool();
  return SensitiveApiCatalog(std::vector<std::string>(p.begin(), p.begin() + 6), "test-1");
}

// Random program graph: n nodes with shuffled, non-contiguous ids, roughly
// `density` edge probability, occasional duplicate edges and self-loops, and
// external nodes named from api_pool() (each name used at most once).
inline ProgramGraph random_graph(std::mt19937_64& rng, std::size_t n, double density) {
  ProgramGraph g;
  std::vector<std::int64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int64_t>(3 * i + 7);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::size_t> names(api_pool().size());
  for (std::size_t i = 0; i < names.size(); ++i) names[i] = i;
  std::shuffle(names.begin(), names.end(), rng);
  std::size_t next_name = 0;
  const auto catalog = test_catalog();
  for (std::size_t i = 0; i < n; ++i) {
    GraphNode node{ids[i], NodeKind::internal, std::nullopt, false};
    if (u(rng) < 0.35 && next_name < names.size()) {
      node.kind = NodeKind::external_api;
      node.api_name = api_pool()[names[next_name++]];
      node.sensitive = catalog.contains(*node.api_name);
    }
    g.nodes.push_back(node);
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) {
        if (u(rng) < 0.02) g.edges.emplace_back(ids[a], ids[a]);
        continue;
      }
      if (u(rng) < density) {
        g.edges.emplace_back(ids[a], ids[b]);
        if (u(rng) < 0.1) g.edges.emplace_back(ids[a], ids[b]);
      }
    }
  }
  std::shuffle(g.edges.begin(), g.edges.end(), rng);
  return g;
}

// Simple undirected 0/1 adjacency in node order.
inline std::vector<std::vector<int>> adjacency_matrix(const ProgramGraph& g) {
  const std::size_t n = g.nodes.size();
  std::map<std::int64_t, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) pos[g.nodes[i].node_id] = i;
  std::vector<std::vector<int>> a(n, std::vector<int>(n, 0));
  for (const auto& [x, y] : g.edges) {
    const auto i = pos.at(x), j = pos.at(y);
    if (i == j) continue;
    a[i][j] = a[j][i] = 1;
  }
  return a;
}

inline std::vector<double> brute_degree(const ProgramGraph& g) {
  const auto a = adjacency_matrix(g);
  const std::size_t n = a.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n && n > 1; ++i) {
    int d = 0;
    for (std::size_t j = 0; j < n; ++j) d += a[i][j];
    out[i] = static_cast<double>(d) / static_cast<double>(n - 1);
  }
  return out;
}

inline std::vector<double> brute_harmonic(const ProgramGraph& g) {
  const auto a = adjacency_matrix(g);
  const std::size_t n = a.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t s = 0; s < n && n > 1; ++s) {
    std::vector<int> dist(n, -1);
    dist[s] = 0;
    std::deque<std::size_t> q{s};
    while (!q.empty()) {
      const auto x = q.front();
      q.pop_front();
      for (std::size_t y = 0; y < n; ++y) {
        if (a[x][y] && dist[y] < 0) {
          dist[y] = dist[x] + 1;
          q.push_back(y);
        }
      }
    }
    std::vector<std::size_t> at_distance(n + 1, 0);
    for (std::size_t t = 0; t < n; ++t) {
      if (t != s && dist[t] > 0) ++at_distance[static_cast<std::size_t>(dist[t])];
    }
    double sum = 0.0;
    for (std::size_t d = 1; d <= n; ++d) sum += static_cast<double>(at_distance[d]) / static_cast<double>(d);
    out[s] = sum / static_cast<double>(n - 1);
  }
  return out;
}

struct BruteTriads {
  std::int64_t closed = 0;
  std::int64_t open = 0;
};

inline BruteTriads brute_triads(const ProgramGraph& g, const SensitiveApiCatalog& catalog) {
  const auto a = adjacency_matrix(g);
  const std::size_t n = a.size();
  std::vector<bool> sens(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& node = g.nodes[i];
    sens[i] = node.sensitive || (node.kind == NodeKind::external_api && node.api_name && catalog.contains(*node.api_name));
  }
  BruteTriads t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        if (!(sens[i] || sens[j] || sens[k])) continue;
        const int edges = a[i][j] + a[j][k] + a[i][k];
        if (edges == 3) ++t.closed;
        if (edges == 2) ++t.open;
      }
    }
  }
  return t;
}

// Minimal valid record with the given features; the graph gets one internal
// caller per API call.
inline FeatureRecord make_record(const std::string& id, Label label, std::int32_t year,
                                 const std::set<std::string>& permissions, const std::map<std::string, std::int64_t>& apis,
                                 std::vector<std::int32_t> opcodes = {}, const SensitiveApiCatalog* catalog = nullptr) {
  FeatureRecord r;
  r.app_id = id;
  r.label = label;
  r.vt_positives = label == Label::malicious ? 10 : 0;
  r.year = year;
  r.month = 1;
  r.manifest.permissions = permissions;
  r.code.opcode_seq = std::move(opcodes);
  r.graph.nodes.push_back({0, NodeKind::internal, std::nullopt, false});
  std::int64_t next = 1;
  for (const auto& [api, count] : apis) {
    r.code.api_calls[api] = count;
    const bool sensitive = catalog && catalog->contains(api);
    r.graph.nodes.push_back({next, NodeKind::external_api, api, sensitive});
    r.graph.edges.emplace_back(0, next);
    ++next;
  }
  return r;
}

}  // namespace testsupport
