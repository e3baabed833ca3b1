#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "congestsim/bits.hpp"

namespace congestsim {

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable simple undirected graph with dense vertex IDs 0..n-1.
/// Neighbor lists are sorted ascending; max_degree is global knowledge.
class Graph {
 public:
  static Graph from_edges(int n, std::vector<std::pair<int, int>> edges) {
    if (n < 1) throw GraphError("graph needs at least one vertex");
    std::vector<std::vector<int>> adj(n);
    std::set<std::pair<int, int>> seen;
    for (auto [u, v] : edges) {
      if (u < 0 || v < 0 || u >= n || v >= n) throw GraphError("vertex ID out of range");
      if (u == v) throw GraphError("self-loop");
      auto key = std::minmax(u, v);
      if (!seen.insert({key.first, key.second}).second) throw GraphError("duplicate edge");
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    for (auto& lst : adj) std::sort(lst.begin(), lst.end());
    return Graph(std::move(adj));
  }

  int n() const { return static_cast<int>(adj_.size()); }
  int max_degree() const { return max_degree_; }
  int degree(int v) const { return static_cast<int>(adj_[v].size()); }
  const std::vector<int>& neighbors(int v) const { return adj_[v]; }

  bool has_edge(int u, int v) const {
    return std::binary_search(adj_[u].begin(), adj_[u].end(), v);
  }

  std::size_t edge_count() const {
    std::size_t m = 0;
    for (auto& lst : adj_) m += lst.size();
    return m / 2;
  }

  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int u = 0; u < n(); ++u)
      for (int v : adj_[u])
        if (u < v) out.push_back({u, v});
    return out;
  }

 private:
  explicit Graph(std::vector<std::vector<int>> adj) : adj_(std::move(adj)) {
    for (auto& lst : adj_) max_degree_ = std::max(max_degree_, static_cast<int>(lst.size()));
  }

  std::vector<std::vector<int>> adj_;
  int max_degree_ = 0;
};

// ---------------------------------------------------------------------------
// generators

enum class GraphModel { gnp, random_regularish, path, cycle, star, tree };

inline std::optional<GraphModel> parse_graph_model(const std::string& s) {
  if (s == "gnp") return GraphModel::gnp;
  if (s == "random_regularish") return GraphModel::random_regularish;
  if (s == "path") return GraphModel::path;
  if (s == "cycle") return GraphModel::cycle;
  if (s == "star") return GraphModel::star;
  if (s == "tree") return GraphModel::tree;
  return std::nullopt;
}

namespace detail {
inline std::uint64_t rng_below(std::mt19937_64& rng, std::uint64_t bound) {
  return bound == 0 ? 0 : rng() % bound;
}
}  // namespace detail

/// Deterministic generator for a fixed (model, n, deg, seed).
/// Random models reject edges that would push a degree past `deg`.
inline Graph gen_graph(GraphModel model, int n, int deg, std::uint64_t seed) {
  if (n < 1) throw GraphError("n must be >= 1");
  if (deg < 0) throw GraphError("deg must be >= 0");
  if (deg >= n) throw GraphError("deg must be < n");
  std::mt19937_64 rng(seed);
  std::vector<std::pair<int, int>> edges;
  switch (model) {
    case GraphModel::path:
      for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
      break;
    case GraphModel::cycle:
      if (n < 3) throw GraphError("cycle needs n >= 3");
      for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1});
      edges.push_back({0, n - 1});
      break;
    case GraphModel::star:
      for (int i = 1; i < n; ++i) edges.push_back({0, i});
      break;
    case GraphModel::tree: {
      if (n > 1 && deg < 1) throw GraphError("tree needs deg >= 1");
      std::vector<int> degree(n, 0);
      for (int i = 1; i < n; ++i) {
        int p = -1;
        for (int attempt = 0; attempt < 4 * n; ++attempt) {
          int c = static_cast<int>(detail::rng_below(rng, i));
          if (degree[c] < deg) {
            p = c;
            break;
          }
        }
        if (p < 0) {
          for (int c = i - 1; c >= 0; --c)
            if (degree[c] < deg) {
              p = c;
              break;
            }
        }
        if (p < 0) throw GraphError("tree generation ran out of degree capacity");
        edges.push_back({p, i});
        ++degree[p];
        ++degree[i];
      }
      break;
    }
    case GraphModel::gnp: {
      std::vector<int> degree(n, 0);
      std::vector<std::pair<int, int>> pairs;
      for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v) pairs.push_back({u, v});
      // Fisher-Yates with the seeded rng keeps the edge set reproducible.
      for (std::size_t i = pairs.size(); i > 1; --i)
        std::swap(pairs[i - 1], pairs[detail::rng_below(rng, i)]);
      const std::uint64_t den = 2 * std::uint64_t(n - 1);
      for (auto [u, v] : pairs) {
        if (detail::rng_below(rng, den) < static_cast<std::uint64_t>(deg)) {
          if (degree[u] < deg && degree[v] < deg) {
            edges.push_back({u, v});
            ++degree[u];
            ++degree[v];
          }
        }
      }
      break;
    }
    case GraphModel::random_regularish: {
      std::vector<int> degree(n, 0);
      std::set<std::pair<int, int>> have;
      std::uint64_t attempts = std::uint64_t(n) * std::max(deg, 1) * 20;
      for (std::uint64_t a = 0; a < attempts; ++a) {
        int u = static_cast<int>(detail::rng_below(rng, n));
        int v = static_cast<int>(detail::rng_below(rng, n));
        if (u == v) continue;
        if (degree[u] >= deg || degree[v] >= deg) continue;
        auto key = std::minmax(u, v);
        if (!have.insert({key.first, key.second}).second) continue;
        edges.push_back({key.first, key.second});
        ++degree[u];
        ++degree[v];
      }
      break;
    }
  }
  return Graph::from_edges(n, std::move(edges));
}

// ---------------------------------------------------------------------------
// text format: first line "n", one "u v" edge per line with u < v

inline Graph load_graph(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw GraphError("empty graph file");
  int n = 0;
  {
    std::istringstream ls(line);
    if (!(ls >> n)) throw GraphError("malformed header line: " + line);
    std::string rest;
    if (ls >> rest) throw GraphError("malformed header line: " + line);
  }
  std::vector<std::pair<int, int>> edges;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int u, v;
    if (!(ls >> u >> v)) throw GraphError("malformed edge line: " + line);
    std::string rest;
    if (ls >> rest) throw GraphError("malformed edge line: " + line);
    if (u == v) throw GraphError("self-loop: " + line);
    if (u > v) throw GraphError("edge line must have u < v: " + line);
    edges.push_back({u, v});
  }
  return Graph::from_edges(n, std::move(edges));
}

inline std::string save_graph(const Graph& g) {
  std::ostringstream out;
  out << g.n() << "\n";
  for (auto [u, v] : g.edges()) out << u << " " << v << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// centralized utilities (oracle-side local computations)

/// BFS distances from `root`, -1 where unreachable; optional hop cap.
inline std::vector<int> bfs_distances(const Graph& g, int root, int cap = -1) {
  std::vector<int> dist(g.n(), -1);
  std::queue<int> q;
  dist[root] = 0;
  q.push(root);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    if (cap >= 0 && dist[u] >= cap) continue;
    for (int v : g.neighbors(u))
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  return dist;
}

/// G^k: edge (u,v) iff 1 <= dist_G(u,v) <= k.
inline Graph power_graph(const Graph& g, int k) {
  if (k < 1) throw GraphError("power_graph needs k >= 1");
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < g.n(); ++u) {
    auto dist = bfs_distances(g, u, k);
    for (int v = u + 1; v < g.n(); ++v)
      if (dist[v] >= 1 && dist[v] <= k) edges.push_back({u, v});
  }
  return Graph::from_edges(g.n(), std::move(edges));
}

/// Vertices at distance 1..k from v (v excluded), ascending.
inline std::vector<int> khop_neighborhood(const Graph& g, int v, int k) {
  std::vector<int> out;
  if (k <= 0) return out;
  auto dist = bfs_distances(g, v, k);
  for (int u = 0; u < g.n(); ++u)
    if (u != v && dist[u] >= 1 && dist[u] <= k) out.push_back(u);
  return out;
}

struct BfsTree {
  int root = 0;
  int radius = 0;
  std::map<int, int> parent;  // root maps to itself
  std::map<int, int> depth;

  bool contains(int v) const { return depth.count(v) != 0; }
};

/// BFS tree of height <= radius; ties resolve to the smallest-ID parent.
inline BfsTree bfs_tree(const Graph& g, int root, int radius) {
  if (radius < 0) throw GraphError("bfs_tree needs radius >= 0");
  BfsTree t;
  t.root = root;
  t.radius = radius;
  auto dist = bfs_distances(g, root, radius);
  for (int v = 0; v < g.n(); ++v) {
    if (dist[v] < 0 || dist[v] > radius) continue;
    t.depth[v] = dist[v];
    if (v == root) {
      t.parent[v] = v;
      continue;
    }
    int best = -1;
    for (int u : g.neighbors(v))
      if (dist[u] == dist[v] - 1) {
        best = u;
        break;  // neighbors ascending => first hit is smallest
      }
    t.parent[v] = best;
  }
  return t;
}

struct ProxyAssignment {
  int owner = 0;
  std::map<int, int> proxy_of;  // 2-hop neighbor -> relay neighbor
};

/// Proxy of each distance-2 neighbor w: the smallest-ID common neighbor.
inline ProxyAssignment select_proxies(const Graph& g, int v) {
  ProxyAssignment pa;
  pa.owner = v;
  auto dist = bfs_distances(g, v, 2);
  for (int w = 0; w < g.n(); ++w) {
    if (dist[w] != 2) continue;
    for (int u : g.neighbors(v))
      if (g.has_edge(u, w)) {
        pa.proxy_of[w] = u;
        break;
      }
  }
  return pa;
}

/// d_p = sum_{i=1..k} delta^i, with overflow detection.
inline std::uint64_t path_count_bound(std::uint64_t delta, int k) {
  if (delta < 1 || k < 1) throw GraphError("path_count_bound needs delta >= 1, k >= 1");
  std::uint64_t total = 0, pw = 1;
  for (int i = 1; i <= k; ++i) {
    if (pw > std::numeric_limits<std::uint64_t>::max() / delta)
      throw std::overflow_error("path_count_bound overflow");
    pw *= delta;
    if (total > std::numeric_limits<std::uint64_t>::max() - pw)
      throw std::overflow_error("path_count_bound overflow");
    total += pw;
  }
  return total;
}

inline bool is_prime(std::uint64_t x) {
  if (x < 2) return false;
  for (std::uint64_t d = 2; d * d <= x; ++d)
    if (x % d == 0) return false;
  return true;
}

/// Smallest prime strictly greater than x.
inline std::uint64_t smallest_prime_above(std::uint64_t x) {
  std::uint64_t q = x + 1;
  while (!is_prime(q)) ++q;
  return q;
}

}  // namespace congestsim
