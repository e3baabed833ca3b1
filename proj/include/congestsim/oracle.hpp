#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "congestsim/graph.hpp"

// Centralized ground-truth checkers. Deliberately brute force and independent
// of the distributed implementations.

namespace congestsim::oracle {

struct ProperViolation {
  int u = -1;
  int v = -1;
  int dist = 0;
};

/// ok (nullopt) iff no two vertices at distance 1..k share a color.
/// On failure returns the lexicographically smallest violating pair.
inline std::optional<ProperViolation> check_proper_k(const Graph& g, int k,
                                                     const std::vector<std::uint64_t>& coloring) {
  if (static_cast<int>(coloring.size()) != g.n())
    throw GraphError("coloring must assign a color to every vertex");
  for (int u = 0; u < g.n(); ++u) {
    auto dist = bfs_distances(g, u, k);
    for (int v = u + 1; v < g.n(); ++v)
      if (dist[v] >= 1 && dist[v] <= k && coloring[u] == coloring[v])
        return ProperViolation{u, v, dist[v]};
  }
  return std::nullopt;
}

/// Max over v of same-color neighbors in G^k.
inline int check_defect_k(const Graph& g, int k, const std::vector<std::uint64_t>& coloring) {
  int worst = 0;
  for (int v = 0; v < g.n(); ++v) {
    auto dist = bfs_distances(g, v, k);
    int c = 0;
    for (int u = 0; u < g.n(); ++u)
      if (u != v && dist[u] >= 1 && dist[u] <= k && coloring[u] == coloring[v]) ++c;
    worst = std::max(worst, c);
  }
  return worst;
}

/// Total order over vertices used to orient class-internal edges.
struct FinalizeOrder {
  std::vector<int> round;  // finalize round per vertex

  /// true iff u precedes v (earlier round, ties to lower ID).
  bool earlier(int u, int v) const {
    if (round[u] != round[v]) return round[u] < round[v];
    return u < v;
  }
};

struct ArbdefectResult {
  bool ok = true;
  int violating_vertex = -1;
  std::string reason;
};

/// Checks that orienting class-internal G^k edges toward the earlier endpoint
/// yields out-degree <= max_defect, then builds the label partition and
/// verifies each label class is a forest.
inline ArbdefectResult check_arbdefect(const Graph& g, int k,
                                       const std::vector<std::uint64_t>& coloring,
                                       const FinalizeOrder& order, int max_defect) {
  ArbdefectResult res;
  const int n = g.n();
  // class-internal directed edges, v -> earlier endpoint
  std::vector<std::vector<int>> out_edges(n);
  for (int u = 0; u < n; ++u) {
    auto dist = bfs_distances(g, u, k);
    for (int v = u + 1; v < n; ++v) {
      if (!(dist[v] >= 1 && dist[v] <= k)) continue;
      if (coloring[u] != coloring[v]) continue;
      if (order.earlier(u, v))
        out_edges[v].push_back(u);
      else
        out_edges[u].push_back(v);
    }
  }
  for (int v = 0; v < n; ++v)
    if (static_cast<int>(out_edges[v].size()) > max_defect) {
      res.ok = false;
      res.violating_vertex = v;
      res.reason = "out-degree exceeds max_defect";
      return res;
    }
  // label the out-edges 1..max_defect per vertex; each label must be a forest
  for (int label = 0; label < max_defect; ++label) {
    std::vector<int> uf(n);
    for (int i = 0; i < n; ++i) uf[i] = i;
    auto find = [&](int x) {
      while (uf[x] != x) x = uf[x] = uf[uf[x]];
      return x;
    };
    for (int v = 0; v < n; ++v) {
      if (label >= static_cast<int>(out_edges[v].size())) continue;
      int u = out_edges[v][label];
      int a = find(u), b = find(v);
      if (a == b) {
        res.ok = false;
        res.violating_vertex = v;
        res.reason = "label class contains a cycle";
        return res;
      }
      uf[a] = b;
    }
  }
  return res;
}

struct MisViolation {
  enum class Kind { not_independent, not_dominating } kind;
  int u = -1;
  int v = -1;  // for independence violations
};

/// ok iff S is independent in G^k and every vertex is within distance k of S.
inline std::optional<MisViolation> check_mis_k(const Graph& g, int k, const std::set<int>& s) {
  std::vector<int> cover(g.n(), -1);
  for (int u : s) {
    auto dist = bfs_distances(g, u, k);
    for (int v = 0; v < g.n(); ++v) {
      if (dist[v] < 0 || dist[v] > k) continue;
      if (v != u && s.count(v))
        return MisViolation{MisViolation::Kind::not_independent, std::min(u, v), std::max(u, v)};
      cover[v] = u;
    }
  }
  for (int v = 0; v < g.n(); ++v)
    if (cover[v] < 0) return MisViolation{MisViolation::Kind::not_dominating, v, -1};
  return std::nullopt;
}

struct BudgetResult {
  bool ok = true;
  std::uint64_t measured = 0;
  std::uint64_t bound = 0;
};

inline BudgetResult check_round_budget(std::uint64_t measured_rounds, std::uint64_t bound) {
  return BudgetResult{measured_rounds <= bound, measured_rounds, bound};
}

/// Greedy proper coloring of G^k; oracle-side input generator for reductions.
inline std::vector<std::uint64_t> greedy_coloring_k(const Graph& g, int k) {
  std::vector<std::uint64_t> colors(g.n(), 0);
  std::vector<bool> assigned(g.n(), false);
  for (int v = 0; v < g.n(); ++v) {
    auto dist = bfs_distances(g, v, k);
    std::set<std::uint64_t> used;
    for (int u = 0; u < g.n(); ++u)
      if (u != v && assigned[u] && dist[u] >= 1 && dist[u] <= k) used.insert(colors[u]);
    std::uint64_t c = 0;
    while (used.count(c)) ++c;
    colors[v] = c;
    assigned[v] = true;
  }
  return colors;
}

/// Greedy MIS of G^k by ascending ID; used for oracle self-consistency tests.
inline std::set<int> greedy_mis_k(const Graph& g, int k) {
  std::set<int> s;
  std::vector<bool> blocked(g.n(), false);
  for (int v = 0; v < g.n(); ++v) {
    if (blocked[v]) continue;
    s.insert(v);
    auto dist = bfs_distances(g, v, k);
    for (int u = 0; u < g.n(); ++u)
      if (dist[u] >= 0 && dist[u] <= k) blocked[u] = true;
  }
  return s;
}

/// Exact multiplicity of `x` among the values of N_k(v).
inline std::uint64_t count_value_khop(const Graph& g, int k,
                                      const std::vector<std::uint64_t>& values, int v,
                                      std::uint64_t x) {
  std::uint64_t c = 0;
  for (int u : khop_neighborhood(g, v, k))
    if (values[u] == x) ++c;
  return c;
}

}  // namespace congestsim::oracle
