#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "congestsim/engine.hpp"
#include "congestsim/errors.hpp"
#include "congestsim/graph.hpp"
#include "congestsim/linial2.hpp"
#include "congestsim/oracle.hpp"
#include "congestsim/process.hpp"

// Distance-k machinery: ceil(k/2)-radius broadcast, aggregation-function
// convergecast (idempotent, over-counting, and BFS-exact modes), the generic
// G -> G^k round transform, and the distance-k coloring / MIS algorithms on
// top of it. Per-phase round budgets are computed centrally from the true
// ring sizes and handed to every vertex as globally-known schedule data.

namespace congestsim::powerk {

inline int khalf(int k) { return (k + 1) / 2; }

// ---------------------------------------------------------------------------
// aggregation domain: a commutative monoid over [0, domain)

struct AggOps {
  std::uint64_t domain = 2;  // |A|
  std::uint64_t init = 0;
  std::function<std::uint64_t(std::uint64_t, std::uint64_t)> op;
  bool idempotent = false;

  int value_width() const { return value_bits(domain); }
};

inline AggOps or_ops(int bits = 1) {
  AggOps a;
  a.domain = std::uint64_t(1) << bits;
  a.init = 0;
  a.op = [](std::uint64_t x, std::uint64_t y) { return x | y; };
  a.idempotent = true;
  return a;
}

inline AggOps max_ops(std::uint64_t domain) {
  AggOps a;
  a.domain = domain;
  a.init = 0;
  a.op = [](std::uint64_t x, std::uint64_t y) { return std::max(x, y); };
  a.idempotent = true;
  return a;
}

inline AggOps saturating_add_ops(std::uint64_t cap) {
  AggOps a;
  a.domain = cap + 1;
  a.init = 0;
  a.op = [cap](std::uint64_t x, std::uint64_t y) { return std::min(cap, x + y); };
  a.idempotent = false;
  return a;
}

/// Two saturating counters packed into one value (left/right half counts).
struct PackedPair {
  std::uint64_t cap;
  std::uint64_t pack(std::uint64_t l, std::uint64_t r) const { return l * (cap + 1) + r; }
  std::pair<std::uint64_t, std::uint64_t> unpack(std::uint64_t v) const {
    return {v / (cap + 1), v % (cap + 1)};
  }
};

inline AggOps packed_add_ops(std::uint64_t cap) {
  AggOps a;
  a.domain = (cap + 1) * (cap + 1);
  a.init = 0;
  a.op = [cap](std::uint64_t x, std::uint64_t y) {
    PackedPair pp{cap};
    auto [xl, xr] = pp.unpack(x);
    auto [yl, yr] = pp.unpack(y);
    return pp.pack(std::min(cap, xl + yl), std::min(cap, xr + yr));
  };
  a.idempotent = false;
  return a;
}

// ---------------------------------------------------------------------------
// orchestrator-side distance table used to size every phase

class DistTable {
 public:
  explicit DistTable(const Graph& g) : n_(g.n()) {
    dist_.reserve(n_);
    for (int v = 0; v < n_; ++v) dist_.push_back(bfs_distances(g, v));
  }
  int n() const { return n_; }
  int dist(int u, int v) const { return dist_[u][v]; }
  std::uint64_t ring_size(int v, int h) const {
    std::uint64_t c = 0;
    for (int u = 0; u < n_; ++u)
      if (dist_[v][u] == h) ++c;
    return c;
  }
  std::uint64_t max_ring(int h) const {
    std::uint64_t m = 0;
    for (int v = 0; v < n_; ++v) m = std::max(m, ring_size(v, h));
    return m;
  }
  std::uint64_t ball_size(int v, int radius) const {
    std::uint64_t c = 0;
    for (int u = 0; u < n_; ++u)
      if (dist_[v][u] >= 0 && dist_[v][u] <= radius) ++c;
    return c;
  }
  std::uint64_t max_ball(int radius) const {
    std::uint64_t m = 0;
    for (int v = 0; v < n_; ++v) m = std::max(m, ball_size(v, radius));
    return m;
  }

 private:
  int n_;
  std::vector<std::vector<int>> dist_;
};

// ---------------------------------------------------------------------------
// schedules: per-phase bit budgets plus the shared wire layout

struct BcastSchedule {
  int K = 0;
  int idw = 0, distw = 0, cntw = 0, payload_w = 0;
  std::vector<std::uint64_t> phase_bits;

  std::uint64_t entry_bits() const { return std::uint64_t(idw) + distw + payload_w; }
};

inline BcastSchedule bcast_schedule(const DistTable& dt, int n, int K, int payload_w) {
  BcastSchedule s;
  s.K = K;
  s.idw = id_bits(n);
  s.distw = value_bits(std::uint64_t(K) + 1);
  s.payload_w = payload_w;
  std::uint64_t max_entries = 1;
  for (int h = 0; h < K; ++h) max_entries = std::max(max_entries, dt.max_ring(h));
  s.cntw = value_bits(max_entries + 1);
  for (int h = 1; h <= K; ++h)
    s.phase_bits.push_back(s.cntw + dt.max_ring(h - 1) * s.entry_bits());
  return s;
}

struct ConvSchedule {
  int K = 0;
  int idw = 0, cntw = 0, value_w = 0;
  std::vector<std::uint64_t> phase_bits;

  std::uint64_t entry_bits() const { return std::uint64_t(idw) + value_w; }
};

inline ConvSchedule conv_schedule(const DistTable& dt, int n, int K, int value_w,
                                  const std::vector<bool>& is_target) {
  ConvSchedule s;
  s.K = K;
  s.idw = id_bits(n);
  s.value_w = value_w;
  std::vector<std::uint64_t> entries(K, 0);
  std::uint64_t max_entries = 1;
  for (int i = 1; i <= K; ++i) {
    for (int v = 0; v < dt.n(); ++v) {
      std::uint64_t c = 0;
      for (int t = 0; t < dt.n(); ++t)
        if (is_target[t] && dt.dist(v, t) == K - i + 1) ++c;
      entries[i - 1] = std::max(entries[i - 1], c);
    }
    max_entries = std::max(max_entries, entries[i - 1]);
  }
  s.cntw = value_bits(max_entries + 1);
  for (int i = 0; i < K; ++i)
    s.phase_bits.push_back(entries[i] == 0 ? 0 : s.cntw + entries[i] * s.entry_bits());
  return s;
}

// ---------------------------------------------------------------------------
// broadcast to radius K with first-arrival dedup

struct BallEntry {
  int origin = 0;
  int dist = 0;
  BitString payload;
};

struct Ball {
  std::vector<BallEntry> entries;  // sorted by origin; includes self at dist 0

  int index_of(int origin) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].origin == origin) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

inline Task<Ball> broadcast_khalf(ProcCtx& ctx, BitString own_payload,
                                  const BcastSchedule& sched, bool originate = true) {
  const int deg = ctx.degree();
  Ball ball;
  std::set<int> seen{ctx.id()};
  std::vector<BallEntry> fresh;
  if (originate) {
    ball.entries.push_back({ctx.id(), 0, std::move(own_payload)});
    fresh.push_back(ball.entries[0]);
  }

  for (int h = 1; h <= sched.K; ++h) {
    if (sched.phase_bits[h - 1] == 0) {
      if (!fresh.empty())
        throw EngineError("broadcast has entries but the phase budget is zero");
      continue;
    }
    BitString msg;
    msg.append_uint(std::uint64_t(fresh.size()), sched.cntw);
    for (auto& e : fresh) {
      msg.append_uint(std::uint64_t(e.origin), sched.idw);
      msg.append_uint(std::uint64_t(e.dist + 1), sched.distw);
      msg.append(e.payload);
    }
    if (msg.size() > sched.phase_bits[h - 1])
      throw EngineError("broadcast payload exceeds the phase budget");
    auto in =
        co_await ctx.exchange_all(msg, stream_rounds(sched.phase_bits[h - 1], ctx.bw()));
    fresh.clear();
    for (int i = 0; i < deg; ++i) {
      if (in[i].empty()) continue;
      BitReader r(in[i]);
      std::uint64_t cnt = r.read_uint(sched.cntw);
      for (std::uint64_t t = 0; t < cnt; ++t) {
        BallEntry e;
        e.origin = static_cast<int>(r.read_uint(sched.idw));
        e.dist = static_cast<int>(r.read_uint(sched.distw));
        BitString payload;
        for (int b = 0; b < sched.payload_w; ++b) payload.push_back(r.read_bit());
        e.payload = std::move(payload);
        if (e.dist > sched.K) continue;   // beyond the horizon: discarded
        if (!seen.insert(e.origin).second) continue;  // first arrival wins
        fresh.push_back(e);
        ball.entries.push_back(std::move(e));
      }
    }
  }
  std::sort(ball.entries.begin(), ball.entries.end(),
            [](const BallEntry& a, const BallEntry& b) { return a.origin < b.origin; });
  co_return ball;
}

// ---------------------------------------------------------------------------
// depth-scheduled convergecast. Every vertex holds one partial value per
// target in its ball; phase i drains targets at distance K-i+1, so a value
// travels along strictly distance-decreasing paths toward its target.
//
// route == nullptr: flood routing (receivers one ring closer merge).
// route != nullptr: route[target] = neighbor index to forward to (tree mode).

inline Task<std::uint64_t> convergecast_khalf(
    ProcCtx& ctx, const Ball& ball, const AggOps& agg,
    const std::function<bool(int)>& is_target,
    const std::function<std::uint64_t(int)>& initial_partial,
    const std::map<int, int>* route, const ConvSchedule& sched) {
  const int deg = ctx.degree();
  std::map<int, std::uint64_t> acc;  // target -> partial value
  std::map<int, int> dist_of;
  for (std::size_t i = 0; i < ball.entries.size(); ++i) {
    int t = ball.entries[i].origin;
    dist_of[t] = ball.entries[i].dist;
    if (is_target(t)) acc[t] = initial_partial(static_cast<int>(i));
  }

  for (int i = 1; i <= sched.K; ++i) {
    const int drain_dist = sched.K - i + 1;
    if (sched.phase_bits[i - 1] == 0) {
      for (auto& [t, val] : acc)
        if (dist_of[t] == drain_dist)
          throw EngineError("convergecast has entries but the phase budget is zero");
      continue;
    }
    std::vector<std::vector<std::pair<int, std::uint64_t>>> out_entries(deg);
    for (auto& [t, val] : acc) {
      if (dist_of[t] != drain_dist) continue;
      if (route) {
        auto it = route->find(t);
        if (it == route->end())
          throw EngineError("convergecast: no route for a draining target");
        out_entries[it->second].push_back({t, val});
      } else {
        for (int e = 0; e < deg; ++e) out_entries[e].push_back({t, val});
      }
    }
    std::vector<BitString> msgs(deg);
    for (int e = 0; e < deg; ++e) {
      if (out_entries[e].empty()) continue;
      BitString b;
      b.append_uint(std::uint64_t(out_entries[e].size()), sched.cntw);
      for (auto& [t, val] : out_entries[e]) {
        b.append_uint(std::uint64_t(t), sched.idw);
        b.append_uint(val, sched.value_w);
      }
      if (b.size() > sched.phase_bits[i - 1])
        throw EngineError("convergecast payload exceeds the phase budget");
      msgs[e] = std::move(b);
    }
    auto in = co_await ctx.exchange(std::move(msgs),
                                    stream_rounds(sched.phase_bits[i - 1], ctx.bw()));
    for (int e = 0; e < deg; ++e) {
      if (in[e].empty()) continue;
      BitReader r(in[e]);
      std::uint64_t cnt = r.read_uint(sched.cntw);
      for (std::uint64_t t = 0; t < cnt; ++t) {
        int target = static_cast<int>(r.read_uint(sched.idw));
        std::uint64_t val = r.read_uint(sched.value_w);
        auto dit = dist_of.find(target);
        if (route) {
          // tree routing delivers exactly one ring closer by construction
          if (dit == dist_of.end() || dit->second != drain_dist - 1)
            throw EngineError("convergecast: tree route delivered off-ring");
        } else {
          if (dit == dist_of.end() || dit->second != drain_dist - 1) continue;
        }
        auto ait = acc.find(target);
        if (ait == acc.end())
          throw EngineError("convergecast: value for an unknown target");
        ait->second = agg.op(ait->second, val);
      }
    }
  }
  auto self = acc.find(ctx.id());
  co_return self == acc.end() ? agg.init : self->second;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// BFS-tree preprocessing for exact counting

struct AdjSchedule {
  int K1 = 0;  // flooding phases: K-1
  int idw = 0, distw = 0, degw = 0, cntw = 0;
  std::vector<std::uint64_t> phase_bits;
};

inline AdjSchedule adj_schedule(const Graph& g, const DistTable& dt, int K) {
  AdjSchedule s;
  s.K1 = K - 1;
  s.idw = id_bits(g.n());
  s.distw = value_bits(std::uint64_t(K) + 1);
  s.degw = value_bits(std::uint64_t(g.max_degree()) + 1);
  std::uint64_t max_entries = 1;
  for (int h = 0; h < s.K1; ++h) max_entries = std::max(max_entries, dt.max_ring(h));
  s.cntw = value_bits(max_entries + 1);
  for (int h = 1; h <= s.K1; ++h) {
    std::uint64_t worst = 0;
    for (int v = 0; v < g.n(); ++v) {
      std::uint64_t bits = 0;
      for (int w = 0; w < g.n(); ++w)
        if (dt.dist(v, w) == h - 1)
          bits += std::uint64_t(s.idw) + s.distw + s.degw +
                  std::uint64_t(g.degree(w)) * s.idw;
      worst = std::max(worst, bits);
    }
    s.phase_bits.push_back(s.cntw + worst);
  }
  return s;
}

struct TreeSchedule {
  int K = 0;
  int idw = 0, distw = 0, cntw = 0, szw = 0;
  std::vector<std::uint64_t> phase_bits;
};

inline TreeSchedule tree_schedule(const Graph& g, const DistTable& dt, int K) {
  TreeSchedule s;
  s.K = K;
  s.idw = id_bits(g.n());
  s.distw = value_bits(std::uint64_t(K) + 1);
  s.szw = value_bits(dt.max_ball(K) + 1);
  std::uint64_t max_entries = 1;
  for (int h = 0; h < K; ++h) max_entries = std::max(max_entries, dt.max_ring(h));
  s.cntw = value_bits(max_entries + 1);
  for (int h = 1; h <= K; ++h) {
    std::uint64_t worst = 0;
    for (int v = 0; v < g.n(); ++v) {
      std::uint64_t bits = 0;
      for (int w = 0; w < g.n(); ++w)
        if (dt.dist(v, w) == h - 1)
          bits += std::uint64_t(s.idw) + s.distw + s.szw +
                  dt.ball_size(w, K) * 2 * s.idw;
      worst = std::max(worst, bits);
    }
    s.phase_bits.push_back(s.cntw + worst);
  }
  return s;
}

struct Preproc {
  BfsTree my_tree;
  std::map<int, BfsTree> trees;  // one per ball member (self included)
};

namespace detail {

/// Serialize a BFS tree as (vertex,parent) pairs in (depth, id) order.
inline void encode_tree(BitString& out, const BfsTree& t, int idw, int szw) {
  std::vector<std::pair<int, int>> order;  // (depth, vertex)
  for (auto& [v, d] : t.depth) order.push_back({d, v});
  std::sort(order.begin(), order.end());
  out.append_uint(order.size(), szw);
  for (auto& [d, v] : order) {
    out.append_uint(std::uint64_t(v), idw);
    out.append_uint(std::uint64_t(t.parent.at(v)), idw);
  }
}

inline BfsTree decode_tree(BitReader& r, int root, int radius, int idw, int szw) {
  BfsTree t;
  t.root = root;
  t.radius = radius;
  std::uint64_t cnt = r.read_uint(szw);
  for (std::uint64_t i = 0; i < cnt; ++i) {
    int v = static_cast<int>(r.read_uint(idw));
    int p = static_cast<int>(r.read_uint(idw));
    t.parent[v] = p;
    t.depth[v] = (v == root) ? 0 : t.depth.at(p) + 1;
  }
  return t;
}

/// Learns the ball subgraph to radius K-1, builds the local BFS tree of
/// height K (identical to the centralized rule), then floods the trees so
/// every vertex holds the tree of each ball member.
inline Task<Preproc> bfs_preprocess_k(ProcCtx& ctx, const AdjSchedule& adjs,
                                      const TreeSchedule& trs) {
  const int deg = ctx.degree();
  const int K = trs.K;
  // stage A: adjacency flooding to K-1
  std::map<int, std::vector<int>> known_adj;
  {
    std::vector<int> mine(ctx.neighbors().begin(), ctx.neighbors().end());
    known_adj[ctx.id()] = mine;
  }
  struct AdjEntry {
    int origin, dist;
    std::vector<int> adj;
  };
  std::vector<AdjEntry> fresh{{ctx.id(), 0, known_adj[ctx.id()]}};
  for (int h = 1; h <= adjs.K1; ++h) {
    BitString msg;
    msg.append_uint(fresh.size(), adjs.cntw);
    for (auto& e : fresh) {
      msg.append_uint(std::uint64_t(e.origin), adjs.idw);
      msg.append_uint(std::uint64_t(e.dist + 1), adjs.distw);
      msg.append_uint(e.adj.size(), adjs.degw);
      for (int u : e.adj) msg.append_uint(std::uint64_t(u), adjs.idw);
    }
    if (msg.size() > adjs.phase_bits[h - 1])
      throw EngineError("adjacency flooding exceeds the phase budget");
    auto in =
        co_await ctx.exchange_all(msg, stream_rounds(adjs.phase_bits[h - 1], ctx.bw()));
    fresh.clear();
    for (int i = 0; i < deg; ++i) {
      if (in[i].empty()) continue;
      BitReader r(in[i]);
      std::uint64_t cnt = r.read_uint(adjs.cntw);
      for (std::uint64_t t = 0; t < cnt; ++t) {
        AdjEntry e;
        e.origin = static_cast<int>(r.read_uint(adjs.idw));
        e.dist = static_cast<int>(r.read_uint(adjs.distw));
        std::uint64_t d = r.read_uint(adjs.degw);
        for (std::uint64_t j = 0; j < d; ++j)
          e.adj.push_back(static_cast<int>(r.read_uint(adjs.idw)));
        if (e.dist > adjs.K1) continue;
        if (known_adj.count(e.origin)) continue;
        known_adj[e.origin] = e.adj;
        fresh.push_back(std::move(e));
      }
    }
  }

  // local BFS over the learned subgraph, smallest-ID parent rule
  Preproc pre;
  {
    BfsTree t;
    t.root = ctx.id();
    t.radius = K;
    t.depth[ctx.id()] = 0;
    t.parent[ctx.id()] = ctx.id();
    std::vector<int> frontier{ctx.id()};
    for (int depth = 1; depth <= K && !frontier.empty(); ++depth) {
      // collect candidate children of this level in ascending ID order
      std::set<int> next;
      for (int u : frontier) {
        auto it = known_adj.find(u);
        if (it == known_adj.end()) continue;  // u at radius K-? without data
        for (int w : it->second)
          if (!t.depth.count(w)) next.insert(w);
      }
      for (int w : next) {
        int best = -1;
        for (int u : frontier)
          if (known_adj.count(u) &&
              std::binary_search(known_adj[u].begin(), known_adj[u].end(), w)) {
            best = u;
            break;
          }
        t.depth[w] = depth;
        t.parent[w] = best;
      }
      frontier.assign(next.begin(), next.end());
    }
    pre.my_tree = std::move(t);
  }

  // stage B: tree flooding to K
  struct TreeEntry {
    int origin, dist;
    BitString body;
  };
  BitString own_body;
  encode_tree(own_body, pre.my_tree, trs.idw, trs.szw);
  {
    BitReader r(own_body);
    pre.trees[ctx.id()] = decode_tree(r, ctx.id(), K, trs.idw, trs.szw);
  }
  std::vector<TreeEntry> tree_fresh{{ctx.id(), 0, own_body}};
  for (int h = 1; h <= K; ++h) {
    BitString msg;
    msg.append_uint(tree_fresh.size(), trs.cntw);
    for (auto& e : tree_fresh) {
      msg.append_uint(std::uint64_t(e.origin), trs.idw);
      msg.append_uint(std::uint64_t(e.dist + 1), trs.distw);
      msg.append(e.body);
    }
    if (msg.size() > trs.phase_bits[h - 1])
      throw EngineError("tree flooding exceeds the phase budget");
    auto in =
        co_await ctx.exchange_all(msg, stream_rounds(trs.phase_bits[h - 1], ctx.bw()));
    tree_fresh.clear();
    for (int i = 0; i < deg; ++i) {
      if (in[i].empty()) continue;
      BitReader r(in[i]);
      std::uint64_t cnt = r.read_uint(trs.cntw);
      for (std::uint64_t t = 0; t < cnt; ++t) {
        int origin = static_cast<int>(r.read_uint(trs.idw));
        int dist = static_cast<int>(r.read_uint(trs.distw));
        // decode body while tracking its bit span for re-forwarding
        std::uint64_t sz_probe = r.read_uint(trs.szw);
        BitString body;
        body.append_uint(sz_probe, trs.szw);
        for (std::uint64_t j = 0; j < sz_probe * 2; ++j)
          body.append_uint(r.read_uint(trs.idw), trs.idw);
        if (dist > K) continue;
        if (pre.trees.count(origin)) continue;
        BitReader br(body);
        pre.trees[origin] = decode_tree(br, origin, K, trs.idw, trs.szw);
        tree_fresh.push_back({origin, dist, std::move(body)});
      }
    }
  }
  co_return pre;
}

/// Distance between two ball members, from their trees: shortest-path
/// midpoints lie in both balls, so the minimum over common vertices is exact
/// whenever the true distance is at most 2K.
inline int tree_distance(const BfsTree& tv, const BfsTree& tu) {
  int best = -1;
  for (auto& [z, dv] : tv.depth) {
    auto it = tu.depth.find(z);
    if (it == tu.depth.end()) continue;
    int d = dv + it->second;
    if (best < 0 || d < best) best = d;
  }
  return best;
}

/// The designated injector for the ordered pair (target v, source u):
/// the smallest-ID vertex at distance exactly K from v within distance K of
/// u, or v itself when no such vertex exists.
inline int injector_for(const BfsTree& tv, const BfsTree& tu, int K) {
  int best = -1;
  for (auto& [w, d] : tv.depth) {
    if (d != K) continue;
    if (!tu.depth.count(w)) continue;
    if (best < 0 || w < best) best = w;
  }
  return best >= 0 ? best : tv.root;
}

}  // namespace detail

/// Injection duties of one vertex: ordered (target, source) pairs this vertex
/// applies the aggregation token for, exactly once globally.
inline std::set<std::pair<int, int>> exact_duties(const Preproc& pre, int me, int k) {
  const int K = khalf(k);
  std::set<std::pair<int, int>> duty;
  for (auto& [v, tv] : pre.trees)
    for (auto& [u, tu] : pre.trees) {
      if (u == v) continue;
      int d = detail::tree_distance(tv, tu);
      if (d < 0 || d > k) continue;
      if (detail::injector_for(tv, tu, K) == me) duty.insert({v, u});
    }
  return duty;
}

/// Tree routes for the convergecast: target -> neighbor index of my parent in
/// the target's BFS tree.
inline std::map<int, int> tree_routes(const Preproc& pre, const ProcCtx& ctx) {
  std::map<int, int> route;
  for (auto& [t, tree] : pre.trees) {
    if (t == ctx.id()) continue;
    auto it = tree.parent.find(ctx.id());
    if (it == tree.parent.end()) continue;
    for (int i = 0; i < ctx.degree(); ++i)
      if (ctx.neighbor(i) == it->second) {
        route[t] = i;
        break;
      }
  }
  return route;
}

/// Oracle alias; the exact convergecast must reproduce it everywhere.
using oracle::count_value_khop;

// ---------------------------------------------------------------------------
// one simulated G^k round: aggregation transform vs. the naive full-ball
// collection, with identical logical output (same-value conflict flags)

struct TransformResult {
  std::vector<std::uint64_t> result;
  RoundTrace trace;
};

inline TransformResult transform_round_once(const Graph& g, int k,
                                            const std::vector<std::uint64_t>& values,
                                            Bandwidth bw) {
  const int K = khalf(k);
  DistTable dt(g);
  std::uint64_t maxv = 1;
  for (auto v : values) maxv = std::max(maxv, v + 1);
  const int vw = value_bits(maxv);
  auto bs = bcast_schedule(dt, g.n(), K, vw);
  std::vector<bool> all(g.n(), true);
  auto cs = conv_schedule(dt, g.n(), K, 1, all);
  AggOps agg = or_ops(1);

  auto procs = make_processes(g.n(), [&](int me) -> CoroVertex::Body {
    return [&, me](ProcCtx& ctx) -> Task<void> {
      Ball ball = co_await detail::broadcast_khalf(ctx, enc_value(values[me], vw), bs);
      std::vector<std::uint64_t> val(ball.entries.size());
      for (std::size_t i = 0; i < ball.entries.size(); ++i) {
        BitReader r(ball.entries[i].payload);
        val[i] = r.read_uint(vw);
      }
      auto initial = [&](int ti) {
        std::uint64_t acc = agg.init;
        for (std::size_t ui = 0; ui < ball.entries.size(); ++ui) {
          if (static_cast<int>(ui) == ti) continue;
          if (ball.entries[ti].dist + ball.entries[ui].dist > k) continue;
          acc = agg.op(acc, val[ti] == val[ui] ? 1 : 0);
        }
        return acc;
      };
      std::uint64_t out = co_await detail::convergecast_khalf(
          ctx, ball, agg, [](int) { return true; }, initial, nullptr, cs);
      ctx.set_output(out);
      co_return;
    };
  });
  std::uint64_t cap = 1000;
  for (auto b : bs.phase_bits) cap += 10 * stream_rounds(b, bw);
  for (auto b : cs.phase_bits) cap += 10 * stream_rounds(b, bw);
  auto trace = congestsim::run(g, procs, bw, cap);
  if (trace.outcome != RoundTrace::Outcome::completed)
    throw RoundCapError("transform_round: engine round cap reached");
  TransformResult res;
  res.result.assign(trace.outputs.begin(), trace.outputs.end());
  res.trace = std::move(trace);
  return res;
}

inline TransformResult naive_transform_round_once(const Graph& g, int k,
                                                  const std::vector<std::uint64_t>& values,
                                                  Bandwidth bw) {
  DistTable dt(g);
  std::uint64_t maxv = 1;
  for (auto v : values) maxv = std::max(maxv, v + 1);
  const int vw = value_bits(maxv);
  auto bs = bcast_schedule(dt, g.n(), k, vw);  // full k-ball state collection

  auto procs = make_processes(g.n(), [&](int me) -> CoroVertex::Body {
    return [&, me](ProcCtx& ctx) -> Task<void> {
      Ball ball = co_await detail::broadcast_khalf(ctx, enc_value(values[me], vw), bs);
      std::uint64_t flag = 0;
      for (auto& e : ball.entries) {
        if (e.origin == ctx.id() || e.dist > k) continue;
        BitReader r(e.payload);
        if (r.read_uint(vw) == values[me]) flag = 1;
      }
      ctx.set_output(flag);
      co_return;
    };
  });
  std::uint64_t cap = 1000;
  for (auto b : bs.phase_bits) cap += 10 * stream_rounds(b, bw);
  auto trace = congestsim::run(g, procs, bw, cap);
  if (trace.outcome != RoundTrace::Outcome::completed)
    throw RoundCapError("naive_transform_round: engine round cap reached");
  TransformResult res;
  res.result.assign(trace.outputs.begin(), trace.outputs.end());
  res.trace = std::move(trace);
  return res;
}

// ---------------------------------------------------------------------------
// exact counting end to end (preprocessing + tree-routed convergecast)

struct ExactCountResult {
  std::vector<std::uint64_t> counts;
  RoundTrace trace;
  std::uint64_t preprocess_rounds = 0;
};

inline ExactCountResult exact_count_run(const Graph& g, int k,
                                        const std::vector<std::uint64_t>& values,
                                        std::uint64_t x, Bandwidth bw) {
  const int K = khalf(k);
  DistTable dt(g);
  std::uint64_t maxv = 1;
  for (auto v : values) maxv = std::max(maxv, v + 1);
  const int vw = value_bits(maxv);
  auto adjs = adj_schedule(g, dt, K);
  auto trs = tree_schedule(g, dt, K);
  auto bs = bcast_schedule(dt, g.n(), K, vw);
  AggOps agg = saturating_add_ops(std::uint64_t(g.n()));
  std::vector<bool> all(g.n(), true);
  auto cs = conv_schedule(dt, g.n(), K, agg.value_width(), all);
  std::vector<std::uint64_t> preprocess_rounds(g.n(), 0);

  auto procs = make_processes(g.n(), [&](int me) -> CoroVertex::Body {
    return [&, me](ProcCtx& ctx) -> Task<void> {
      Preproc pre = co_await detail::bfs_preprocess_k(ctx, adjs, trs);
      preprocess_rounds[me] = ctx.round();
      auto duty = exact_duties(pre, ctx.id(), k);
      auto routes = tree_routes(pre, ctx);
      Ball ball = co_await detail::broadcast_khalf(ctx, enc_value(values[me], vw), bs);
      std::map<int, std::uint64_t> val;
      for (auto& e : ball.entries) {
        BitReader r(e.payload);
        val[e.origin] = r.read_uint(vw);
      }
      auto initial = [&](int ti) {
        int v = ball.entries[ti].origin;
        std::uint64_t acc = agg.init;
        for (auto& [tv, u] : duty) {
          if (tv != v) continue;
          acc = agg.op(acc, val.at(u) == x ? 1 : 0);
        }
        return acc;
      };
      std::uint64_t out = co_await detail::convergecast_khalf(
          ctx, ball, agg, [](int) { return true; }, initial, &routes, cs);
      ctx.set_output(out);
      co_return;
    };
  });
  std::uint64_t cap = 2000;
  for (auto b : adjs.phase_bits) cap += 10 * stream_rounds(b, bw);
  for (auto b : trs.phase_bits) cap += 10 * stream_rounds(b, bw);
  for (auto b : bs.phase_bits) cap += 10 * stream_rounds(b, bw);
  for (auto b : cs.phase_bits) cap += 10 * stream_rounds(b, bw);
  auto trace = congestsim::run(g, procs, bw, cap);
  if (trace.outcome != RoundTrace::Outcome::completed)
    throw RoundCapError("exact_count: engine round cap reached");
  ExactCountResult res;
  res.counts.assign(trace.outputs.begin(), trace.outputs.end());
  res.preprocess_rounds = preprocess_rounds[0];
  res.trace = std::move(trace);
  return res;
}

// ---------------------------------------------------------------------------
// distance-k AG coloring

struct AgkParams {
  std::uint64_t q = 0;    // prime > 2*d_p with q^2 >= input palette
  std::uint64_t d_p = 0;  // path count bound
};

inline AgkParams agk_params(std::uint64_t input_palette, int delta, int k) {
  std::uint64_t dp = path_count_bound(std::max(1, delta), k);
  std::uint64_t q = smallest_prime_above(2 * dp);
  while (q * q < input_palette) q = smallest_prime_above(q);
  return {q, dp};
}

struct AgkDebug {
  std::uint64_t a = 0, b = 0;
  std::uint64_t finalize_phase = 0;
  std::uint64_t phases = 0;
  bool failed = false;
};

struct AgkResult {
  std::vector<std::uint64_t> colors;  // final b values, palette q
  AgkParams params;
  RoundTrace trace;
  std::uint64_t phases = 0;
};

class AgkSim {
 public:
  AgkSim(const Graph& g, int k, std::vector<std::uint64_t> input, AgkParams params)
      : g_(g), k_(k), input_(std::move(input)), params_(params), dt_(g), debug_(g.n()) {
    const int qw = value_bits(params_.q);
    bs_ = bcast_schedule(dt_, g.n(), khalf(k), 2 * qw);
    std::vector<bool> all(g.n(), true);
    cs_ = conv_schedule(dt_, g.n(), khalf(k), 2, all);
  }

  const std::vector<AgkDebug>& debug() const { return debug_; }

  AgkResult run(Bandwidth bw, const RoundObserver& obs = {}) {
    std::uint64_t per_phase = 2;
    for (auto b : bs_.phase_bits) per_phase += stream_rounds(b, bw);
    for (auto b : cs_.phase_bits) per_phase += stream_rounds(b, bw);
    std::uint64_t cap = 1000 + 10 * (params_.q + 2) * per_phase;
    auto procs = make_processes(g_.n(), [this](int v) -> CoroVertex::Body {
      return [this, v](ProcCtx& ctx) { return body(ctx, v); };
    });
    auto trace = congestsim::run(g_, procs, bw, cap, obs);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("agk: engine round cap reached");
    AgkResult res;
    res.params = params_;
    res.colors.resize(g_.n());
    for (int v = 0; v < g_.n(); ++v) {
      if (debug_[v].failed) throw RoundCapError("agk: vertex exceeded the q-phase bound");
      res.colors[v] = debug_[v].b;
      res.phases = std::max(res.phases, debug_[v].finalize_phase);
    }
    res.trace = std::move(trace);
    return res;
  }

 private:
  Task<void> body(ProcCtx& ctx, int v) {
    const std::uint64_t q = params_.q;
    const int qw = value_bits(q);
    AgkDebug& dbg = debug_[v];
    std::uint64_t a = input_[v] / q, b = input_[v] % q;
    dbg.a = a;
    dbg.b = b;
    AggOps agg = or_ops(2);

    for (std::uint64_t phase = 1; phase <= q + 1; ++phase) {
      BitString payload;
      payload.append_uint(a, qw);
      payload.append_uint(b, qw);
      Ball ball = co_await detail::broadcast_khalf(ctx, std::move(payload), bs_);
      struct St {
        std::uint64_t a, b;
      };
      std::vector<St> st(ball.entries.size());
      for (std::size_t i = 0; i < ball.entries.size(); ++i) {
        BitReader r(ball.entries[i].payload);
        st[i] = {r.read_uint(qw), r.read_uint(qw)};
      }
      auto initial = [&](int ti) {
        std::uint64_t acc = agg.init;
        for (std::size_t ui = 0; ui < ball.entries.size(); ++ui) {
          if (static_cast<int>(ui) == ti) continue;
          if (ball.entries[ti].dist + ball.entries[ui].dist > k_) continue;
          std::uint64_t token = (st[ui].b == st[ti].b ? 1 : 0) | (st[ui].a != 0 ? 2 : 0);
          acc = agg.op(acc, token);
        }
        return acc;
      };
      std::uint64_t folded = co_await detail::convergecast_khalf(
          ctx, ball, agg, [](int) { return true; }, initial, nullptr, cs_);
      const bool conflict = (folded & 1) != 0;
      const bool others_active = (folded & 2) != 0;
      if (a != 0) {
        if (phase > q) {
          dbg.failed = true;
          break;
        }
        if (conflict) {
          b = (a + b) % q;
        } else {
          a = 0;
          dbg.finalize_phase = phase;
        }
      }
      dbg.a = a;
      dbg.b = b;
      dbg.phases = phase;
      if (a == 0 && !others_active) break;  // the whole k-ball is settled
    }
    if (a != 0) dbg.failed = true;
    ctx.set_output(b);
    co_return;
  }

  const Graph& g_;
  int k_;
  std::vector<std::uint64_t> input_;
  AgkParams params_;
  DistTable dt_;
  BcastSchedule bs_;
  ConvSchedule cs_;
  std::vector<AgkDebug> debug_;
};

inline AgkResult agk_coloring_run(const Graph& g, int k, std::vector<std::uint64_t> input,
                                  AgkParams params, Bandwidth bw) {
  AgkSim sim(g, k, std::move(input), params);
  return sim.run(bw);
}

// ---------------------------------------------------------------------------
// distance-k color reduction with degree-3 polynomials and over-counting

struct LinialkStage {
  std::uint64_t q = 0;  // prime > 6*d_p with q^4 >= m
  std::uint64_t m = 0;  // input palette of the stage
};

inline std::vector<LinialkStage> linialk_schedule(std::uint64_t m0, std::uint64_t d_p) {
  std::vector<LinialkStage> stages;
  std::uint64_t m = m0;
  while (m >= 2) {
    std::uint64_t q = smallest_prime_above(6 * d_p);
    while (!linial2::detail::pow_at_least(q, 4, m)) q = smallest_prime_above(q);
    if (q * q >= m) break;
    stages.push_back({q, m});
    m = q * q;
  }
  return stages;
}

struct LinialkResult {
  std::vector<std::uint64_t> colors;
  std::uint64_t palette = 0;
  std::uint64_t d_p = 0;
  std::vector<LinialkStage> stages;
  RoundTrace trace;
};

struct LinialkDebug {
  std::vector<std::vector<linial2::PhaseStats>> stage_phases;
};

class LinialkSim {
 public:
  LinialkSim(const Graph& g, int k, std::vector<std::uint64_t> input,
             std::vector<LinialkStage> stages)
      : g_(g), k_(k), input_(std::move(input)), stages_(std::move(stages)), dt_(g),
        debug_(g.n()) {
    d_p_ = path_count_bound(std::max(1, g.max_degree()), k);
  }

  static LinialkSim from_ids(const Graph& g, int k) {
    std::vector<std::uint64_t> ids(g.n());
    for (int v = 0; v < g.n(); ++v) ids[v] = v;
    std::uint64_t dp = path_count_bound(std::max(1, g.max_degree()), k);
    return LinialkSim(g, k, std::move(ids), linialk_schedule(std::uint64_t(g.n()), dp));
  }

  const std::vector<LinialkDebug>& debug() const { return debug_; }
  const std::vector<LinialkStage>& stages() const { return stages_; }
  std::uint64_t d_p() const { return d_p_; }

  LinialkResult run(Bandwidth bw, const RoundObserver& obs = {}) {
    std::uint64_t cap = 1000;
    for (auto& st : stages_) {
      const int cw = value_bits(st.m);
      const int rw = value_bits(st.q);
      auto bs = bcast_schedule(dt_, g_.n(), khalf(k_), cw + 2 * rw);
      std::vector<bool> all(g_.n(), true);
      auto csch = conv_schedule(dt_, g_.n(), khalf(k_),
                                2 * value_bits(3 * d_p_ + 1), all);
      std::uint64_t per_phase = 2;
      for (auto b : bs.phase_bits) per_phase += stream_rounds(b, bw);
      for (auto b : csch.phase_bits) per_phase += stream_rounds(b, bw);
      cap += 10 * (ceil_log2(st.q) + 1) * per_phase;
    }
    auto procs = make_processes(g_.n(), [this](int v) -> CoroVertex::Body {
      return [this, v](ProcCtx& ctx) { return body(ctx, v); };
    });
    auto trace = congestsim::run(g_, procs, bw, cap, obs);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("linialk: engine round cap reached");
    LinialkResult res;
    res.d_p = d_p_;
    res.stages = stages_;
    res.palette = stages_.empty() ? std::uint64_t(std::max(g_.n(), 1))
                                  : stages_.back().q * stages_.back().q;
    res.colors.assign(trace.outputs.begin(), trace.outputs.end());
    res.trace = std::move(trace);
    return res;
  }

 private:
  Task<void> body(ProcCtx& ctx, int v) {
    std::uint64_t color = input_[v];
    debug_[v].stage_phases.assign(stages_.size(), {});
    for (std::size_t si = 0; si < stages_.size(); ++si)
      color = co_await stage(ctx, v, si, color);
    ctx.set_output(color);
    co_return;
  }

  Task<std::uint64_t> stage(ProcCtx& ctx, int v, std::size_t si, std::uint64_t color) {
    const LinialkStage st = stages_[si];
    const std::uint64_t q = st.q;
    const int cw = value_bits(st.m);
    const int rw = value_bits(q);
    const std::uint64_t cap = 3 * d_p_;
    AggOps agg = packed_add_ops(cap);
    PackedPair pp{cap};
    auto bs = bcast_schedule(dt_, g_.n(), khalf(k_), cw + 2 * rw);
    std::vector<bool> all(g_.n(), true);
    auto csch = conv_schedule(dt_, g_.n(), khalf(k_), agg.value_width(), all);

    auto poly_of = [&](std::uint64_t c) {
      std::vector<std::uint64_t> coeff(4);
      for (int j = 0; j < 4; ++j) {
        coeff[j] = c % q;
        c /= q;
      }
      return coeff;
    };
    auto my_poly = poly_of(color);
    std::uint64_t lo = 0, hi = q - 1;

    while (lo < hi) {
      BitString payload;
      payload.append_uint(color, cw);
      payload.append_uint(lo, rw);
      payload.append_uint(hi, rw);
      Ball ball = co_await detail::broadcast_khalf(ctx, std::move(payload), bs);
      struct St {
        std::uint64_t color, lo, hi;
      };
      std::vector<St> sst(ball.entries.size());
      for (std::size_t i = 0; i < ball.entries.size(); ++i) {
        BitReader r(ball.entries[i].payload);
        sst[i] = {r.read_uint(cw), r.read_uint(rw), r.read_uint(rw)};
      }
      auto initial = [&](int ti) {
        std::uint64_t acc = agg.init;
        auto pv = poly_of(sst[ti].color);
        const std::uint64_t mid = (sst[ti].lo + sst[ti].hi) / 2;
        for (std::size_t ui = 0; ui < ball.entries.size(); ++ui) {
          if (static_cast<int>(ui) == ti) continue;
          if (ball.entries[ti].dist + ball.entries[ui].dist > k_) continue;
          auto pu = poly_of(sst[ui].color);
          std::uint64_t cl = 0, cr = 0;
          for (std::uint64_t t = sst[ti].lo; t <= sst[ti].hi; ++t)
            if (linial2::poly_eval(pv, t, q) == linial2::poly_eval(pu, t, q)) {
              if (t <= mid)
                ++cl;
              else
                ++cr;
            }
          acc = agg.op(acc, pp.pack(cl, cr));
        }
        return acc;
      };
      std::uint64_t folded = co_await detail::convergecast_khalf(
          ctx, ball, agg, [](int) { return true; }, initial, nullptr, csch);
      auto [sum_l, sum_r] = pp.unpack(folded);
      if (sum_l + sum_r >= hi - lo + 1)
        throw NoFreeElementError("linialk: conflicts reached range width");
      bool go_left = sum_l <= sum_r;
      debug_[v].stage_phases[si].push_back({sum_l, sum_r, hi - lo + 1, go_left});
      const std::uint64_t mid = (lo + hi) / 2;
      if (go_left)
        hi = mid;
      else
        lo = mid + 1;
    }
    co_return lo * q + linial2::poly_eval(my_poly, lo, q);
  }

  const Graph& g_;
  int k_;
  std::vector<std::uint64_t> input_;
  std::vector<LinialkStage> stages_;
  DistTable dt_;
  std::uint64_t d_p_ = 0;
  std::vector<LinialkDebug> debug_;
};

inline LinialkResult linialk_overcount_run(const Graph& g, int k, Bandwidth bw) {
  auto sim = LinialkSim::from_ids(g, k);
  return sim.run(bw);
}

// ---------------------------------------------------------------------------
// fast distance-k coloring: defective + arbdefective + iterative classes,
// all counting through the exact (BFS-tree gated) convergecast

inline BcastSchedule bcast_schedule_masked(const DistTable& dt, int n, int K, int payload_w,
                                           const std::vector<bool>& origins) {
  BcastSchedule s;
  s.K = K;
  s.idw = id_bits(n);
  s.distw = value_bits(std::uint64_t(K) + 1);
  s.payload_w = payload_w;
  std::vector<std::uint64_t> entries(K, 0);
  std::uint64_t max_entries = 1;
  for (int h = 1; h <= K; ++h) {
    for (int v = 0; v < dt.n(); ++v) {
      std::uint64_t c = 0;
      for (int o = 0; o < dt.n(); ++o)
        if (origins[o] && dt.dist(v, o) == h - 1) ++c;
      entries[h - 1] = std::max(entries[h - 1], c);
    }
    max_entries = std::max(max_entries, entries[h - 1]);
  }
  s.cntw = value_bits(max_entries + 1);
  for (int h = 0; h < K; ++h)
    s.phase_bits.push_back(entries[h] == 0 ? 0 : s.cntw + entries[h] * s.entry_bits());
  return s;
}

struct FastkParams {
  std::uint64_t d_p = 0;
  std::uint64_t beta = 0;        // conflict-budget scale: ceil(sqrt(3*d_p))
  std::uint64_t q_fk = 0;        // defective field: prime > 12*beta, q^4 >= prior palette
  std::uint64_t q_arb = 0;       // arb pair modulus: prime with q(q-1) >= q_fk^2
  std::uint64_t max_defect = 0;  // = beta
  std::uint64_t arb_cap = 0;     // ceil(2*d_p/max_defect) + 1
  std::uint64_t q_ck = 0;        // iterative field: prime > 16*beta, q^3 >= prior palette
  std::uint64_t prior_palette = 0;
};

inline FastkParams fastk_params(std::uint64_t prior_palette, int delta, int k) {
  FastkParams p;
  p.prior_palette = prior_palette;
  p.d_p = path_count_bound(std::max(1, delta), k);
  std::uint64_t b = 1;
  while (b * b < 3 * p.d_p) ++b;
  p.beta = b;
  p.q_fk = smallest_prime_above(12 * p.beta);
  while (!linial2::detail::pow_at_least(p.q_fk, 4, prior_palette))
    p.q_fk = smallest_prime_above(p.q_fk);
  p.q_arb = smallest_prime_above(1);
  while (p.q_arb * (p.q_arb - 1) < p.q_fk * p.q_fk)
    p.q_arb = smallest_prime_above(p.q_arb);
  p.max_defect = p.beta;
  p.arb_cap = div_ceil(2 * p.d_p, p.max_defect) + 1;
  p.q_ck = smallest_prime_above(16 * p.beta);
  while (!linial2::detail::pow_at_least(p.q_ck, 3, prior_palette))
    p.q_ck = smallest_prime_above(p.q_ck);
  return p;
}

struct FastkStageA {
  std::vector<std::uint64_t> defective;  // <t,p(t)> over q_fk
  std::vector<std::uint64_t> classes;    // arb b values
  std::vector<std::uint64_t> rounds;     // arb finalize rounds
  RoundTrace trace;
};

namespace detail {

/// defective + arbdefective stages in one engine run with one preprocessing
class FastkStageASim {
 public:
  FastkStageASim(const Graph& g, int k, std::vector<std::uint64_t> priors, FastkParams p)
      : g_(g), k_(k), priors_(std::move(priors)), p_(p), dt_(g) {
    const int K = khalf(k);
    adjs_ = adj_schedule(g, dt_, K);
    trs_ = tree_schedule(g, dt_, K);
    const int prw = value_bits(std::max<std::uint64_t>(p_.prior_palette, 2));
    const int rgw = value_bits(p_.q_fk);
    def_bs_ = bcast_schedule(dt_, g.n(), K, prw + 2 * rgw);
    std::vector<bool> all(g.n(), true);
    def_cs_ = conv_schedule(dt_, g.n(), K,
                            2 * value_bits(3 * p_.d_p + 1), all);
    const int aw = value_bits(p_.q_arb + 1);
    const int bw_ = value_bits(p_.q_arb);
    arb_bs_ = bcast_schedule(dt_, g.n(), K, aw + bw_);
    arb_cs_ = conv_schedule(dt_, g.n(), K, value_bits(p_.d_p + 1), all);
    def_out_.resize(g.n());
    class_out_.resize(g.n());
    round_out_.resize(g.n());
    failed_.assign(g.n(), false);
  }

  FastkStageA run(Bandwidth bw) {
    std::uint64_t cap = 4000;
    auto add = [&](const std::vector<std::uint64_t>& bits, std::uint64_t times) {
      for (auto b : bits) cap += times * (stream_rounds(b, bw) + 1);
    };
    add(adjs_.phase_bits, 10);
    add(trs_.phase_bits, 10);
    add(def_bs_.phase_bits, 10 * (ceil_log2(p_.q_fk) + 1));
    add(def_cs_.phase_bits, 10 * (ceil_log2(p_.q_fk) + 1));
    add(arb_bs_.phase_bits, 10 * (p_.arb_cap + 1));
    add(arb_cs_.phase_bits, 10 * (p_.arb_cap + 1));
    auto procs = make_processes(g_.n(), [this](int v) -> CoroVertex::Body {
      return [this, v](ProcCtx& ctx) { return body(ctx, v); };
    });
    auto trace = congestsim::run(g_, procs, bw, cap);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("fastk stage A: engine round cap reached");
    for (int v = 0; v < g_.n(); ++v)
      if (failed_[v]) throw RoundCapError("fastk arb: vertex exceeded the phase cap");
    FastkStageA out;
    out.defective = def_out_;
    out.classes = class_out_;
    out.rounds = round_out_;
    out.trace = std::move(trace);
    return out;
  }

 private:
  Task<void> body(ProcCtx& ctx, int v) {
    Preproc pre = co_await bfs_preprocess_k(ctx, adjs_, trs_);
    auto duty = exact_duties(pre, ctx.id(), k_);
    auto routes = tree_routes(pre, ctx);
    // group duties by target for cheap folding
    std::map<int, std::vector<int>> duty_by_target;
    for (auto& [t, u] : duty) duty_by_target[t].push_back(u);

    // ---- defective stage: binary search on the evaluation point ----------
    const std::uint64_t q = p_.q_fk;
    const int prw = value_bits(std::max<std::uint64_t>(p_.prior_palette, 2));
    const int rgw = value_bits(q);
    auto poly_of = [&](std::uint64_t c) {
      std::vector<std::uint64_t> coeff(4);
      for (int j = 0; j < 4; ++j) {
        coeff[j] = c % q;
        c /= q;
      }
      return coeff;
    };
    AggOps dagg = packed_add_ops(3 * p_.d_p);
    PackedPair dpp{3 * p_.d_p};
    std::uint64_t lo = 0, hi = q - 1;
    const int dphases = ceil_log2(q);
    for (int ph = 0; ph < dphases; ++ph) {
      BitString payload;
      payload.append_uint(priors_[v], prw);
      payload.append_uint(lo, rgw);
      payload.append_uint(hi, rgw);
      Ball ball = co_await broadcast_khalf(ctx, std::move(payload), def_bs_);
      struct St {
        std::uint64_t prior, lo, hi;
      };
      std::map<int, St> st;
      for (auto& e : ball.entries) {
        BitReader r(e.payload);
        st[e.origin] = {r.read_uint(prw), r.read_uint(rgw), r.read_uint(rgw)};
      }
      auto initial = [&](int ti) {
        int tv = ball.entries[ti].origin;
        std::uint64_t acc = dagg.init;
        auto it = duty_by_target.find(tv);
        if (it == duty_by_target.end()) return acc;
        auto& t_st = st.at(tv);
        auto pv = poly_of(t_st.prior);
        const std::uint64_t mid = (t_st.lo + t_st.hi) / 2;
        for (int u : it->second) {
          auto pu = poly_of(st.at(u).prior);
          std::uint64_t cl = 0, cr = 0;
          for (std::uint64_t t = t_st.lo; t <= t_st.hi; ++t)
            if (linial2::poly_eval(pv, t, q) == linial2::poly_eval(pu, t, q)) {
              if (t <= mid)
                ++cl;
              else
                ++cr;
            }
          acc = dagg.op(acc, dpp.pack(cl, cr));
        }
        return acc;
      };
      std::uint64_t folded = co_await convergecast_khalf(
          ctx, ball, dagg, [](int) { return true; }, initial, &routes, def_cs_);
      auto [sum_l, sum_r] = dpp.unpack(folded);
      const std::uint64_t mid = (lo + hi) / 2;
      if (sum_l <= sum_r)
        hi = mid;
      else
        lo = mid + 1;
    }
    if (lo != hi) throw EngineError("fastk defective: range did not close");
    def_out_[v] = lo * q + linial2::poly_eval(poly_of(priors_[v]), lo, q);

    // ---- arbdefective stage: counted conflicts against a threshold -------
    const std::uint64_t qa = p_.q_arb;
    const int aw = value_bits(qa + 1);
    const int bw_ = value_bits(qa);
    std::uint64_t a = def_out_[v] / qa + 1, b = def_out_[v] % qa;
    AggOps cagg = saturating_add_ops(p_.d_p);
    std::uint64_t my_round = 0;
    for (std::uint64_t phase = 1; phase <= p_.arb_cap; ++phase) {
      BitString payload;
      payload.append_uint(a, aw);
      payload.append_uint(b, bw_);
      Ball ball = co_await broadcast_khalf(ctx, std::move(payload), arb_bs_);
      struct St {
        std::uint64_t a, b;
      };
      std::map<int, St> st;
      for (auto& e : ball.entries) {
        BitReader r(e.payload);
        st[e.origin] = {r.read_uint(aw), r.read_uint(bw_)};
      }
      auto initial = [&](int ti) {
        int tv = ball.entries[ti].origin;
        std::uint64_t acc = cagg.init;
        auto it = duty_by_target.find(tv);
        if (it == duty_by_target.end()) return acc;
        for (int u : it->second)
          if (st.at(u).b == st.at(tv).b) acc = cagg.op(acc, 1);
        return acc;
      };
      std::uint64_t total = co_await convergecast_khalf(
          ctx, ball, cagg, [](int) { return true; }, initial, &routes, arb_cs_);
      if (a != 0) {
        if (total <= p_.max_defect) {
          a = 0;
          my_round = phase;
        } else {
          b = (a + b) % qa;
        }
      }
    }
    if (a != 0) failed_[v] = true;
    class_out_[v] = b;
    round_out_[v] = my_round;
    ctx.set_output(b);
    co_return;
  }

  const Graph& g_;
  int k_;
  std::vector<std::uint64_t> priors_;
  FastkParams p_;
  DistTable dt_;
  AdjSchedule adjs_;
  TreeSchedule trs_;
  BcastSchedule def_bs_, arb_bs_;
  ConvSchedule def_cs_, arb_cs_;
  std::vector<std::uint64_t> def_out_, class_out_, round_out_;
  std::vector<bool> failed_;
};

/// iterative class-by-class proper coloring, exact counting throughout;
/// choice bits are broadcast so every potential injector mirrors the live
/// ranges, and finished classes' colors are derived locally from them
class FastkStageBSim {
 public:
  FastkStageBSim(const Graph& g, int k, std::vector<std::uint64_t> priors,
                 std::vector<std::uint64_t> classes, std::vector<std::uint64_t> rounds,
                 FastkParams p)
      : g_(g),
        k_(k),
        priors_(std::move(priors)),
        classes_(std::move(classes)),
        rounds_(std::move(rounds)),
        p_(p),
        dt_(g) {
    const int K = khalf(k);
    adjs_ = adj_schedule(g, dt_, K);
    trs_ = tree_schedule(g, dt_, K);
    const int prw = value_bits(std::max<std::uint64_t>(p_.prior_palette, 2));
    const int clw = value_bits(p_.q_arb);
    const int row = value_bits(p_.arb_cap + 2);
    bundle_bs_ = bcast_schedule(dt_, g.n(), K, prw + clw + row);
    // per-class schedules: choice-bit broadcasts and count convergecasts
    for (std::uint64_t c = 0; c < p_.q_arb; ++c) {
      std::vector<bool> members(g.n(), false);
      bool any = false;
      for (int v = 0; v < g.n(); ++v)
        if (classes_[v] == c) {
          members[v] = true;
          any = true;
        }
      class_bs_.push_back(bcast_schedule_masked(dt_, g.n(), K, 1, members));
      class_cs_.push_back(conv_schedule(dt_, g.n(), K,
                                        2 * value_bits(3 * p_.max_defect + p_.d_p + 1),
                                        members));
      class_occupied_.push_back(any);
    }
  }

  std::vector<std::uint64_t> colors;
  RoundTrace trace;

  void run(Bandwidth bw) {
    std::uint64_t cap = 4000;
    auto add = [&](const std::vector<std::uint64_t>& bits, std::uint64_t times) {
      for (auto b : bits) cap += times * (stream_rounds(b, bw) + 1);
    };
    add(adjs_.phase_bits, 10);
    add(trs_.phase_bits, 10);
    add(bundle_bs_.phase_bits, 10);
    const std::uint64_t phases = 2 * (ceil_log2(p_.q_ck) + 1);
    for (std::uint64_t c = 0; c < p_.q_arb; ++c) {
      add(class_bs_[c].phase_bits, 10 * phases);
      add(class_cs_[c].phase_bits, 10 * phases);
    }
    auto procs = make_processes(g_.n(), [this](int v) -> CoroVertex::Body {
      return [this, v](ProcCtx& ctx) { return body(ctx, v); };
    });
    trace = congestsim::run(g_, procs, bw, cap);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("fastk stage B: engine round cap reached");
    colors.assign(trace.outputs.begin(), trace.outputs.end());
  }

 private:
  struct Member {  // tracked knowledge about an active class member
    std::uint64_t lo = 0, hi = 0;
    std::uint64_t j = 0;  // fixed after the j-search
  };

  Task<void> body(ProcCtx& ctx, int v) {
    const std::uint64_t qc = p_.q_ck;
    const int K = khalf(k_);
    (void)K;
    Preproc pre = co_await detail::bfs_preprocess_k(ctx, adjs_, trs_);
    auto duty = exact_duties(pre, ctx.id(), k_);
    auto routes = tree_routes(pre, ctx);
    std::map<int, std::vector<int>> duty_by_target;
    for (auto& [t, u] : duty) duty_by_target[t].push_back(u);

    // static bundles of the whole ball
    const int prw = value_bits(std::max<std::uint64_t>(p_.prior_palette, 2));
    const int clw = value_bits(p_.q_arb);
    const int row = value_bits(p_.arb_cap + 2);
    BitString bundle;
    bundle.append_uint(priors_[v], prw);
    bundle.append_uint(classes_[v], clw);
    bundle.append_uint(rounds_[v], row);
    Ball ball = co_await detail::broadcast_khalf(ctx, std::move(bundle), bundle_bs_);
    struct Info {
      std::uint64_t prior, cls, round;
      std::vector<std::uint64_t> base;  // degree-3 family base from the prior
      bool decided = false;
      std::uint64_t t = 0, y = 0;  // final color once decided
    };
    std::map<int, Info> info;
    for (auto& e : ball.entries) {
      BitReader r(e.payload);
      Info f;
      f.prior = r.read_uint(prw);
      f.cls = r.read_uint(clw);
      f.round = r.read_uint(row);
      f.base = {0, f.prior % qc, (f.prior / qc) % qc, (f.prior / (qc * qc)) % qc};
      info[e.origin] = std::move(f);
    }
    auto eval = [&](const Info& f, std::uint64_t j, std::uint64_t x) {
      return (linial2::poly_eval(f.base, x, qc) + j) % qc;
    };
    auto earlier = [&](int a, int b) {  // parent order inside a class
      const Info &fa = info.at(a), &fb = info.at(b);
      if (fa.round != fb.round) return fa.round < fb.round;
      return a < b;
    };

    const int phases = ceil_log2(qc);
    AggOps agg = packed_add_ops(3 * p_.max_defect + p_.d_p);
    PackedPair pp{3 * p_.max_defect + p_.d_p};
    std::uint64_t my_color = 0;
    bool decided = false;

    for (std::uint64_t cls = 0; cls < p_.q_arb; ++cls) {
      if (!class_occupied_[cls]) continue;
      const bool active = !decided && classes_[v] == cls;
      std::map<int, Member> members;  // active class members in my ball
      for (auto& [o, f] : info)
        if (f.cls == cls && !f.decided) members[o] = Member{0, qc - 1, 0};
      auto is_target = [&](int o) { return members.count(o) != 0; };

      for (int search = 0; search < 2; ++search) {
        for (auto& [o, m] : members) {
          m.lo = 0;
          m.hi = qc - 1;
        }
        for (int ph = 0; ph < phases; ++ph) {
          auto initial = [&](int ti) {
            int tv = ball.entries[ti].origin;
            std::uint64_t acc = agg.init;
            auto mit = members.find(tv);
            auto dit = duty_by_target.find(tv);
            if (mit == members.end() || dit == duty_by_target.end()) return acc;
            const Member& tm = mit->second;
            const Info& tf = info.at(tv);
            const std::uint64_t mid = (tm.lo + tm.hi) / 2;
            for (int u : dit->second) {
              const Info& uf = info.at(u);
              std::uint64_t cl = 0, cr = 0;
              if (search == 0) {
                // hits of finalized colors on the j family
                if (uf.decided) {
                  std::uint64_t jh =
                      (uf.y + qc - linial2::poly_eval(tf.base, uf.t, qc)) % qc;
                  if (jh >= tm.lo && jh <= mid)
                    ++cl;
                  else if (jh > mid && jh <= tm.hi)
                    ++cr;
                }
              } else {
                if (uf.decided) {
                  // final color hits the chosen polynomial at one point
                  std::uint64_t t = uf.t;
                  if (t >= tm.lo && t <= tm.hi && eval(tf, tm.j, t) == uf.y) {
                    if (t <= mid)
                      ++cl;
                    else
                      ++cr;
                  }
                } else if (members.count(u) && earlier(u, tv)) {
                  // an active parent: dodge its whole chosen polynomial
                  const Member& um = members.at(u);
                  for (std::uint64_t t = tm.lo; t <= tm.hi; ++t)
                    if (eval(tf, tm.j, t) == eval(uf, um.j, t)) {
                      if (t <= mid)
                        ++cl;
                      else
                        ++cr;
                    }
                }
              }
              acc = agg.op(acc, pp.pack(cl, cr));
            }
            return acc;
          };
          std::uint64_t folded = co_await detail::convergecast_khalf(
              ctx, ball, agg, is_target, initial, &routes, class_cs_[cls]);
          bool go_left = true;
          if (active) {
            auto [sum_l, sum_r] = pp.unpack(folded);
            Member& me = members.at(ctx.id());
            if (search == 1 && sum_l + sum_r >= me.hi - me.lo + 1)
              throw NoFreeElementError("fastk iterative: conflicts reached range width");
            go_left = sum_l <= sum_r;
          }
          // everyone relays the actives' choice bits
          Ball bits = co_await detail::broadcast_khalf(
              ctx, enc_value(go_left ? 0 : 1, 1), class_bs_[cls], active);
          for (auto& e : bits.entries) {
            auto mit = members.find(e.origin);
            if (mit == members.end()) continue;
            BitReader r(e.payload);
            Member& m = mit->second;
            const std::uint64_t mid = (m.lo + m.hi) / 2;
            if (r.read_uint(1) == 0)
              m.hi = mid;
            else
              m.lo = mid + 1;
          }
        }
        if (search == 0)
          for (auto& [o, m] : members) {
            if (m.lo != m.hi) throw EngineError("fastk iterative: j range did not close");
            m.j = m.lo;
          }
      }
      // the class is done: derive every member's color locally
      for (auto& [o, m] : members) {
        if (m.lo != m.hi) throw EngineError("fastk iterative: t range did not close");
        Info& f = info.at(o);
        f.decided = true;
        f.t = m.lo;
        f.y = eval(f, m.j, m.lo);
        if (o == ctx.id()) {
          decided = true;
          my_color = f.t * qc + f.y;
        }
      }
    }
    if (!decided) throw EngineError("fastk iterative: vertex never decided");
    ctx.set_output(my_color);
    co_return;
  }

  const Graph& g_;
  int k_;
  std::vector<std::uint64_t> priors_, classes_, rounds_;
  FastkParams p_;
  DistTable dt_;
  AdjSchedule adjs_;
  TreeSchedule trs_;
  BcastSchedule bundle_bs_;
  std::vector<BcastSchedule> class_bs_;
  std::vector<ConvSchedule> class_cs_;
  std::vector<bool> class_occupied_;
};

}  // namespace detail

struct FastkResult {
  std::vector<std::uint64_t> colors;
  std::uint64_t palette = 0;
  FastkParams params;
  LinialkResult linialk;
  FastkStageA stage_a;
  std::uint64_t total_rounds = 0;
  std::uint64_t total_bits = 0;
  std::uint64_t stage_b_rounds = 0;
};

inline FastkResult fastcolor_k_run(const Graph& g, int k, Bandwidth bw) {
  FastkResult res;
  res.linialk = linialk_overcount_run(g, k, bw);
  res.params = fastk_params(res.linialk.palette, g.max_degree(), k);
  detail::FastkStageASim a(g, k, res.linialk.colors, res.params);
  res.stage_a = a.run(bw);
  detail::FastkStageBSim b(g, k, res.linialk.colors, res.stage_a.classes,
                           res.stage_a.rounds, res.params);
  b.run(bw);
  res.colors = std::move(b.colors);
  res.palette = res.params.q_ck * res.params.q_ck;
  res.stage_b_rounds = b.trace.rounds_elapsed;
  res.total_rounds = res.linialk.trace.rounds_elapsed + res.stage_a.trace.rounds_elapsed +
                     b.trace.rounds_elapsed;
  res.total_bits =
      res.linialk.trace.total_bits + res.stage_a.trace.total_bits + b.trace.total_bits;
  return res;
}

// ---------------------------------------------------------------------------
// MIS of G^k: color classes fire in turn; a k-hop counter broadcast makes the
// winners' neighborhoods stand down

struct MisResult {
  std::set<int> mis;
  std::uint64_t palette = 0;           // iterations = palette of the coloring
  std::uint64_t coloring_rounds = 0;
  std::uint64_t broadcast_rounds = 0;  // the MIS phase alone
  std::uint64_t broadcast_logical_rounds_per_iteration = 0;
  RoundTrace trace;                    // the MIS phase
  std::vector<std::uint64_t> colors;
};

inline MisResult mis_k_run(const Graph& g, int k, Bandwidth bw) {
  MisResult res;
  auto lin = linialk_overcount_run(g, k, bw);
  auto params = agk_params(lin.palette, g.max_degree(), k);
  auto agk = agk_coloring_run(g, k, lin.colors, params, bw);
  res.colors = agk.colors;
  res.palette = params.q;
  res.coloring_rounds = lin.trace.rounds_elapsed + agk.trace.rounds_elapsed;
  res.broadcast_logical_rounds_per_iteration = std::uint64_t(k);

  const int idw = id_bits(g.n());
  auto procs = make_processes(g.n(), [&](int v) -> CoroVertex::Body {
    return [&, v](ProcCtx& ctx) -> Task<void> {
      bool decided = false, joined = false;
      for (std::uint64_t color = 0; color < res.palette; ++color) {
        std::optional<std::uint64_t> pending;
        if (!decided && res.colors[v] == color) {
          decided = true;
          joined = true;
          pending = std::uint64_t(ctx.id());
        }
        for (int r = 1; r <= k; ++r) {
          BitString payload;
          if (pending) payload.append_uint(*pending, idw);
          auto in = co_await ctx.exchange_all(payload, stream_rounds(idw, ctx.bw()));
          std::optional<std::uint64_t> best;
          for (auto& m : in) {
            if (m.empty()) continue;
            BitReader rr(m);
            std::uint64_t o = rr.read_uint(idw);
            if (!best || o < *best) best = o;
          }
          if (best) {
            if (!decided) decided = true;  // stands down, never joins
            pending = (r < k) ? best : std::nullopt;
          } else {
            pending = std::nullopt;
          }
        }
      }
      ctx.set_output(joined ? 1 : 0);
      co_return;
    };
  });
  std::uint64_t cap = 1000 + 10 * res.palette * std::uint64_t(k) *
                                 (stream_rounds(idw, bw) + 1);
  res.trace = congestsim::run(g, procs, bw, cap);
  if (res.trace.outcome != RoundTrace::Outcome::completed)
    throw RoundCapError("misk: engine round cap reached");
  res.broadcast_rounds = res.trace.rounds_elapsed;
  for (int v = 0; v < g.n(); ++v)
    if (res.trace.outputs[v]) res.mis.insert(v);
  return res;
}

/// Over-counting probe: multiplicity of the (v, u0) token at every v.
inline std::vector<std::uint64_t> overcount_multiplicity(const Graph& g, int k, int u0,
                                                         Bandwidth bw) {
  const int K = khalf(k);
  DistTable dt(g);
  auto bs = bcast_schedule(dt, g.n(), K, 0);
  std::uint64_t dp = path_count_bound(std::max(1, g.max_degree()), k);
  AggOps agg = saturating_add_ops(4 * dp);
  std::vector<bool> all(g.n(), true);
  auto cs = conv_schedule(dt, g.n(), K, agg.value_width(), all);

  auto procs = make_processes(g.n(), [&](int) -> CoroVertex::Body {
    return [&](ProcCtx& ctx) -> Task<void> {
      Ball ball = co_await detail::broadcast_khalf(ctx, BitString{}, bs);
      auto initial = [&](int ti) {
        std::uint64_t acc = agg.init;
        for (std::size_t ui = 0; ui < ball.entries.size(); ++ui) {
          if (static_cast<int>(ui) == ti) continue;
          if (ball.entries[ti].dist + ball.entries[ui].dist > k) continue;
          if (ball.entries[ui].origin == u0) acc = agg.op(acc, 1);
        }
        return acc;
      };
      std::uint64_t out = co_await detail::convergecast_khalf(
          ctx, ball, agg, [](int) { return true; }, initial, nullptr, cs);
      ctx.set_output(out);
      co_return;
    };
  });
  std::uint64_t cap = 2000;
  for (auto b : bs.phase_bits) cap += 10 * stream_rounds(b, bw);
  for (auto b : cs.phase_bits) cap += 10 * stream_rounds(b, bw);
  auto trace = congestsim::run(g, procs, bw, cap);
  if (trace.outcome != RoundTrace::Outcome::completed)
    throw RoundCapError("overcount probe: engine round cap reached");
  return trace.outputs;
}

}  // namespace congestsim::powerk
