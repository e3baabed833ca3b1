#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

#include "congestsim/ag2.hpp"
#include "congestsim/engine.hpp"
#include "congestsim/errors.hpp"
#include "congestsim/graph.hpp"
#include "congestsim/linial2.hpp"
#include "congestsim/process.hpp"

// The fast distance-2 coloring pipeline: proxy setup, O(Delta)-defective
// coloring through degree-3 polynomials, AG-style arbdefective coloring, and
// the class-by-class iterative proper coloring. Proxies give every 2-hop pair
// a unique relay, so every conflict is counted exactly once.

namespace congestsim::fastcolor2 {

using ag2::ColorPair;

// ---------------------------------------------------------------------------
// parameters

struct DefectiveParams {
  std::uint64_t q = 0;  // prime > 12*Delta with q^4 >= input palette
  std::uint64_t input_palette = 0;
};

inline DefectiveParams defective_params(std::uint64_t input_palette, int delta) {
  std::uint64_t q = smallest_prime_above(12 * std::uint64_t(std::max(delta, 1)));
  while (!linial2::detail::pow_at_least(q, 4, input_palette)) q = smallest_prime_above(q);
  return {q, input_palette};
}

struct ArbParams {
  std::uint64_t qp = 0;  // pair modulus: smallest prime with qp*(qp-1) >= palette
  std::uint64_t input_palette = 0;
  std::uint64_t max_defect = 0;
  std::uint64_t phase_cap = 0;  // ceil(2*Delta^2 / max_defect) + 1
};

inline ArbParams arb_params(std::uint64_t input_palette, int delta, std::uint64_t max_defect) {
  if (max_defect < 1) throw std::invalid_argument("max_defect must be >= 1");
  std::uint64_t qp = smallest_prime_above(1);
  while (qp * (qp - 1) < input_palette) qp = smallest_prime_above(qp);
  std::uint64_t dd = std::uint64_t(delta) * std::uint64_t(delta);
  return {qp, input_palette, max_defect, div_ceil(2 * dd, max_defect) + 1};
}

/// Pair encoding for the arbdefective phase; a stays nonzero so every vertex
/// advances until its conflict count clears the threshold.
inline ColorPair arb_encode(std::uint64_t color, const ArbParams& p) {
  return ColorPair{color / p.qp + 1, color % p.qp};
}

struct IterParams {
  std::uint64_t qc = 0;  // prime > 16*max(Delta, max_defect), qc^3 >= prior palette
  std::uint64_t prior_palette = 0;
  std::uint64_t max_defect = 0;
  std::uint64_t classes = 0;    // arb classes to iterate (the arb pair modulus)
  std::uint64_t round_cap = 0;  // upper bound on arb finalize rounds, for encoding
};

inline IterParams iter_params(std::uint64_t prior_palette, int delta, std::uint64_t max_defect,
                              std::uint64_t classes, std::uint64_t round_cap) {
  std::uint64_t qc =
      smallest_prime_above(16 * std::max<std::uint64_t>(std::uint64_t(delta), max_defect));
  while (!linial2::detail::pow_at_least(qc, 3, prior_palette)) qc = smallest_prime_above(qc);
  return {qc, prior_palette, max_defect, classes, round_cap};
}

// ---------------------------------------------------------------------------
// local operations

/// Procedure number-of-conflicts: how many pairs share our b value.
inline std::uint64_t number_of_conflicts(const ColorPair& own,
                                         const std::vector<ColorPair>& others) {
  std::uint64_t n = 0;
  for (auto& o : others)
    if (o.b == own.b) ++n;
  return n;
}

struct ArbRecord {
  int id = 0;
  std::uint64_t class_b = 0;
  std::uint64_t finalize_round = 0;
};

/// True iff u is the parent of v: earlier finalize round, ties to lower ID.
inline bool parent_of(const ArbRecord& u, const ArbRecord& v) {
  if (u.finalize_round != v.finalize_round) return u.finalize_round < v.finalize_round;
  return u.id < v.id;
}

// ---------------------------------------------------------------------------
// distributed local view (proxy setup)

struct LocalView {
  std::vector<std::vector<int>> nbr_adj;  // adjacency list of each neighbor
  // owned[i]: indices j of my neighbors for which I am the proxy of the pair
  // (neighbor i, my neighbor j); excludes 1-hop pairs, never contains i
  std::vector<std::vector<int>> owned;
  std::uint64_t setup_rounds = 0;
};

namespace detail {

inline int min_common(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return a[i];
    if (a[i] < b[j])
      ++i;
    else
      ++j;
  }
  return -1;
}

inline bool contains(const std::vector<int>& sorted, int x) {
  return std::binary_search(sorted.begin(), sorted.end(), x);
}

/// Every vertex streams its adjacency list; afterwards each vertex knows the
/// neighborhood of each neighbor and derives the proxy pairs it owns.
inline Task<LocalView> setup_local_view(ProcCtx& ctx) {
  const int deg = ctx.degree();
  const int idw = id_bits(ctx.n());
  const int degw = value_bits(std::uint64_t(ctx.delta()) + 1);
  BitString msg;
  msg.append_uint(std::uint64_t(deg), degw);
  for (int i = 0; i < deg; ++i) msg.append_uint(std::uint64_t(ctx.neighbor(i)), idw);
  const std::uint64_t rounds =
      stream_rounds(degw + std::uint64_t(ctx.delta()) * idw, ctx.bw());
  auto in = co_await ctx.exchange_all(msg, rounds);

  LocalView view;
  view.setup_rounds = rounds;
  view.nbr_adj.resize(deg);
  for (int i = 0; i < deg; ++i) {
    BitReader r(in[i]);
    std::uint64_t d = r.read_uint(degw);
    for (std::uint64_t t = 0; t < d; ++t)
      view.nbr_adj[i].push_back(static_cast<int>(r.read_uint(idw)));
  }
  std::vector<int> my_adj(ctx.neighbors().begin(), ctx.neighbors().end());
  view.owned.resize(deg);
  for (int i = 0; i < deg; ++i) {
    const int v = ctx.neighbor(i);
    for (int j = 0; j < deg; ++j) {
      if (j == i) continue;
      const int w = ctx.neighbor(j);
      if (contains(view.nbr_adj[i], w)) continue;  // distance 1 from v
      if (min_common(view.nbr_adj[i], view.nbr_adj[j]) == ctx.id())
        view.owned[i].push_back(j);
    }
  }
  co_return view;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// defective coloring (degree-3 polynomial binary search)

struct DefDebug {
  std::vector<linial2::PhaseStats> phases;
  std::uint64_t color = 0;
};

namespace detail {

inline std::uint64_t roots_in(const std::vector<std::uint64_t>& pa,
                              const std::vector<std::uint64_t>& pb, std::uint64_t q,
                              std::uint64_t lo, std::uint64_t hi) {
  std::uint64_t cnt = 0;
  for (std::uint64_t t = lo; t <= hi && t < q; ++t)
    if (linial2::poly_eval(pa, t, q) == linial2::poly_eval(pb, t, q)) ++cnt;
  return cnt;
}

/// Binary search on the evaluation point; helpers report per-half root counts
/// over the pairs they own (plus themselves), so counting is exact.
inline Task<std::uint64_t> defective_search(ProcCtx& ctx, const LocalView& view,
                                            const DefectiveParams& p, std::uint64_t my_color,
                                            const std::vector<std::uint64_t>& nbr_colors,
                                            DefDebug* dbg) {
  const int deg = ctx.degree();
  const std::uint64_t q = p.q;
  const int cw = value_bits(3 * std::uint64_t(ctx.delta()) + 1);
  auto poly_of = [&](std::uint64_t c) {
    std::vector<std::uint64_t> coeff(4);
    for (int j = 0; j < 4; ++j) {
      coeff[j] = c % q;
      c /= q;
    }
    return coeff;
  };
  auto my_poly = poly_of(my_color);
  std::vector<std::vector<std::uint64_t>> nbr_poly(deg);
  for (int i = 0; i < deg; ++i) nbr_poly[i] = poly_of(nbr_colors[i]);

  std::uint64_t lo = 0, hi = q - 1;
  std::vector<std::uint64_t> nlo(deg, 0), nhi(deg, q - 1);
  while (lo < hi) {
    std::vector<BitString> reports(deg);
    for (int i = 0; i < deg; ++i) {
      std::uint64_t mid = (nlo[i] + nhi[i]) / 2;
      std::uint64_t cl = roots_in(nbr_poly[i], my_poly, q, nlo[i], mid);
      std::uint64_t cr = roots_in(nbr_poly[i], my_poly, q, mid + 1, nhi[i]);
      for (int j : view.owned[i]) {
        cl += roots_in(nbr_poly[i], nbr_poly[j], q, nlo[i], mid);
        cr += roots_in(nbr_poly[i], nbr_poly[j], q, mid + 1, nhi[i]);
      }
      BitString b;
      b.append_uint(cl, cw);
      b.append_uint(cr, cw);
      reports[i] = std::move(b);
    }
    auto in = co_await ctx.exchange(std::move(reports), stream_rounds(2 * cw, ctx.bw()));
    std::uint64_t sum_l = 0, sum_r = 0;
    for (int i = 0; i < deg; ++i) {
      BitReader r(in[i]);
      sum_l += r.read_uint(cw);
      sum_r += r.read_uint(cw);
    }
    const std::uint64_t mid = (lo + hi) / 2;
    bool go_left = sum_l <= sum_r;
    if (dbg) dbg->phases.push_back({sum_l, sum_r, hi - lo + 1, go_left});
    if (go_left)
      hi = mid;
    else
      lo = mid + 1;
    auto bits = co_await ctx.exchange_all(enc_value(go_left ? 0 : 1, 1), 1);
    for (int i = 0; i < deg; ++i) {
      std::uint64_t nm = (nlo[i] + nhi[i]) / 2;
      if (*dec_value(bits[i], 1) == 0)
        nhi[i] = nm;
      else
        nlo[i] = nm + 1;
    }
  }
  std::uint64_t out = lo * q + linial2::poly_eval(my_poly, lo, q);
  if (dbg) dbg->color = out;
  co_return out;
}

}  // namespace detail

struct DefectiveResult {
  std::vector<std::uint64_t> colors;  // <t, p(t)> encoded as t*q + p(t)
  DefectiveParams params;
  RoundTrace trace;
  std::uint64_t setup_rounds = 0;
};

class DefectiveSim {
 public:
  DefectiveSim(const Graph& g, std::vector<std::uint64_t> input, DefectiveParams params)
      : g_(g), input_(std::move(input)), params_(params), debug_(g.n()) {}

  const std::vector<DefDebug>& debug() const { return debug_; }

  DefectiveResult run(Bandwidth bw, const RoundObserver& obs = {}) {
    auto procs = make_processes(g_.n(), [this](int v) -> CoroVertex::Body {
      return [this, v](ProcCtx& ctx) { return body(ctx, v); };
    });
    std::uint64_t cap = 1000 + 100 * (std::uint64_t(g_.max_degree()) + 1) *
                                   (ceil_log2(params_.q) + 2);
    auto trace = congestsim::run(g_, procs, bw, cap, obs);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("defective2: engine round cap reached");
    DefectiveResult res;
    res.params = params_;
    res.setup_rounds = setup_rounds_;
    res.colors.assign(trace.outputs.begin(), trace.outputs.end());
    res.trace = std::move(trace);
    return res;
  }

 private:
  Task<void> body(ProcCtx& ctx, int v) {
    LocalView view = co_await detail::setup_local_view(ctx);
    const int cw = value_bits(std::max<std::uint64_t>(params_.input_palette, 2));
    auto in = co_await ctx.exchange_all(enc_value(input_[v], cw), stream_rounds(cw, ctx.bw()));
    std::vector<std::uint64_t> nbr_colors(ctx.degree());
    for (int i = 0; i < ctx.degree(); ++i) nbr_colors[i] = *dec_value(in[i], cw);
    setup_rounds_ = ctx.round();
    ctx.mark("setup_end");
    std::uint64_t c = co_await detail::defective_search(ctx, view, params_, input_[v],
                                                        nbr_colors, &debug_[v]);
    ctx.set_output(c);
    co_return;
  }

  const Graph& g_;
  std::vector<std::uint64_t> input_;
  DefectiveParams params_;
  std::vector<DefDebug> debug_;
  std::uint64_t setup_rounds_ = 0;
};

inline DefectiveResult defective2_run(const Graph& g, std::vector<std::uint64_t> input,
                                      std::uint64_t input_palette, Bandwidth bw) {
  DefectiveSim sim(g, std::move(input), defective_params(input_palette, g.max_degree()));
  return sim.run(bw);
}

// ---------------------------------------------------------------------------
// arbdefective coloring (Algorithm 6 style phases over proxies)

struct ArbDebug {
  ColorPair pair;
  std::uint64_t finalize_round = 0;
  std::uint64_t conflicts_at_finalize = 0;
  bool failed = false;
};

struct ArbResult {
  std::vector<std::uint64_t> classes;  // final b values
  std::vector<ArbRecord> records;
  ArbParams params;
  RoundTrace trace;
  std::uint64_t phases = 0;  // max finalize round
  std::uint64_t setup_rounds = 0;
};

class ArbSim {
 public:
  ArbSim(const Graph& g, std::vector<std::uint64_t> input, ArbParams params)
      : g_(g), input_(std::move(input)), params_(params), debug_(g.n()) {}

  const std::vector<ArbDebug>& debug() const { return debug_; }

  ArbResult run(Bandwidth bw, const RoundObserver& obs = {}) {
    auto procs = make_processes(g_.n(), [this](int v) -> CoroVertex::Body {
      return [this, v](ProcCtx& ctx) { return body(ctx, v); };
    });
    std::uint64_t cap = 1000 + 100 * params_.phase_cap *
                                   (stream_rounds(value_bits(std::uint64_t(g_.max_degree()) *
                                                                 g_.max_degree() + 1), bw) + 1);
    auto trace = congestsim::run(g_, procs, bw, cap, obs);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("arbdefective2: engine round cap reached");
    ArbResult res;
    res.params = params_;
    res.setup_rounds = setup_rounds_;
    res.classes.resize(g_.n());
    res.records.resize(g_.n());
    for (int v = 0; v < g_.n(); ++v) {
      if (debug_[v].failed)
        throw RoundCapError("arbdefective2: vertex exceeded the phase cap");
      res.classes[v] = debug_[v].pair.b;
      res.records[v] = ArbRecord{v, debug_[v].pair.b, debug_[v].finalize_round};
      res.phases = std::max(res.phases, debug_[v].finalize_round);
    }
    res.trace = std::move(trace);
    return res;
  }

 private:
  Task<void> body(ProcCtx& ctx, int v) {
    LocalView view = co_await detail::setup_local_view(ctx);
    const int deg = ctx.degree();
    const std::uint64_t qp = params_.qp;
    const int pw = value_bits(qp);
    const int aw = value_bits(qp + 1);  // a ranges over [1, qp]
    ColorPair me = arb_encode(input_[v], params_);

    BitString pm;
    pm.append_uint(me.a, aw);
    pm.append_uint(me.b, pw);
    auto in = co_await ctx.exchange_all(pm, stream_rounds(std::uint64_t(aw) + pw, ctx.bw()));
    std::vector<ColorPair> mirror(deg);
    for (int i = 0; i < deg; ++i) {
      BitReader r(in[i]);
      mirror[i].a = r.read_uint(aw);
      mirror[i].b = r.read_uint(pw);
    }
    setup_rounds_ = ctx.round();
    ctx.mark("setup_end");

    const int cw = value_bits(std::uint64_t(ctx.delta()) * ctx.delta() + 1);
    std::vector<bool> nbr_done(deg, false);
    std::vector<std::uint64_t> nbr_round(deg, 0);
    bool done = false;
    ArbDebug& dbg = debug_[v];
    dbg.pair = me;

    for (std::uint64_t phase = 1; phase <= params_.phase_cap; ++phase) {
      // helpers: deduplicated same-b counts for every still-active neighbor
      std::vector<BitString> counts(deg);
      for (int i = 0; i < deg; ++i) {
        if (nbr_done[i]) continue;
        std::uint64_t c = (me.b == mirror[i].b) ? 1 : 0;
        for (int j : view.owned[i])
          if (mirror[j].b == mirror[i].b) ++c;
        counts[i] = enc_value(c, cw);
      }
      in = co_await ctx.exchange(std::move(counts), stream_rounds(cw, ctx.bw()));

      bool just_done = false;
      if (!done) {
        std::uint64_t total = 0;
        for (int i = 0; i < deg; ++i)
          if (!in[i].empty()) total += *dec_value(in[i], cw);
        if (total <= params_.max_defect) {
          just_done = true;
          dbg.finalize_round = phase;
          dbg.conflicts_at_finalize = total;
          me = ColorPair{0, me.b};
        } else {
          me = ColorPair{me.a, (me.a + me.b) % qp};
        }
      }
      // done/not-done announcements from vertices active this phase
      std::vector<BitString> ann(deg);
      if (!done)
        for (int i = 0; i < deg; ++i) ann[i] = enc_value(just_done ? 1 : 0, 1);
      in = co_await ctx.exchange(std::move(ann), 1);
      for (int i = 0; i < deg; ++i) {
        if (in[i].empty()) continue;
        if (*dec_value(in[i], 1) != 0) {
          mirror[i] = ColorPair{0, mirror[i].b};
          nbr_done[i] = true;
          nbr_round[i] = phase;
        } else {
          mirror[i] = ColorPair{mirror[i].a, (mirror[i].a + mirror[i].b) % qp};
        }
      }
      if (just_done) done = true;
      dbg.pair = me;
    }
    if (!done) dbg.failed = true;

    // relay the records of my neighbors so finalize orders are 2-hop visible;
    // parent resolution happens per-helper from 1-hop observations, so the
    // receivers cross-check the relayed copies instead
    const int idw = id_bits(ctx.n());
    const int rw = value_bits(params_.phase_cap + 1);
    const int degw = value_bits(std::uint64_t(ctx.delta()) + 1);
    BitString relay;
    relay.append_uint(std::uint64_t(deg), degw);
    for (int i = 0; i < deg; ++i) {
      relay.append_uint(std::uint64_t(ctx.neighbor(i)), idw);
      relay.append_uint(mirror[i].b, pw);
      relay.append_uint(nbr_round[i], rw);
    }
    const std::uint64_t relay_bits =
        degw + std::uint64_t(ctx.delta()) * (idw + pw + rw);
    in = co_await ctx.exchange_all(relay, stream_rounds(relay_bits, ctx.bw()));
    for (int i = 0; i < deg; ++i) {
      BitReader r(in[i]);
      std::uint64_t d = r.read_uint(degw);
      for (std::uint64_t t = 0; t < d; ++t) {
        int wid = static_cast<int>(r.read_uint(idw));
        std::uint64_t wb = r.read_uint(pw);
        std::uint64_t wround = r.read_uint(rw);
        if (wid == ctx.id() && (wb != me.b || wround != dbg.finalize_round))
          throw EngineError("arbdefective2: relayed record disagrees with local state");
      }
    }
    ctx.set_output(me.b);
    co_return;
  }

  const Graph& g_;
  std::vector<std::uint64_t> input_;
  ArbParams params_;
  std::vector<ArbDebug> debug_;
  std::uint64_t setup_rounds_ = 0;
};

inline ArbResult arbdefective2_run(const Graph& g, std::vector<std::uint64_t> input,
                                   std::uint64_t input_palette, std::uint64_t max_defect,
                                   Bandwidth bw) {
  ArbSim sim(g, std::move(input), arb_params(input_palette, g.max_degree(), max_defect));
  return sim.run(bw);
}

// ---------------------------------------------------------------------------
// iterative proper coloring over the arbdefective classes
//
// Every vertex owns the polynomial family { Q(x) + j | j = 0..qc-1 } where
// the coefficients of Q (degree <= 3, zero constant term) are the base-qc
// digits of its prior proper color. Distinct 2-hop vertices therefore hold
// non-identical families, so a child's search can always dodge the full
// chosen polynomial of each of its parents.

struct IterDebug {
  std::uint64_t j = 0;
  std::uint64_t t = 0;
  std::uint64_t color = 0;
  std::uint64_t decided_class = 0;
  std::vector<linial2::PhaseStats> j_phases;
  std::vector<linial2::PhaseStats> t_phases;
};

struct IterResult {
  std::vector<std::uint64_t> colors;  // <t, P(t)> encoded as t*qc + P(t)
  IterParams params;
  RoundTrace trace;
  std::uint64_t setup_rounds = 0;
};

class IterSim {
 public:
  IterSim(const Graph& g, std::vector<std::uint64_t> classes, std::vector<ArbRecord> records,
          std::vector<std::uint64_t> priors, IterParams params)
      : g_(g),
        classes_(std::move(classes)),
        records_(std::move(records)),
        priors_(std::move(priors)),
        params_(params),
        debug_(g.n()) {
    for (auto p : priors_)
      if (!linial2::detail::pow_at_least(params_.qc, 3, p + 1))
        throw std::invalid_argument("prior palette exceeds qc^3");
  }

  const std::vector<IterDebug>& debug() const { return debug_; }

  IterResult run(Bandwidth bw, const RoundObserver& obs = {}) {
    auto procs = make_processes(g_.n(), [this](int v) -> CoroVertex::Body {
      return [this, v](ProcCtx& ctx) { return body(ctx, v); };
    });
    std::uint64_t per_class =
        2 * (ceil_log2(params_.qc) + 1) *
            (stream_rounds(2 * value_bits(3 * std::uint64_t(g_.max_degree()) + 1), bw) + 1) +
        stream_rounds(2 * value_bits(params_.qc), bw) + 2;
    std::uint64_t cap = 1000 + 10 * (params_.classes + 1) * per_class;
    auto trace = congestsim::run(g_, procs, bw, cap, obs);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("iterative2: engine round cap reached");
    IterResult res;
    res.params = params_;
    res.setup_rounds = setup_rounds_;
    res.colors.assign(trace.outputs.begin(), trace.outputs.end());
    res.trace = std::move(trace);
    return res;
  }

 private:
  // digits of the prior color become the non-constant coefficients
  std::vector<std::uint64_t> base_poly(std::uint64_t prior) const {
    const std::uint64_t qc = params_.qc;
    return {0, prior % qc, (prior / qc) % qc, (prior / (qc * qc)) % qc};
  }

  Task<void> body(ProcCtx& ctx, int v) {
    LocalView view = co_await detail::setup_local_view(ctx);
    const int deg = ctx.degree();
    const std::uint64_t qc = params_.qc;

    // bundle exchange: prior color, arb class, arb finalize round
    const int prw = value_bits(std::max<std::uint64_t>(params_.prior_palette, 2));
    const int clw = value_bits(std::max<std::uint64_t>(params_.classes, 2));
    const int row = value_bits(params_.round_cap + 2);
    BitString bundle;
    bundle.append_uint(priors_[v], prw);
    bundle.append_uint(classes_[v], clw);
    bundle.append_uint(records_[v].finalize_round, row);
    auto in = co_await ctx.exchange_all(
        bundle, stream_rounds(std::uint64_t(prw) + clw + row, ctx.bw()));
    std::vector<std::uint64_t> nbr_class(deg);
    std::vector<ArbRecord> nbr_rec(deg);
    std::vector<std::vector<std::uint64_t>> nbr_base(deg);
    for (int i = 0; i < deg; ++i) {
      BitReader r(in[i]);
      std::uint64_t prior = r.read_uint(prw);
      nbr_class[i] = r.read_uint(clw);
      nbr_rec[i] = ArbRecord{ctx.neighbor(i), nbr_class[i], r.read_uint(row)};
      nbr_base[i] = base_poly(prior);
    }
    setup_rounds_ = ctx.round();
    ctx.mark("setup_end");

    const ArbRecord my_rec{ctx.id(), classes_[v], records_[v].finalize_round};
    auto my_base = base_poly(priors_[v]);
    const int jw = value_bits(std::uint64_t(ctx.delta()) + 1);
    const int tw = value_bits(3 * std::uint64_t(ctx.delta()) + 1);
    const int phases = ceil_log2(qc);

    bool decided = false;
    std::uint64_t my_color = 0;
    std::vector<bool> nbr_decided(deg, false);
    // decided neighbors' final colors, decoded
    std::vector<std::uint64_t> nbr_t(deg, 0), nbr_y(deg, 0);
    // chosen j of same-class neighbors during the running iteration
    std::vector<std::uint64_t> nbr_j(deg, 0);
    IterDebug& dbg = debug_[v];

    auto eval = [&](const std::vector<std::uint64_t>& base, std::uint64_t j, std::uint64_t x) {
      return (linial2::poly_eval(base, x, qc) + j) % qc;
    };

    for (std::uint64_t cls = 0; cls < params_.classes; ++cls) {
      const bool active = !decided && classes_[v] == cls;
      std::vector<bool> nbr_active(deg);
      for (int i = 0; i < deg; ++i) nbr_active[i] = !nbr_decided[i] && nbr_class[i] == cls;

      // --- search 1: pick j minimizing hits of finalized colors -----------
      std::uint64_t jlo = 0, jhi = qc - 1;
      std::vector<std::uint64_t> njlo(deg, 0), njhi(deg, qc - 1);
      for (int ph = 0; ph < phases; ++ph) {
        std::vector<BitString> reports(deg);
        for (int i = 0; i < deg; ++i) {
          if (!nbr_active[i]) continue;
          std::uint64_t mid = (njlo[i] + njhi[i]) / 2;
          std::uint64_t cl = 0, cr = 0;
          auto add_hit = [&](const std::uint64_t t, const std::uint64_t y) {
            std::uint64_t jh =
                (y + qc - linial2::poly_eval(nbr_base[i], t, qc) % qc) % qc;
            if (jh >= njlo[i] && jh <= mid)
              ++cl;
            else if (jh > mid && jh <= njhi[i])
              ++cr;
          };
          if (decided) add_hit(dbg.t, dbg.color % qc);
          for (int j : view.owned[i])
            if (nbr_decided[j]) add_hit(nbr_t[j], nbr_y[j]);
          BitString b;
          b.append_uint(cl, jw);
          b.append_uint(cr, jw);
          reports[i] = std::move(b);
        }
        in = co_await ctx.exchange(std::move(reports), stream_rounds(2 * jw, ctx.bw()));

        bool go_left = true;
        if (active) {
          std::uint64_t sum_l = 0, sum_r = 0;
          for (int i = 0; i < deg; ++i) {
            if (in[i].empty()) continue;
            BitReader r(in[i]);
            sum_l += r.read_uint(jw);
            sum_r += r.read_uint(jw);
          }
          go_left = sum_l <= sum_r;
          dbg.j_phases.push_back({sum_l, sum_r, jhi - jlo + 1, go_left});
          std::uint64_t mid = (jlo + jhi) / 2;
          if (go_left)
            jhi = mid;
          else
            jlo = mid + 1;
        }
        std::vector<BitString> ann(deg);
        if (active)
          for (int i = 0; i < deg; ++i) ann[i] = enc_value(go_left ? 0 : 1, 1);
        in = co_await ctx.exchange(std::move(ann), 1);
        for (int i = 0; i < deg; ++i) {
          if (in[i].empty()) continue;
          std::uint64_t nm = (njlo[i] + njhi[i]) / 2;
          if (*dec_value(in[i], 1) == 0)
            njhi[i] = nm;
          else
            njlo[i] = nm + 1;
        }
      }
      const std::uint64_t my_j = jlo;
      for (int i = 0; i < deg; ++i) nbr_j[i] = njlo[i];

      // --- search 2: pick t avoiding finalized colors and parents' sets ---
      std::uint64_t tlo = 0, thi = qc - 1;
      std::vector<std::uint64_t> ntlo(deg, 0), nthi(deg, qc - 1);
      for (int ph = 0; ph < phases; ++ph) {
        std::vector<BitString> reports(deg);
        for (int i = 0; i < deg; ++i) {
          if (!nbr_active[i]) continue;
          std::uint64_t mid = (ntlo[i] + nthi[i]) / 2;
          std::uint64_t cl = 0, cr = 0;
          auto add_final = [&](const std::uint64_t t, const std::uint64_t y) {
            if (t < ntlo[i] || t > nthi[i]) return;
            if (eval(nbr_base[i], nbr_j[i], t) != y) return;
            if (t <= mid)
              ++cl;
            else
              ++cr;
          };
          auto add_parent = [&](const std::vector<std::uint64_t>& base, std::uint64_t j) {
            for (std::uint64_t t = ntlo[i]; t <= nthi[i]; ++t) {
              if (eval(nbr_base[i], nbr_j[i], t) != eval(base, j, t)) continue;
              if (t <= mid)
                ++cl;
              else
                ++cr;
            }
          };
          if (decided)
            add_final(dbg.t, dbg.color % qc);
          else if (classes_[v] == cls && parent_of(my_rec, nbr_rec[i]))
            add_parent(my_base, my_j);
          for (int j : view.owned[i]) {
            if (nbr_decided[j])
              add_final(nbr_t[j], nbr_y[j]);
            else if (nbr_active[j] && parent_of(nbr_rec[j], nbr_rec[i]))
              add_parent(nbr_base[j], nbr_j[j]);
          }
          BitString b;
          b.append_uint(cl, tw);
          b.append_uint(cr, tw);
          reports[i] = std::move(b);
        }
        in = co_await ctx.exchange(std::move(reports), stream_rounds(2 * tw, ctx.bw()));

        bool go_left = true;
        if (active) {
          std::uint64_t sum_l = 0, sum_r = 0;
          for (int i = 0; i < deg; ++i) {
            if (in[i].empty()) continue;
            BitReader r(in[i]);
            sum_l += r.read_uint(tw);
            sum_r += r.read_uint(tw);
          }
          if (sum_l + sum_r >= thi - tlo + 1)
            throw NoFreeElementError("iterative2: conflicts reached range width");
          go_left = sum_l <= sum_r;
          dbg.t_phases.push_back({sum_l, sum_r, thi - tlo + 1, go_left});
          std::uint64_t mid = (tlo + thi) / 2;
          if (go_left)
            thi = mid;
          else
            tlo = mid + 1;
        }
        std::vector<BitString> ann(deg);
        if (active)
          for (int i = 0; i < deg; ++i) ann[i] = enc_value(go_left ? 0 : 1, 1);
        in = co_await ctx.exchange(std::move(ann), 1);
        for (int i = 0; i < deg; ++i) {
          if (in[i].empty()) continue;
          std::uint64_t nm = (ntlo[i] + nthi[i]) / 2;
          if (*dec_value(in[i], 1) == 0)
            nthi[i] = nm;
          else
            ntlo[i] = nm + 1;
        }
      }

      if (active) {
        decided = true;
        dbg.j = my_j;
        dbg.t = tlo;
        dbg.decided_class = cls;
        my_color = tlo * qc + eval(my_base, my_j, tlo);
        dbg.color = my_color;
      }

      // announce the freshly decided colors
      const int fw = 2 * value_bits(qc);
      std::vector<BitString> ann(deg);
      if (active && decided) {
        BitString b;
        b.append_uint(dbg.t, value_bits(qc));
        b.append_uint(my_color % qc, value_bits(qc));
        ann.assign(deg, b);
      }
      in = co_await ctx.exchange(std::move(ann), stream_rounds(fw, ctx.bw()));
      for (int i = 0; i < deg; ++i) {
        if (in[i].empty()) continue;
        BitReader r(in[i]);
        nbr_t[i] = r.read_uint(value_bits(qc));
        nbr_y[i] = r.read_uint(value_bits(qc));
        nbr_decided[i] = true;
      }
    }

    if (!decided) throw EngineError("iterative2: vertex never decided a color");
    ctx.set_output(my_color);
    co_return;
  }

  const Graph& g_;
  std::vector<std::uint64_t> classes_;
  std::vector<ArbRecord> records_;
  std::vector<std::uint64_t> priors_;
  IterParams params_;
  std::vector<IterDebug> debug_;
  std::uint64_t setup_rounds_ = 0;
};

inline IterResult iterative_proper2_run(const Graph& g, const ArbResult& arb,
                                        std::vector<std::uint64_t> priors,
                                        std::uint64_t prior_palette, Bandwidth bw) {
  IterSim sim(g, arb.classes, arb.records, std::move(priors),
              iter_params(prior_palette, g.max_degree(), arb.params.max_defect,
                          arb.params.qp, arb.params.phase_cap));
  return sim.run(bw);
}

// ---------------------------------------------------------------------------
// the full pipeline

struct StageStats {
  std::string name;
  std::uint64_t rounds = 0;
  std::uint64_t bits = 0;
  std::uint64_t palette = 0;
};

struct PipelineResult {
  std::vector<std::uint64_t> colors;
  std::uint64_t palette = 0;
  std::uint64_t qc = 0;
  std::vector<StageStats> stages;
  std::uint64_t total_rounds = 0;
  std::uint64_t total_bits = 0;
  std::uint64_t setup_rounds = 0;
  std::uint64_t main_rounds = 0;
  ArbResult arb;  // kept for the arboricity acceptance checks
};

inline PipelineResult fastcolor2_pipeline(const Graph& g, Bandwidth bw) {
  PipelineResult res;
  auto add_stage = [&res](const std::string& name, const RoundTrace& tr,
                          std::uint64_t palette) {
    res.stages.push_back({name, tr.rounds_elapsed, tr.total_bits, palette});
    res.total_rounds += tr.rounds_elapsed;
    res.total_bits += tr.total_bits;
  };

  auto lin = linial2::linial2_full(g, bw);
  add_stage("linial2", lin.trace, lin.palette);
  res.setup_rounds += lin.setup_rounds;

  const int delta = std::max(1, g.max_degree());
  auto def = defective2_run(g, lin.colors, lin.palette, bw);
  add_stage("defective2", def.trace, def.params.q * def.params.q);
  res.setup_rounds += def.setup_rounds;

  auto arb = arbdefective2_run(g, def.colors, def.params.q * def.params.q,
                               std::uint64_t(delta), bw);
  add_stage("arbdefective2", arb.trace, arb.params.qp);
  res.setup_rounds += arb.setup_rounds;

  auto iter = iterative_proper2_run(g, arb, lin.colors, lin.palette, bw);
  add_stage("iterative2", iter.trace, iter.params.qc * iter.params.qc);
  res.setup_rounds += iter.setup_rounds;

  res.colors = iter.colors;
  res.qc = iter.params.qc;
  res.palette = iter.params.qc * iter.params.qc;
  res.main_rounds = res.total_rounds - res.setup_rounds;
  res.arb = std::move(arb);
  return res;
}

}  // namespace congestsim::fastcolor2
