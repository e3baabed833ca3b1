#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "congestsim/engine.hpp"
#include "congestsim/errors.hpp"
#include "congestsim/graph.hpp"
#include "congestsim/process.hpp"

// Distance-2 Linial color reduction. Each color maps to a polynomial of
// degree <= d over F_q (coefficients = base-q digits of the color); the
// ordered set of a vertex is <x, p(x)> for x = 0..q-1. Binary search over the
// set, driven by neighbor-reported intersection counts, finds an element free
// of conflicts in the whole 2-hop neighborhood; once the live range fits in
// one message, neighbors send a conflict bitmask instead and the vertex picks
// the lowest clear position.

namespace congestsim::linial2 {

struct SetSystemParams {
  std::uint64_t q = 0;  // prime field size
  int d = 0;            // polynomial degree bound
  std::uint64_t m = 0;  // input palette size
};

namespace detail {
// base^exp >= target, without overflow
inline bool pow_at_least(std::uint64_t base, int exp, std::uint64_t target) {
  std::uint64_t acc = 1;
  for (int i = 0; i < exp; ++i) {
    if (acc >= target) return true;
    if (acc > target / base + 1) return true;
    acc *= base;
    if (acc >= target) return true;
  }
  return acc >= target;
}
}  // namespace detail

/// d = smallest degree with (2*d*delta^2+1)^(d+1) >= m; q = smallest prime
/// above 2*d*delta^2 with q^(d+1) >= m.
inline SetSystemParams choose_params(std::uint64_t m, int delta) {
  if (m < 2 || delta < 1) throw std::invalid_argument("choose_params needs m >= 2, delta >= 1");
  const std::uint64_t dd = std::uint64_t(delta) * std::uint64_t(delta);
  int d = 1;
  while (!detail::pow_at_least(2 * std::uint64_t(d) * dd + 1, d + 1, m)) ++d;
  std::uint64_t q = smallest_prime_above(2 * std::uint64_t(d) * dd);
  while (!detail::pow_at_least(q, d + 1, m)) q = smallest_prime_above(q);
  return SetSystemParams{q, d, m};
}

/// Coefficients of the color's polynomial: base-q digits, constant term first.
inline std::vector<std::uint64_t> color_poly(const SetSystemParams& p, std::uint64_t color) {
  std::vector<std::uint64_t> coeff(p.d + 1);
  std::uint64_t c = color;
  for (int j = 0; j <= p.d; ++j) {
    coeff[j] = c % p.q;
    c /= p.q;
  }
  return coeff;
}

inline std::uint64_t poly_eval(const std::vector<std::uint64_t>& coeff, std::uint64_t x,
                               std::uint64_t q) {
  std::uint64_t acc = 0;
  for (std::size_t j = coeff.size(); j-- > 0;) acc = (acc * x + coeff[j]) % q;
  return acc;
}

/// Element i (1-based) of the ordered set of `color` is <i-1, p(i-1)>.
inline std::vector<std::pair<std::uint64_t, std::uint64_t>> ordered_set(
    const SetSystemParams& p, std::uint64_t color) {
  auto coeff = color_poly(p, color);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
  out.reserve(p.q);
  for (std::uint64_t x = 0; x < p.q; ++x) out.push_back({x, poly_eval(coeff, x, p.q)});
  return out;
}

/// |{ i in [left, right] : element_i(S(color_v)) also lies in S(color_u) }|,
/// by polynomial evaluation. Indices are 1-based.
inline std::uint64_t count_intersections(const SetSystemParams& p, std::uint64_t color_v,
                                         std::uint64_t color_u, std::uint64_t left,
                                         std::uint64_t right) {
  auto cv = color_poly(p, color_v);
  auto cu = color_poly(p, color_u);
  std::uint64_t cnt = 0;
  for (std::uint64_t i = left; i <= right; ++i)
    if (poly_eval(cv, i - 1, p.q) == poly_eval(cu, i - 1, p.q)) ++cnt;
  return cnt;
}

struct PhaseStats {
  std::uint64_t sum_left = 0;
  std::uint64_t sum_right = 0;
  std::uint64_t width = 0;  // range width entering the phase
  bool chose_left = false;
};

struct Linial2Debug {
  std::uint64_t color = 0;                          // current color
  std::vector<std::vector<PhaseStats>> stage_phases;  // per stage, per phase
};

struct StageInfo {
  SetSystemParams params;
  std::uint64_t setup_rounds = 0;   // color exchange
  std::uint64_t search_rounds = 0;  // halvings + bitmask
  std::uint64_t phases = 0;         // halving phases + 1 for the bitmask
};

struct Linial2Result {
  std::vector<std::uint64_t> colors;
  std::uint64_t palette = 0;
  RoundTrace trace;
  std::vector<StageInfo> stages;
  std::uint64_t setup_rounds = 0;  // sum of per-stage color exchanges
};

/// Stage schedule for iterating to the palette fixed point.
inline std::vector<SetSystemParams> stage_schedule(std::uint64_t n, int delta) {
  std::vector<SetSystemParams> stages;
  std::uint64_t m = n;
  while (m >= 2 && delta >= 1) {
    auto p = choose_params(m, delta);
    if (p.q * p.q >= m) break;  // palette would stop shrinking
    stages.push_back(p);
    m = p.q * p.q;
  }
  return stages;
}

inline std::uint64_t final_palette(std::uint64_t n, int delta) {
  auto stages = stage_schedule(n, delta);
  return stages.empty() ? n : stages.back().q * stages.back().q;
}

class Linial2Sim {
 public:
  Linial2Sim(const Graph& g, std::vector<std::uint64_t> input,
             std::vector<SetSystemParams> stages)
      : g_(g), input_(std::move(input)), stages_(std::move(stages)), debug_(g.n()) {}

  /// Full run from vertex IDs to the fixed-point palette.
  static Linial2Sim from_ids(const Graph& g) {
    std::vector<std::uint64_t> ids(g.n());
    for (int v = 0; v < g.n(); ++v) ids[v] = v;
    return Linial2Sim(g, std::move(ids),
                      stage_schedule(std::uint64_t(g.n()), std::max(1, g.max_degree())));
  }

  const std::vector<Linial2Debug>& debug() const { return debug_; }
  const std::vector<SetSystemParams>& stages() const { return stages_; }

  Linial2Result run(Bandwidth bw, const RoundObserver& observer = {},
                    std::uint64_t max_rounds = 0) {
    stage_info_.clear();
    for (auto& st : stages_) {
      StageInfo info;
      info.params = st;
      stage_info_.push_back(info);
    }
    if (max_rounds == 0) {
      max_rounds = 16;
      for (auto& st : stages_)
        max_rounds += 10 * (stream_rounds(value_bits(st.m), bw) +
                            (ceil_log2(st.q) + 2) *
                                (stream_rounds(2 * count_width(st, g_.max_degree()), bw) + 1) +
                            1);
    }
    auto procs = make_processes(
        g_.n(), [this](int v) -> CoroVertex::Body {
          return [this, v](ProcCtx& ctx) { return body(ctx, v); };
        });
    auto trace = congestsim::run(g_, procs, bw, max_rounds, observer);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("linial2: engine round cap reached");
    Linial2Result res;
    res.trace = std::move(trace);
    res.stages = stage_info_;
    res.palette = stages_.empty() ? std::uint64_t(std::max(g_.n(), 1))
                                  : stages_.back().q * stages_.back().q;
    for (auto& s : stage_info_) res.setup_rounds += s.setup_rounds;
    res.colors.resize(g_.n());
    for (int v = 0; v < g_.n(); ++v) res.colors[v] = debug_[v].color;
    return res;
  }

  static int count_width(const SetSystemParams& p, int delta) {
    // a neighbor's report sums <= d intersections for each of <= Delta-1 sets
    return value_bits(std::uint64_t(p.d) * std::uint64_t(std::max(delta, 1)) + 1);
  }

 private:
  Task<void> body(ProcCtx& ctx, int v) {
    std::uint64_t color = input_[v];
    debug_[v].color = color;
    debug_[v].stage_phases.assign(stages_.size(), {});
    for (std::size_t si = 0; si < stages_.size(); ++si) {
      color = co_await stage(ctx, v, si, color);
      debug_[v].color = color;
    }
    ctx.set_output(color);
    co_return;
  }

  Task<std::uint64_t> stage(ProcCtx& ctx, int v, std::size_t si, std::uint64_t color) {
    const SetSystemParams p = stages_[si];
    const int deg = ctx.degree();
    const int B = ctx.bandwidth();
    const int cw = value_bits(p.m);
    const int rw = count_width(p, ctx.delta());

    // setup: every vertex streams its current color to its neighbors
    const std::uint64_t setup_r = stream_rounds(cw, ctx.bw());
    auto in = co_await ctx.exchange_all(enc_value(color, cw), setup_r);
    std::vector<std::uint64_t> nbr_color(deg);
    std::vector<std::vector<std::uint64_t>> nbr_poly(deg);
    for (int i = 0; i < deg; ++i) {
      nbr_color[i] = *dec_value(in[i], cw);
      nbr_poly[i] = color_poly(p, nbr_color[i]);
    }
    auto my_poly = color_poly(p, color);
    if (v == 0) stage_info_[si].setup_rounds = setup_r;
    const std::uint64_t search_start = ctx.round();

    // ranges are 1-based; every vertex tracks its neighbors' ranges
    std::uint64_t left = 1, right = p.q;
    std::vector<std::uint64_t> nl(deg, 1), nr(deg, p.q);
    std::uint64_t width_cap = p.q;  // global upper bound on any live width
    std::uint64_t phases = 0;

    auto ci = [&](const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b,
                  std::uint64_t lo, std::uint64_t hi) {
      std::uint64_t cnt = 0;
      for (std::uint64_t i = lo; i <= hi; ++i)
        if (poly_eval(a, i - 1, p.q) == poly_eval(b, i - 1, p.q)) ++cnt;
      return cnt;
    };

    while (width_cap > static_cast<std::uint64_t>(B)) {
      ++phases;
      // serve each neighbor: conflict counts for both halves of their range
      std::vector<BitString> reports(deg);
      for (int i = 0; i < deg; ++i) {
        std::uint64_t mid = (nl[i] + nr[i]) / 2;
        std::uint64_t cl = 0, cr = 0;
        for (int j = 0; j < deg; ++j) {
          if (j == i) continue;
          cl += ci(nbr_poly[i], nbr_poly[j], nl[i], mid);
          cr += ci(nbr_poly[i], nbr_poly[j], mid + 1, nr[i]);
        }
        BitString b;
        b.append_uint(cl, rw);
        b.append_uint(cr, rw);
        reports[i] = std::move(b);
      }
      in = co_await ctx.exchange(std::move(reports), stream_rounds(2 * rw, ctx.bw()));

      const std::uint64_t mid = (left + right) / 2;
      std::uint64_t sum_l = 0, sum_r = 0;
      for (int i = 0; i < deg; ++i) {
        BitReader r(in[i]);
        sum_l += r.read_uint(rw);
        sum_r += r.read_uint(rw);
      }
      for (int i = 0; i < deg; ++i) {  // direct 1-hop checks, counted by v itself
        sum_l += ci(my_poly, nbr_poly[i], left, mid);
        sum_r += ci(my_poly, nbr_poly[i], mid + 1, right);
      }
      if (sum_l + sum_r >= right - left + 1)
        throw NoFreeElementError("linial2: conflicts reached range width");
      bool go_left = sum_l <= sum_r;
      debug_[v].stage_phases[si].push_back(
          PhaseStats{sum_l, sum_r, right - left + 1, go_left});
      if (go_left)
        right = mid;
      else
        left = mid + 1;

      in = co_await ctx.exchange_all(enc_value(go_left ? 0 : 1, 1), 1);
      for (int i = 0; i < deg; ++i) {
        std::uint64_t nm = (nl[i] + nr[i]) / 2;
        if (*dec_value(in[i], 1) == 0)
          nr[i] = nm;
        else
          nl[i] = nm + 1;
      }
      width_cap = (width_cap + 1) / 2;
    }

    // bit-string shortcut: conflict masks over each neighbor's live range
    std::vector<BitString> masks(deg);
    for (int i = 0; i < deg; ++i) {
      BitString b;
      for (std::uint64_t pos = nl[i]; pos <= nr[i]; ++pos) {
        bool hit = false;
        for (int j = 0; j < deg && !hit; ++j)
          if (j != i) hit = ci(nbr_poly[i], nbr_poly[j], pos, pos) > 0;
        b.push_back(hit);
      }
      masks[i] = std::move(b);
    }
    in = co_await ctx.exchange(std::move(masks), 1);
    const std::uint64_t width = right - left + 1;
    std::vector<bool> conflicted(width, false);
    for (int i = 0; i < deg; ++i) {
      if (in[i].empty()) continue;
      for (std::uint64_t t = 0; t < width; ++t)
        if (in[i].bit(t)) conflicted[t] = true;
    }
    for (std::uint64_t t = 0; t < width; ++t)
      if (!conflicted[t])
        for (int j = 0; j < deg; ++j)
          if (ci(my_poly, nbr_poly[j], left + t, left + t) > 0) {
            conflicted[t] = true;
            break;
          }
    std::uint64_t pick = width;
    for (std::uint64_t t = 0; t < width; ++t)
      if (!conflicted[t]) {
        pick = t;
        break;
      }
    if (pick == width) throw NoFreeElementError("linial2: no conflict-free element in range");
    ++phases;  // the mask exchange counts as the closing phase
    const std::uint64_t x = left + pick - 1;
    if (v == 0) {
      stage_info_[si].phases = phases;
      stage_info_[si].search_rounds = ctx.round() - search_start;
    }
    co_return x * p.q + poly_eval(my_poly, x, p.q);
  }

  const Graph& g_;
  std::vector<std::uint64_t> input_;
  std::vector<SetSystemParams> stages_;
  std::vector<Linial2Debug> debug_;
  std::vector<StageInfo> stage_info_;
};

inline Linial2Result linial2_full(const Graph& g, Bandwidth bw) {
  auto sim = Linial2Sim::from_ids(g);
  return sim.run(bw);
}

}  // namespace congestsim::linial2
