#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "congestsim/engine.hpp"
#include "congestsim/errors.hpp"
#include "congestsim/graph.hpp"
#include "congestsim/process.hpp"

// Distance-2 AG color reduction. Starting from a proper G^2 coloring with at
// most q^2 colors (q prime, q > 2*Delta^2), phases of 1-bit conflict
// notifications drive every vertex to a finalized color <0,b>; the b values
// form a proper G^2 coloring with palette q. Neighbors mirror each other's
// pair evolution locally, so pairs cross an edge once, during setup.

namespace congestsim::ag2 {

struct ColorPair {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  bool finalized() const { return a == 0; }
  bool operator==(const ColorPair&) const = default;
};

struct AgParams {
  std::uint64_t q = 0;  // prime, q > 2*Delta^2 and q^2 >= input palette
};

inline AgParams ag_params(std::uint64_t input_palette, int delta) {
  std::uint64_t q = smallest_prime_above(2 * std::uint64_t(delta) * std::uint64_t(delta));
  while (q * q < input_palette) q = smallest_prime_above(q);
  return AgParams{q};
}

inline ColorPair encode_pair(std::uint64_t color, std::uint64_t q) {
  if (color >= q * q) throw std::invalid_argument("color out of range for pair encoding");
  return ColorPair{color / q, color % q};
}

inline std::uint64_t decode_pair(const ColorPair& p, std::uint64_t q) { return p.a * q + p.b; }

/// True iff some other pair shares our b value.
inline bool conflict(const ColorPair& own, const std::vector<ColorPair>& others) {
  for (const auto& o : others)
    if (o.b == own.b) return true;
  return false;
}

/// Next pair after one phase: finalize on all-clear, else advance b by a.
inline std::pair<ColorPair, bool> next_color(const ColorPair& current,
                                             const std::vector<bool>& conflict_flags,
                                             std::uint64_t q) {
  bool any = false;
  for (bool f : conflict_flags) any |= f;
  if (!any) return {ColorPair{0, current.b}, false};
  return {ColorPair{current.a, (current.a + current.b) % q}, true};
}

struct Ag2Debug {
  ColorPair pair;
  std::vector<ColorPair> mirrors;
  std::vector<bool> known_final;
  std::uint64_t phases_completed = 0;
  std::uint64_t finalize_phase = 0;  // 0 = finalized on input
  bool active_before_phase = false;  // state entering the current phase
  bool failed = false;
};

struct Ag2Result {
  std::vector<std::uint64_t> colors;  // final b values, palette q
  RoundTrace trace;
  std::uint64_t setup_rounds = 0;
  std::uint64_t phases = 0;  // max finalize phase over vertices
  std::uint64_t q = 0;
};

class Ag2Sim {
 public:
  Ag2Sim(const Graph& g, std::vector<std::uint64_t> input, AgParams params)
      : g_(g), input_(std::move(input)), params_(params), debug_(g.n()) {
    if (static_cast<int>(input_.size()) != g_.n())
      throw std::invalid_argument("need one input color per vertex");
    for (auto c : input_)
      if (c >= params_.q * params_.q)
        throw std::invalid_argument("input palette exceeds q^2");
  }

  const std::vector<Ag2Debug>& debug() const { return debug_; }

  Ag2Result run(Bandwidth bw, const RoundObserver& observer = {},
                std::uint64_t max_rounds = 0) {
    const std::uint64_t q = params_.q;
    if (max_rounds == 0)
      max_rounds = 10 * (stream_rounds(2 * value_bits(q), bw) + 2 * q + 2);
    auto procs = make_processes(
        g_.n(), [this](int v) -> CoroVertex::Body {
          return [this, v](ProcCtx& ctx) { return body(ctx, v); };
        });
    setup_rounds_ = 0;
    auto trace = congestsim::run(g_, procs, bw, max_rounds, observer);
    if (trace.outcome != RoundTrace::Outcome::completed)
      throw RoundCapError("ag2: engine round cap reached");
    Ag2Result res;
    res.q = q;
    res.trace = std::move(trace);
    res.setup_rounds = setup_rounds_;
    res.colors.resize(g_.n());
    for (int v = 0; v < g_.n(); ++v) {
      if (debug_[v].failed)
        throw RoundCapError("ag2: vertex did not finalize within q phases");
      res.colors[v] = debug_[v].pair.b;
      res.phases = std::max(res.phases, debug_[v].finalize_phase);
    }
    return res;
  }

 private:
  Task<void> body(ProcCtx& ctx, int v) {
    const std::uint64_t q = params_.q;
    const int pw = value_bits(q);
    const int deg = ctx.degree();
    Ag2Debug& dbg = debug_[v];

    ColorPair me = encode_pair(input_[v], q);
    dbg.pair = me;
    dbg.mirrors.assign(deg, ColorPair{});
    dbg.known_final.assign(deg, false);

    // setup: one streamed pair exchange with 1-hop neighbors
    BitString pair_msg;
    pair_msg.append_uint(me.a, pw);
    pair_msg.append_uint(me.b, pw);
    const std::uint64_t setup_r = stream_rounds(2 * pw, ctx.bw());
    auto in = co_await ctx.exchange_all(pair_msg, setup_r);
    for (int i = 0; i < deg; ++i) {
      BitReader r(in[i]);
      dbg.mirrors[i].a = r.read_uint(pw);
      dbg.mirrors[i].b = r.read_uint(pw);
      dbg.known_final[i] = dbg.mirrors[i].finalized();
    }
    ctx.mark("setup_end");
    setup_rounds_ = ctx.round();

    auto all_nbrs_final = [&] {
      for (bool f : dbg.known_final)
        if (!f) return false;
      return true;
    };

    std::uint64_t phase = 0;
    while (!(me.finalized() && all_nbrs_final()) && phase < q) {
      ++phase;
      const bool i_was_active = !me.finalized();
      dbg.active_before_phase = i_was_active;

      // conflict verdicts: answer every neighbor that is still active
      std::vector<BitString> answers(deg);
      for (int i = 0; i < deg; ++i) {
        if (dbg.known_final[i]) continue;
        std::vector<ColorPair> others;
        others.reserve(deg);
        others.push_back(me);
        for (int j = 0; j < deg; ++j)
          if (j != i) others.push_back(dbg.mirrors[j]);
        answers[i] = enc_value(conflict(dbg.mirrors[i], others) ? 1 : 0, 1);
      }
      in = co_await ctx.exchange(std::move(answers), 1);

      bool changed_b = false;
      if (i_was_active) {
        std::vector<bool> flags;
        flags.reserve(deg);
        for (int i = 0; i < deg; ++i) {
          if (in[i].empty())
            throw EngineError("ag2: active vertex missing a conflict verdict");
          flags.push_back(*dec_value(in[i], 1) != 0);
        }
        auto [next, chg] = next_color(me, flags, q);
        me = next;
        changed_b = chg;
        if (me.finalized()) dbg.finalize_phase = phase;
      }

      // changed-b bits: only vertices active this phase speak
      std::vector<BitString> updates(deg);
      if (i_was_active)
        for (int i = 0; i < deg; ++i) updates[i] = enc_value(changed_b ? 1 : 0, 1);
      in = co_await ctx.exchange(std::move(updates), 1);
      for (int i = 0; i < deg; ++i) {
        if (in[i].empty()) continue;  // neighbor already final and silent
        bool nbr_changed = *dec_value(in[i], 1) != 0;
        auto [next, chg] =
            next_color(dbg.mirrors[i], std::vector<bool>{nbr_changed}, q);
        (void)chg;
        dbg.mirrors[i] = next;
        if (next.finalized()) dbg.known_final[i] = true;
      }

      dbg.pair = me;
      dbg.phases_completed = phase;
    }

    if (!me.finalized()) dbg.failed = true;
    ctx.set_output(me.b);
    co_return;
  }

  const Graph& g_;
  std::vector<std::uint64_t> input_;
  AgParams params_;
  std::vector<Ag2Debug> debug_;
  std::uint64_t setup_rounds_ = 0;
};

inline Ag2Result ag2_run(const Graph& g, std::vector<std::uint64_t> input, AgParams params,
                         Bandwidth bw) {
  Ag2Sim sim(g, std::move(input), params);
  return sim.run(bw);
}

}  // namespace congestsim::ag2
