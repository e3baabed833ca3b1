#include <cstdio>

#include "catch_amalgamated.hpp"
#include "congestsim/linial2.hpp"
#include "congestsim/oracle.hpp"

using namespace congestsim;
using namespace congestsim::linial2;

namespace {

// brute force over (d, q): the smallest feasible pair, for cross-checking
SetSystemParams brute_params(std::uint64_t m, int delta) {
  for (int d = 1;; ++d) {
    long double bound = 1;
    for (int i = 0; i <= d; ++i) bound *= 2.0L * d * delta * delta + 1;
    if (bound < static_cast<long double>(m)) continue;
    std::uint64_t q = 2 * std::uint64_t(d) * delta * delta + 1;
    while (true) {
      if (is_prime(q)) {
        long double pw = 1;
        for (int i = 0; i <= d; ++i) pw *= q;
        if (pw >= static_cast<long double>(m)) return {q, d, m};
      }
      ++q;
    }
  }
}

}  // namespace

TEST_CASE("choose_params minimizes d then q") {
  auto p = choose_params(83521, 2);
  REQUIRE(p.d == 3);
  REQUIRE(p.q == 29);

  auto p2 = choose_params(5, 1);
  REQUIRE(p2.d == 1);
  REQUIRE(p2.q == 3);

  for (std::uint64_t m : {2ull, 9ull, 10ull, 100ull, 1000ull, 83521ull, 1000000ull})
    for (int delta : {1, 2, 3, 5, 8}) {
      auto a = choose_params(m, delta);
      auto b = brute_params(m, delta);
      REQUIRE(a.d == b.d);
      REQUIRE(a.q == b.q);
      REQUIRE(a.q > 2 * std::uint64_t(a.d) * delta * delta);
    }
}

TEST_CASE("ordered_set from polynomial digits") {
  SetSystemParams p{3, 1, 9};
  auto s1 = ordered_set(p, 1);  // p(x) = 1
  REQUIRE(s1 == std::vector<std::pair<std::uint64_t, std::uint64_t>>{{0, 1}, {1, 1}, {2, 1}});
  auto s3 = ordered_set(p, 3);  // digits (0,1): p(x) = x
  REQUIRE(s3 == std::vector<std::pair<std::uint64_t, std::uint64_t>>{{0, 0}, {1, 1}, {2, 2}});
  // the two sets intersect exactly in <1,1>
  int common = 0;
  for (auto& e : s1)
    for (auto& f : s3)
      if (e == f) ++common;
  REQUIRE(common == 1);
}

TEST_CASE("count_intersections by evaluation") {
  SetSystemParams p{3, 1, 9};
  REQUIRE(count_intersections(p, 4, 4, 1, 3) == 3);  // identical colors, full range
  REQUIRE(count_intersections(p, 1, 3, 1, 3) == 1);
  REQUIRE(count_intersections(p, 1, 3, 1, 1) == 0);
}

TEST_CASE("single stage on K2: exhaustive over all distinct color pairs") {
  Graph k2 = Graph::from_edges(2, {{0, 1}});
  SetSystemParams p = choose_params(9, 1);
  REQUIRE(p.q == 3);
  REQUIRE(p.d == 1);
  for (std::uint64_t a = 0; a < 9; ++a)
    for (std::uint64_t b = 0; b < 9; ++b) {
      if (a == b) continue;
      Linial2Sim sim(k2, {a, b}, {p});
      auto res = sim.run(bandwidth_mode(BandwidthMode::one_bit));
      REQUIRE(res.colors[0] != res.colors[1]);
      REQUIRE(res.colors[0] < p.q * p.q);
      REQUIRE(res.colors[1] < p.q * p.q);
    }
}

TEST_CASE("single vertex keeps a color with no communication") {
  Graph g1 = Graph::from_edges(1, {});
  auto res = linial2_full(g1, bandwidth_mode(BandwidthMode::one_bit));
  REQUIRE(res.palette == 1);
  REQUIRE(res.trace.total_bits == 0);
}

TEST_CASE("P3 stage output proper at distance 2") {
  Graph p3 = gen_graph(GraphModel::path, 3, 2, 0);
  SetSystemParams p = choose_params(64, 2);
  Linial2Sim sim(p3, {10, 33, 57}, {p});
  auto res = sim.run(bandwidth_mode(BandwidthMode::one_bit));
  REQUIRE_FALSE(oracle::check_proper_k(p3, 2, res.colors).has_value());
}

TEST_CASE("linial2_full on P5: proper, palette within the delta=2 bound") {
  Graph p5 = gen_graph(GraphModel::path, 5, 2, 0);
  auto res = linial2_full(p5, bandwidth_mode(BandwidthMode::one_bit));
  REQUIRE_FALSE(oracle::check_proper_k(p5, 2, res.colors).has_value());
  std::uint64_t qf = smallest_prime_above(6 * 2 * 2);  // 29
  REQUIRE(res.palette <= qf * qf);
  for (auto c : res.colors) REQUIRE(c < res.palette);
}

TEST_CASE("stage count stays within log* budget") {
  Graph g = gen_graph(GraphModel::gnp, 64, 4, 7);
  auto res = linial2_full(g, bandwidth_mode(BandwidthMode::congest, 64));
  REQUIRE_FALSE(oracle::check_proper_k(g, 2, res.colors).has_value());
  REQUIRE(res.stages.size() <= static_cast<std::size_t>(log_star(64) + 2));
}

TEST_CASE("properness is preserved after every stage") {
  // rerun with truncated stage schedules; determinism makes the prefix runs
  // identical to inspecting the full run mid-flight
  int exercised = 0;
  for (std::uint64_t seed : {3, 4, 5}) {
    Graph g = gen_graph(GraphModel::gnp, 40, 3, seed);
    auto all_stages = stage_schedule(std::uint64_t(1) << 18, g.max_degree());
    std::vector<std::uint64_t> ids(g.n());
    for (int v = 0; v < g.n(); ++v) ids[v] = v;
    for (std::size_t cut = 1; cut <= all_stages.size(); ++cut) {
      std::vector<SetSystemParams> prefix(all_stages.begin(), all_stages.begin() + cut);
      Linial2Sim sim(g, ids, prefix);
      auto res = sim.run(bandwidth_mode(BandwidthMode::congest, g.n()));
      REQUIRE_FALSE(oracle::check_proper_k(g, 2, res.colors).has_value());
      ++exercised;
    }
  }
  REQUIRE(exercised >= 6);
}

TEST_CASE("conflict decay and strictness hold at every phase") {
  // IDs drawn from a 2^20 space force a real multi-stage reduction
  Graph g = gen_graph(GraphModel::gnp, 48, 5, 11);
  std::vector<std::uint64_t> ids(g.n());
  for (int v = 0; v < g.n(); ++v) ids[v] = v;
  Linial2Sim sim(g, ids, stage_schedule(std::uint64_t(1) << 20, g.max_degree()));
  REQUIRE(sim.stages().size() >= 2);
  auto res = sim.run(bandwidth_mode(BandwidthMode::one_bit));
  REQUIRE_FALSE(oracle::check_proper_k(g, 2, res.colors).has_value());
  bool saw_phase = false;
  for (int v = 0; v < g.n(); ++v)
    for (auto& stage : sim.debug()[v].stage_phases)
      for (auto& ph : stage) {
        saw_phase = true;
        REQUIRE(ph.sum_left + ph.sum_right < ph.width);  // strictness
        std::uint64_t chosen = ph.chose_left ? ph.sum_left : ph.sum_right;
        std::uint64_t other = ph.chose_left ? ph.sum_right : ph.sum_left;
        REQUIRE(chosen <= other);  // conflict decay
      }
  REQUIRE(saw_phase);
  // per-stage phase budget
  for (auto& st : res.stages)
    REQUIRE(st.phases <= std::uint64_t(ceil_log2(st.params.q)) + 1);
}

TEST_CASE("phase-1 conflict sums match the centralized recount") {
  Graph g = gen_graph(GraphModel::gnp, 20, 4, 2);
  std::vector<std::uint64_t> ids(g.n());
  for (int v = 0; v < g.n(); ++v) ids[v] = v;
  Linial2Sim sim(g, ids, stage_schedule(1 << 16, g.max_degree()));
  auto stages = sim.stages();
  REQUIRE_FALSE(stages.empty());
  auto res = sim.run(bandwidth_mode(BandwidthMode::congest, g.n()));
  (void)res;
  const auto& p = stages[0];
  for (int v = 0; v < g.n(); ++v) {
    const auto& phases = sim.debug()[v].stage_phases[0];
    if (phases.empty()) continue;
    std::uint64_t mid = (1 + p.q) / 2;
    std::uint64_t want_l = 0, want_r = 0;
    for (int u : g.neighbors(v)) {
      for (int w : g.neighbors(u)) {
        if (w == v) continue;
        want_l += count_intersections(p, std::uint64_t(v), std::uint64_t(w), 1, mid);
        want_r += count_intersections(p, std::uint64_t(v), std::uint64_t(w), mid + 1, p.q);
      }
      want_l += count_intersections(p, std::uint64_t(v), std::uint64_t(u), 1, mid);
      want_r += count_intersections(p, std::uint64_t(v), std::uint64_t(u), mid + 1, p.q);
    }
    REQUIRE(phases[0].sum_left == want_l);
    REQUIRE(phases[0].sum_right == want_r);
  }
}

TEST_CASE("round budget constants are reported") {
  // fitted constants for rounds <= c1 * log2(delta+2) * (log* M + 2) + c2,
  // on an ID space wide enough to drive real stages
  double worst_c1 = 0;
  const std::uint64_t idspace = std::uint64_t(1) << 20;
  for (std::uint64_t seed : {1, 2, 3}) {
    Graph g = gen_graph(GraphModel::gnp, 64, 5, seed);
    std::vector<std::uint64_t> ids(g.n());
    for (int v = 0; v < g.n(); ++v) ids[v] = v;
    Linial2Sim sim(g, ids, stage_schedule(idspace, g.max_degree()));
    auto res = sim.run(bandwidth_mode(BandwidthMode::congest, 64));
    REQUIRE_FALSE(oracle::check_proper_k(g, 2, res.colors).has_value());
    double denom = std::log2(g.max_degree() + 2) * (log_star(double(idspace)) + 2);
    worst_c1 = std::max(worst_c1, double(res.trace.rounds_elapsed) / denom);
  }
  std::printf("[report] linial2 round-budget fit: c1 <= %.2f (c2 = 0)\n", worst_c1);
  REQUIRE(worst_c1 > 0);
}
