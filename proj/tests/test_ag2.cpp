#include <numeric>

#include "catch_amalgamated.hpp"
#include "congestsim/ag2.hpp"
#include "congestsim/oracle.hpp"

using namespace congestsim;
using namespace congestsim::ag2;

namespace {

std::vector<std::uint64_t> id_colors(int n) {
  std::vector<std::uint64_t> c(n);
  std::iota(c.begin(), c.end(), 0);
  return c;
}

// distinct pairs with a != 0, so every vertex starts active
std::vector<std::uint64_t> active_colors(int n, std::uint64_t q) {
  std::vector<std::uint64_t> c(n);
  for (int v = 0; v < n; ++v) {
    std::uint64_t a = 1 + std::uint64_t(v) % (q - 1);
    std::uint64_t b = std::uint64_t(v) / (q - 1);
    c[v] = a * q + b;
  }
  return c;
}

}  // namespace

TEST_CASE("ag_params satisfies both constraints") {
  auto p = ag_params(25, 2);
  REQUIRE(p.q == 11);
  auto p2 = ag_params(289, 2);  // needs q^2 >= 289 too
  REQUIRE(p2.q == 17);
  auto p3 = ag_params(64, 4);
  REQUIRE(p3.q == 37);
}

TEST_CASE("encode_pair / decode_pair") {
  REQUIRE(encode_pair(0, 19) == ColorPair{0, 0});
  REQUIRE(encode_pair(40, 19) == ColorPair{2, 2});
  for (std::uint64_t c = 0; c < 49; ++c) REQUIRE(decode_pair(encode_pair(c, 7), 7) == c);
  REQUIRE_THROWS_AS(encode_pair(49, 7), std::invalid_argument);
}

TEST_CASE("conflict checks b values only") {
  REQUIRE(conflict({2, 5}, {{1, 3}, {0, 5}}));
  REQUIRE_FALSE(conflict({2, 5}, {{1, 3}}));
  REQUIRE_FALSE(conflict({2, 5}, {}));
}

TEST_CASE("next_color follows the phase update rule") {
  auto [p1, c1] = next_color({3, 4}, {false, false}, 7);
  REQUIRE(p1 == ColorPair{0, 4});
  REQUIRE_FALSE(c1);
  auto [p2, c2] = next_color({3, 4}, {true}, 7);
  REQUIRE(p2 == ColorPair{3, 0});
  REQUIRE(c2);
  auto [p3, c3] = next_color({1, 0}, {}, 5);
  REQUIRE(p3 == ColorPair{0, 0});
  REQUIRE_FALSE(c3);
}

TEST_CASE("already finalized input needs zero phases") {
  Graph g = gen_graph(GraphModel::path, 4, 2, 0);
  // all a = 0, b distinct in G^2
  AgParams params = ag_params(11 * 11, 2);
  std::vector<std::uint64_t> input{0, 1, 2, 3};  // encode_pair gives a=0 for c < q
  Ag2Sim sim(g, input, params);
  auto res = sim.run(bandwidth_mode(BandwidthMode::one_bit));
  REQUIRE(res.phases == 0);
  REQUIRE(res.colors == input);
}

TEST_CASE("C5 with distinct pairs finalizes within q phases, proper on G^2") {
  Graph g = gen_graph(GraphModel::cycle, 5, 2, 0);
  AgParams params = ag_params(25, 2);
  REQUIRE(params.q == 11);
  Ag2Sim sim(g, id_colors(5), params);
  auto res = sim.run(bandwidth_mode(BandwidthMode::one_bit));
  REQUIRE(res.phases <= params.q);
  REQUIRE_FALSE(oracle::check_proper_k(g, 2, res.colors).has_value());
  for (auto c : res.colors) REQUIRE(c < params.q);
}

TEST_CASE("gnp(64, deg<=4) reduces to palette q = 37") {
  Graph g = gen_graph(GraphModel::gnp, 64, 4, 7);
  AgParams params = ag_params(64, g.max_degree());
  Ag2Sim sim(g, id_colors(64), params);
  auto res = sim.run(bandwidth_mode(BandwidthMode::congest, 64));
  REQUIRE_FALSE(oracle::check_proper_k(g, 2, res.colors).has_value());
  for (auto c : res.colors) REQUIRE(c < params.q);
  REQUIRE(res.phases <= params.q);
}

TEST_CASE("phase invariants: properness, mirrors, scarcity, bit budget") {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    Graph g = gen_graph(GraphModel::gnp, 24, 4, seed);
    const int n = g.n();
    AgParams params = ag_params(n, g.max_degree());
    const std::uint64_t q = params.q;
    Bandwidth bw = bandwidth_mode(BandwidthMode::one_bit);
    Ag2Sim sim(g, id_colors(n), params);
    const auto& dbg = sim.debug();

    const std::uint64_t setup = stream_rounds(2 * value_bits(q), bw);

    // 2-hop pair list and collision counters
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < n; ++u) {
      auto d = bfs_distances(g, u, 2);
      for (int v = u + 1; v < n; ++v)
        if (d[v] >= 1 && d[v] <= 2) pairs.push_back({u, v});
    }
    std::map<std::pair<int, int>, int> both_active_coll, one_final_coll;

    struct Snapshot {
      std::vector<ColorPair> pair;
      std::vector<std::vector<bool>> kf;
    };
    Snapshot snap;
    auto take_snapshot = [&] {
      snap.pair.clear();
      snap.kf.clear();
      for (int v = 0; v < n; ++v) {
        snap.pair.push_back(dbg[v].pair);
        snap.kf.push_back(dbg[v].known_final);
      }
    };
    std::vector<RoundStats> rounds_seen;

    RoundTrace probe;  // filled after run; observer checks on the fly instead
    std::uint64_t phases_checked = 0;
    auto observer = [&](std::uint64_t round) {
      if (round == setup) {
        take_snapshot();
        // collisions present in the input state count toward phase 1 detection
        return;
      }
      if (round < setup || (round - setup) % 2 != 0) return;
      std::uint64_t phase = (round - setup) / 2;
      // properness of the full pair coloring after every phase
      std::vector<std::uint64_t> enc(n);
      for (int v = 0; v < n; ++v) enc[v] = decode_pair(dbg[v].pair, q);
      REQUIRE_FALSE(oracle::check_proper_k(g, 2, enc).has_value());
      // mirror consistency
      for (int v = 0; v < n; ++v)
        for (int i = 0; i < g.degree(v); ++i)
          REQUIRE(dbg[v].mirrors[i] == dbg[g.neighbors(v)[i]].pair);
      // collision tally from the phase-start snapshot
      for (auto [u, w] : pairs) {
        if (snap.pair[u].b == snap.pair[w].b) {
          bool fu = snap.pair[u].finalized(), fw = snap.pair[w].finalized();
          if (!fu && !fw) both_active_coll[{u, w}]++;
          else if (fu != fw) one_final_coll[{u, w}]++;
        }
      }
      take_snapshot();
      phases_checked = phase;
    };

    auto res = sim.run(bw, observer);
    REQUIRE_FALSE(oracle::check_proper_k(g, 2, res.colors).has_value());
    REQUIRE(res.phases <= q);
    for (auto& [pr, c] : both_active_coll) REQUIRE(c <= 1);
    for (auto& [pr, c] : one_final_coll) REQUIRE(c <= 1);

    // bit budget: recompute expected per-round bits from the debug history is
    // involved; assert the cheap global corollary instead: every phase round
    // carries at most one bit per edge-direction.
    for (std::size_t r = setup; r < res.trace.per_round.size(); ++r)
      REQUIRE(res.trace.per_round[r].bits <= 2 * g.edge_count());
    REQUIRE(res.trace.rounds_elapsed >= setup);
  }
}

TEST_CASE("exact per-phase bit accounting on a path") {
  // P3 with IDs: q = 11 (delta 2). Track expected bits phase by phase.
  Graph g = gen_graph(GraphModel::path, 3, 2, 0);
  AgParams params = ag_params(3, 2);
  Bandwidth bw = bandwidth_mode(BandwidthMode::one_bit);
  Ag2Sim sim(g, id_colors(3), params);
  auto res = sim.run(bw);
  const std::uint64_t setup = stream_rounds(2 * value_bits(params.q), bw);
  // input pairs: <0,0>, <0,1>, <0,2> -- everyone finalized at setup, loop skipped
  REQUIRE(res.phases == 0);
  REQUIRE(res.trace.rounds_elapsed == setup + 1);  // drain round after setup
  std::uint64_t after_setup_bits = 0;
  for (std::size_t r = setup; r < res.trace.per_round.size(); ++r)
    after_setup_bits += res.trace.per_round[r].bits;
  REQUIRE(after_setup_bits == 0);
}

TEST_CASE("active phases exchange exactly two bits per edge direction") {
  // C4 with colors chosen so everyone starts active (a != 0) and conflicts
  // exist: all four vertices mutually within distance 2.
  Graph g = gen_graph(GraphModel::cycle, 4, 2, 0);
  AgParams params = ag_params(4 * 11, 2);
  REQUIRE(params.q == 11);
  // colors q*a + b with a != 0, all distinct, same b to force conflicts
  std::vector<std::uint64_t> input{1 * 11 + 5, 2 * 11 + 5, 3 * 11 + 5, 4 * 11 + 5};
  Ag2Sim sim(g, input, params);
  Bandwidth bw = bandwidth_mode(BandwidthMode::one_bit);
  auto res = sim.run(bw);
  const std::uint64_t setup = stream_rounds(2 * value_bits(params.q), bw);
  // phase 1: everyone active, every edge direction carries 1 bit in each of
  // the two rounds of the phase
  REQUIRE(res.trace.per_round.at(setup).bits == 2 * g.edge_count());
  REQUIRE(res.trace.per_round.at(setup + 1).bits == 2 * g.edge_count());
  REQUIRE_FALSE(oracle::check_proper_k(g, 2, res.colors).has_value());
}

TEST_CASE("determinism: reruns are byte-identical") {
  Graph g = gen_graph(GraphModel::gnp, 30, 4, 9);
  AgParams params = ag_params(30, g.max_degree());
  auto r1 = ag2_run(g, id_colors(30), params, bandwidth_mode(BandwidthMode::one_bit));
  auto r2 = ag2_run(g, id_colors(30), params, bandwidth_mode(BandwidthMode::one_bit));
  REQUIRE(r1.trace.to_csv() == r2.trace.to_csv());
  REQUIRE(r1.colors == r2.colors);
}
