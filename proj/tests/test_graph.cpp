#include <algorithm>
#include <random>
#include <set>

#include "catch_amalgamated.hpp"
#include "congestsim/graph.hpp"
#include "congestsim/oracle.hpp"

using namespace congestsim;

namespace {

// Independent distance oracle: Floyd-Warshall, no BFS shared with the library.
std::vector<std::vector<int>> fw_distances(const Graph& g) {
  const int n = g.n();
  const int inf = 1 << 28;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (int v = 0; v < n; ++v) d[v][v] = 0;
  for (auto [u, v] : g.edges()) d[u][v] = d[v][u] = 1;
  for (int w = 0; w < n; ++w)
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v) d[u][v] = std::min(d[u][v], d[u][w] + d[w][v]);
  return d;
}

Graph p5() { return gen_graph(GraphModel::path, 5, 2, 0); }

}  // namespace

TEST_CASE("gen_graph structured models") {
  Graph p = p5();
  REQUIRE(p.n() == 5);
  REQUIRE(p.edges() == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  REQUIRE(p.max_degree() == 2);

  Graph s = gen_graph(GraphModel::star, 5, 4, 0);
  REQUIRE(s.max_degree() == 4);
  REQUIRE(s.degree(0) == 4);
  for (int i = 1; i < 5; ++i) REQUIRE(s.has_edge(0, i));

  Graph c = gen_graph(GraphModel::cycle, 6, 2, 0);
  REQUIRE(c.edge_count() == 6);
  REQUIRE(c.max_degree() == 2);
}

TEST_CASE("gen_graph randomized models are deterministic and degree-capped") {
  Graph a = gen_graph(GraphModel::gnp, 64, 6, 7);
  Graph b = gen_graph(GraphModel::gnp, 64, 6, 7);
  REQUIRE(a.edges() == b.edges());
  REQUIRE(a.max_degree() <= 6);

  Graph c = gen_graph(GraphModel::gnp, 64, 6, 8);
  REQUIRE(a.edges() != c.edges());

  Graph r = gen_graph(GraphModel::random_regularish, 40, 5, 3);
  REQUIRE(r.max_degree() <= 5);
  Graph r2 = gen_graph(GraphModel::random_regularish, 40, 5, 3);
  REQUIRE(r.edges() == r2.edges());

  Graph t = gen_graph(GraphModel::tree, 30, 4, 11);
  REQUIRE(t.edge_count() == 29);
  REQUIRE(t.max_degree() <= 4);
}

TEST_CASE("gen_graph rejects bad arguments") {
  REQUIRE_THROWS_AS(gen_graph(GraphModel::gnp, 10, 99, 0), GraphError);
  REQUIRE_THROWS_AS(gen_graph(GraphModel::path, 0, 0, 0), GraphError);
}

TEST_CASE("graph text format round-trips") {
  Graph p = load_graph("5\n0 1\n1 2\n2 3\n3 4\n");
  REQUIRE(p.edges() == p5().edges());
  REQUIRE(save_graph(p) == "5\n0 1\n1 2\n2 3\n3 4\n");

  Graph g = gen_graph(GraphModel::gnp, 32, 5, 2);
  REQUIRE(load_graph(save_graph(g)).edges() == g.edges());
}

TEST_CASE("graph text format rejects malformed input") {
  REQUIRE_THROWS_AS(load_graph("2\n0 0\n"), GraphError);        // self-loop
  REQUIRE_THROWS_AS(load_graph("2\n0 1\n0 1\n"), GraphError);   // duplicate
  REQUIRE_THROWS_AS(load_graph("2\n1 0\n"), GraphError);        // u >= v
  REQUIRE_THROWS_AS(load_graph("2\n0 5\n"), GraphError);        // out of range
  REQUIRE_THROWS_AS(load_graph("2\nzero one\n"), GraphError);   // garbage
  REQUIRE_THROWS_AS(load_graph(""), GraphError);
}

TEST_CASE("power_graph matches distance thresholding") {
  Graph p = p5();
  Graph p2 = power_graph(p, 2);
  REQUIRE(p2.edges() == std::vector<std::pair<int, int>>{
                            {0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 3}, {2, 4}, {3, 4}});
  REQUIRE(power_graph(p, 1).edges() == p.edges());

  Graph c6 = gen_graph(GraphModel::cycle, 6, 2, 0);
  Graph c63 = power_graph(c6, 3);
  REQUIRE(c63.edge_count() == 15);  // K6

  // cross-check against an independent implementation
  for (std::uint64_t seed : {1, 2, 3}) {
    Graph g = gen_graph(GraphModel::gnp, 40, 5, seed);
    auto fw = fw_distances(g);
    for (int k = 1; k <= 4; ++k) {
      Graph gk = power_graph(g, k);
      for (int u = 0; u < g.n(); ++u)
        for (int v = u + 1; v < g.n(); ++v)
          REQUIRE(gk.has_edge(u, v) == (fw[u][v] >= 1 && fw[u][v] <= k));
    }
  }
}

TEST_CASE("khop_neighborhood") {
  Graph p = p5();
  REQUIRE(khop_neighborhood(p, 2, 2) == std::vector<int>{0, 1, 3, 4});
  REQUIRE(khop_neighborhood(p, 2, 0).empty());

  Graph s = gen_graph(GraphModel::star, 5, 4, 0);
  REQUIRE(khop_neighborhood(s, 1, 2) == std::vector<int>{0, 2, 3, 4});

  // equals the power-graph adjacency row, and size respects the path bound
  Graph g = gen_graph(GraphModel::gnp, 36, 4, 5);
  for (int k = 1; k <= 4; ++k) {
    Graph gk = power_graph(g, k);
    for (int v = 0; v < g.n(); ++v) {
      REQUIRE(khop_neighborhood(g, v, k) == gk.neighbors(v));
      REQUIRE(khop_neighborhood(g, v, k).size() <=
              path_count_bound(std::max(1, g.max_degree()), k));
    }
  }
}

TEST_CASE("bfs_tree deterministic smallest-ID parents") {
  Graph p = p5();
  BfsTree t = bfs_tree(p, 0, 2);
  REQUIRE(t.parent.at(1) == 0);
  REQUIRE(t.parent.at(2) == 1);
  REQUIRE(t.depth.at(0) == 0);
  REQUIRE(t.depth.at(2) == 2);
  REQUIRE_FALSE(t.contains(3));

  Graph c4 = gen_graph(GraphModel::cycle, 4, 2, 0);
  BfsTree tc = bfs_tree(c4, 0, 1);
  REQUIRE(tc.contains(1));
  REQUIRE(tc.contains(3));
  REQUIRE_FALSE(tc.contains(2));

  Graph k4 = Graph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  BfsTree tk = bfs_tree(k4, 2, 2);
  for (int v = 0; v < 4; ++v) {
    REQUIRE(tk.depth.at(v) <= 1);
    if (v != 2) REQUIRE(tk.parent.at(v) == 2);
  }

  // depths equal Floyd-Warshall distances
  Graph g = gen_graph(GraphModel::gnp, 40, 5, 9);
  auto fw = fw_distances(g);
  for (int r = 0; r < g.n(); r += 7) {
    BfsTree t2 = bfs_tree(g, r, 3);
    for (int v = 0; v < g.n(); ++v) {
      if (fw[r][v] <= 3)
        REQUIRE(t2.depth.at(v) == fw[r][v]);
      else
        REQUIRE_FALSE(t2.contains(v));
    }
  }
}

TEST_CASE("select_proxies") {
  Graph c4 = gen_graph(GraphModel::cycle, 4, 2, 0);
  REQUIRE(select_proxies(c4, 0).proxy_of.at(2) == 1);

  REQUIRE(select_proxies(p5(), 0).proxy_of.at(2) == 1);

  Graph s = gen_graph(GraphModel::star, 5, 4, 0);
  auto pa = select_proxies(s, 1);
  for (int leaf : {2, 3, 4}) REQUIRE(pa.proxy_of.at(leaf) == 0);

  // proxies cover exactly the distance-2 set, never distance 1
  Graph g = gen_graph(GraphModel::gnp, 30, 5, 4);
  auto fw = fw_distances(g);
  for (int v = 0; v < g.n(); ++v) {
    auto p = select_proxies(g, v);
    std::set<int> covered;
    for (auto& [w, u] : p.proxy_of) {
      covered.insert(w);
      REQUIRE(g.has_edge(v, u));
      REQUIRE(g.has_edge(u, w));
    }
    for (int w = 0; w < g.n(); ++w)
      REQUIRE(covered.count(w) == (fw[v][w] == 2 ? 1u : 0u));
  }
}

TEST_CASE("path_count_bound") {
  REQUIRE(path_count_bound(3, 2) == 12);
  REQUIRE(path_count_bound(1, 5) == 5);
  REQUIRE(path_count_bound(4, 3) == 84);
  REQUIRE_THROWS_AS(path_count_bound(std::uint64_t(1) << 33, 3), std::overflow_error);
}

TEST_CASE("smallest_prime_above") {
  REQUIRE(smallest_prime_above(32) == 37);
  REQUIRE(smallest_prime_above(2) == 3);
  REQUIRE(smallest_prime_above(18) == 19);
  REQUIRE(smallest_prime_above(1) == 2);
}

TEST_CASE("oracle check_proper_k") {
  Graph p3 = gen_graph(GraphModel::path, 3, 2, 0);
  REQUIRE_FALSE(oracle::check_proper_k(p3, 2, {0, 1, 2}).has_value());
  auto viol = oracle::check_proper_k(p3, 2, {0, 1, 0});
  REQUIRE(viol.has_value());
  REQUIRE(viol->u == 0);
  REQUIRE(viol->v == 2);
  REQUIRE(viol->dist == 2);

  // proper coloring of power_graph(G,k) at distance 1 is proper under (G,k)
  Graph g = gen_graph(GraphModel::gnp, 24, 4, 6);
  for (int k = 1; k <= 3; ++k) {
    auto colors = oracle::greedy_coloring_k(g, k);
    REQUIRE_FALSE(oracle::check_proper_k(g, k, colors).has_value());
    REQUIRE_FALSE(oracle::check_proper_k(power_graph(g, k), 1, colors).has_value());
    REQUIRE(oracle::check_defect_k(g, k, colors) == 0);
  }
}

TEST_CASE("oracle check_defect_k") {
  Graph k3 = Graph::from_edges(3, {{0, 1}, {0, 2}, {1, 2}});
  REQUIRE(oracle::check_defect_k(k3, 1, {7, 7, 7}) == 2);
  REQUIRE(oracle::check_defect_k(p5(), 2, {1, 1, 1, 1, 1}) == 4);  // v2 sees all four
}

TEST_CASE("oracle check_arbdefect") {
  Graph k3 = Graph::from_edges(3, {{0, 1}, {0, 2}, {1, 2}});
  oracle::FinalizeOrder ord{{0, 0, 0}};
  auto bad = oracle::check_arbdefect(k3, 1, {5, 5, 5}, ord, 1);
  REQUIRE_FALSE(bad.ok);
  REQUIRE(bad.violating_vertex == 2);

  auto good = oracle::check_arbdefect(k3, 1, {0, 1, 2}, ord, 0);
  REQUIRE(good.ok);

  auto two = oracle::check_arbdefect(k3, 1, {5, 5, 5}, ord, 2);
  REQUIRE(two.ok);
}

TEST_CASE("oracle check_mis_k") {
  Graph k5 = Graph::from_edges(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {1, 2},
                                   {1, 3}, {1, 4}, {2, 3}, {2, 4}, {3, 4}});
  REQUIRE_FALSE(oracle::check_mis_k(k5, 1, {3}).has_value());
  REQUIRE_FALSE(oracle::check_mis_k(k5, 3, {3}).has_value());

  Graph p7 = gen_graph(GraphModel::path, 7, 2, 0);
  auto indep = oracle::check_mis_k(p7, 2, {0, 2});
  REQUIRE(indep.has_value());
  REQUIRE(indep->kind == oracle::MisViolation::Kind::not_independent);

  auto dom = oracle::check_mis_k(p7, 2, {0});
  REQUIRE(dom.has_value());
  REQUIRE(dom->kind == oracle::MisViolation::Kind::not_dominating);

  // greedy MIS always passes
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    Graph g = gen_graph(GraphModel::gnp, 30, 4, seed);
    for (int k = 1; k <= 3; ++k)
      REQUIRE_FALSE(oracle::check_mis_k(g, k, oracle::greedy_mis_k(g, k)).has_value());
  }
}

TEST_CASE("oracle check_round_budget") {
  REQUIRE(oracle::check_round_budget(5, 4).ok == false);
  REQUIRE(oracle::check_round_budget(0, 0).ok);
  REQUIRE(oracle::check_round_budget(3, 10).ok);
}

TEST_CASE("count_value_khop") {
  Graph p3 = gen_graph(GraphModel::path, 3, 2, 0);
  REQUIRE(oracle::count_value_khop(p3, 2, {4, 4, 4}, 0, 4) == 2);
  REQUIRE(oracle::count_value_khop(p3, 2, {4, 4, 4}, 0, 9) == 0);
}

TEST_CASE("log_star and widths") {
  REQUIRE(log_star(2) == 0);
  REQUIRE(log_star(4) == 1);
  REQUIRE(log_star(64) == 3);
  REQUIRE(value_bits(2) == 1);
  REQUIRE(value_bits(1024) == 10);
  REQUIRE(id_bits(2) == 1);
  REQUIRE(ceil_log2(1) == 0);
}
