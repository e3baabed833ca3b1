// Experiment runner: graph generation, algorithm execution, verification,
// and benchmark sweeps over the simulator library.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "congestsim/bench.hpp"
#include "congestsim/engine.hpp"
#include "congestsim/errors.hpp"
#include "congestsim/graph.hpp"
#include "congestsim/oracle.hpp"

namespace cs = congestsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::vector<std::uint64_t> load_coloring(const std::string& text, int n) {
  std::vector<std::uint64_t> colors(n, 0);
  std::vector<bool> seen(n, false);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int v;
    std::uint64_t c;
    if (!(ls >> v >> c)) throw std::runtime_error("malformed coloring line: " + line);
    if (v < 0 || v >= n) throw std::runtime_error("vertex out of range: " + line);
    colors[v] = c;
    seen[v] = true;
  }
  for (int v = 0; v < n; ++v)
    if (!seen[v]) throw std::runtime_error("missing color for vertex " + std::to_string(v));
  return colors;
}

std::string save_coloring(const std::vector<std::uint64_t>& colors) {
  std::ostringstream os;
  for (std::size_t v = 0; v < colors.size(); ++v) os << v << " " << colors[v] << "\n";
  return os.str();
}

std::set<int> load_mis(const std::string& text, int n) {
  std::set<int> s;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int v = std::stoi(line);
    if (v < 0 || v >= n) throw std::runtime_error("vertex out of range: " + line);
    s.insert(v);
  }
  return s;
}

std::string save_mis(const std::set<int>& s) {
  std::ostringstream os;
  for (int v : s) os << v << "\n";
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"round-synchronous CONGEST simulator and power-graph coloring toolkit"};
  app.require_subcommand(1);

  // --- gen ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate a graph file");
  std::string gen_model = "gnp", gen_out;
  int gen_n = 0, gen_deg = -1;
  std::uint64_t gen_seed = 1;
  gen->add_option("--model", gen_model, "path|cycle|star|tree|gnp|random_regularish");
  gen->add_option("--n", gen_n, "vertex count")->required();
  gen->add_option("--deg", gen_deg, "target max degree (default n-1)");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output file (stdout if omitted)");

  // --- run ---------------------------------------------------------------
  auto* run = app.add_subcommand("run", "run an algorithm on a graph");
  std::string run_algo, run_graph, run_bw = "congest", run_out, run_csv, run_trace;
  int run_k = 2;
  run->add_option("--algo", run_algo,
                  "linial2|ag2|fast2|linialk|agk|fastk|misk|transform-baseline|naive-baseline")
      ->required();
  run->add_option("--graph", run_graph, "graph file")->required();
  run->add_option("--k", run_k, "power-graph exponent (default 2)");
  run->add_option("--bandwidth", run_bw, "one_bit|congest|B:<int>");
  run->add_option("--out", run_out, "coloring or MIS output file");
  run->add_option("--csv", run_csv, "append a summary row to this CSV file");
  run->add_option("--trace", run_trace, "write the per-round trace CSV here");

  // --- verify ------------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "check a coloring or MIS file");
  std::string ver_graph, ver_colors, ver_mis, ver_order;
  int ver_k = 2, ver_maxdefect = -1;
  verify->add_option("--graph", ver_graph, "graph file")->required();
  verify->add_option("--k", ver_k, "distance bound (default 2)");
  verify->add_option("--colors", ver_colors, "coloring file to check");
  verify->add_option("--mis", ver_mis, "MIS file to check");
  verify->add_option("--maxdefect", ver_maxdefect,
                     "check arbdefectiveness against this bound instead of properness");
  verify->add_option("--order", ver_order, "finalize-round file (vertex round per line)");

  // --- bench -------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "run a sweep from a plain-text config");
  std::string bench_config, bench_out;
  bench->add_option("--config", bench_config, "key=value config file")->required();
  bench->add_option("--out", bench_out, "CSV output file (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      auto model = cs::parse_graph_model(gen_model);
      if (!model) {
        std::cerr << "unknown model: " << gen_model << "\n";
        return kExitUsage;
      }
      if (gen_deg < 0) gen_deg = gen_n - 1;
      cs::Graph g = cs::gen_graph(*model, gen_n, gen_deg, gen_seed);
      std::string text = cs::save_graph(g);
      if (gen_out.empty())
        std::cout << text;
      else
        write_file(gen_out, text);
      return kExitOk;
    }

    if (run->parsed()) {
      cs::Graph g = cs::load_graph(read_file(run_graph));
      bool two_dist =
          run_algo == "linial2" || run_algo == "ag2" || run_algo == "fast2";
      if (two_dist && run_k != 2) {
        std::cerr << "algorithm " << run_algo << " requires --k 2\n";
        return kExitUsage;
      }
      cs::Bandwidth bw;
      try {
        bw = cs::bench::parse_bandwidth(run_bw, g.n());
      } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
      }
      cs::bench::RunOutput out;
      try {
        out = cs::bench::run_algo(run_algo, g, run_k, bw);
      } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
      }
      if (!run_out.empty())
        write_file(run_out, out.is_mis ? save_mis(out.mis) : save_coloring(out.colors));
      if (!run_trace.empty()) write_file(run_trace, out.trace_csv);
      if (!run_csv.empty()) {
        std::ifstream probe(run_csv);
        bool fresh = !probe.good() || probe.peek() == std::ifstream::traits_type::eof();
        probe.close();
        std::ofstream csv(run_csv, std::ios::app);
        if (fresh) csv << cs::bench::csv_header() << "\n";
        csv << out.row.to_csv() << "\n";
      }
      std::cout << cs::bench::csv_header() << "\n" << out.row.to_csv() << "\n";
      return out.row.valid ? kExitOk : kExitVerifyFailed;
    }

    if (verify->parsed()) {
      cs::Graph g = cs::load_graph(read_file(ver_graph));
      if (!ver_colors.empty() && ver_maxdefect < 0) {
        auto colors = load_coloring(read_file(ver_colors), g.n());
        auto viol = cs::oracle::check_proper_k(g, ver_k, colors);
        if (viol) {
          std::cout << "violation: vertices " << viol->u << " and " << viol->v
                    << " share a color at distance " << viol->dist << "\n";
          return kExitVerifyFailed;
        }
        std::cout << "ok\n";
        return kExitOk;
      }
      if (!ver_colors.empty()) {
        auto colors = load_coloring(read_file(ver_colors), g.n());
        cs::oracle::FinalizeOrder order;
        order.round.assign(g.n(), 0);
        if (!ver_order.empty()) {
          std::istringstream in(read_file(ver_order));
          std::string line;
          while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            int v, r;
            if (!(ls >> v >> r)) throw std::runtime_error("malformed order line: " + line);
            order.round.at(v) = r;
          }
        }
        auto res = cs::oracle::check_arbdefect(g, ver_k, colors, order, ver_maxdefect);
        if (!res.ok) {
          std::cout << "violation: vertex " << res.violating_vertex << " (" << res.reason
                    << ")\n";
          return kExitVerifyFailed;
        }
        std::cout << "ok\n";
        return kExitOk;
      }
      if (!ver_mis.empty()) {
        auto s = load_mis(read_file(ver_mis), g.n());
        auto viol = cs::oracle::check_mis_k(g, ver_k, s);
        if (viol) {
          if (viol->kind == cs::oracle::MisViolation::Kind::not_independent)
            std::cout << "violation: members " << viol->u << " and " << viol->v
                      << " are within distance " << ver_k << "\n";
          else
            std::cout << "violation: vertex " << viol->u << " is undominated\n";
          return kExitVerifyFailed;
        }
        std::cout << "ok\n";
        return kExitOk;
      }
      std::cerr << "verify needs --colors or --mis\n";
      return kExitUsage;
    }

    if (bench->parsed()) {
      cs::bench::BenchConfig cfg;
      try {
        cfg = cs::bench::parse_bench_config(read_file(bench_config));
      } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
      }
      std::vector<cs::bench::Row> rows;
      try {
        rows = cs::bench::run_bench(cfg);
      } catch (const std::invalid_argument& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
      }
      std::ostringstream os;
      os << cs::bench::csv_header() << "\n";
      for (auto& r : rows) os << r.to_csv() << "\n";
      if (bench_out.empty())
        std::cout << os.str();
      else
        write_file(bench_out, os.str());
      return kExitOk;
    }
  } catch (const cs::BandwidthExceeded& e) {
    std::cerr << "internal: " << e.what() << "\n";
    return kExitInternal;
  } catch (const cs::RoundCapError& e) {
    std::cerr << "internal: " << e.what() << "\n";
    return kExitInternal;
  } catch (const cs::GraphError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
