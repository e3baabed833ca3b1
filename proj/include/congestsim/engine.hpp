#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "congestsim/bits.hpp"
#include "congestsim/graph.hpp"

namespace congestsim {

struct Bandwidth {
  int bits_per_edge_per_round = 1;
};

enum class BandwidthMode { one_bit, congest };

inline Bandwidth bandwidth_mode(BandwidthMode mode, int n = 0) {
  switch (mode) {
    case BandwidthMode::one_bit:
      return Bandwidth{1};
    case BandwidthMode::congest:
      if (n < 1) throw std::invalid_argument("congest mode needs n");
      return Bandwidth{std::max(1, ceil_log2(static_cast<std::uint64_t>(n)))};
  }
  throw std::invalid_argument("unknown bandwidth mode");
}

/// Rounds to push an L-bit payload over one edge at B bits per round.
inline std::uint64_t stream_rounds(std::uint64_t payload_bits, Bandwidth bw) {
  if (payload_bits == 0) return 0;
  return div_ceil(payload_bits, static_cast<std::uint64_t>(bw.bits_per_edge_per_round));
}

struct Message {
  BitString payload;
  std::size_t bit_len() const { return payload.size(); }
};

using Inbox = std::vector<std::optional<Message>>;   // indexed by neighbor position
using Outbox = std::vector<std::optional<Message>>;  // indexed by neighbor position

struct VertexInit {
  int id = 0;
  int n = 0;
  int max_degree = 0;
  std::span<const int> neighbor_ids;
  Bandwidth bandwidth;
};

/// Per-vertex protocol state machine. on_round must depend only on own state,
/// the inbox, and the round number. Once halted the outbox stays empty.
class VertexProcess {
 public:
  virtual ~VertexProcess() = default;
  virtual void init(const VertexInit& ctx) = 0;
  virtual Outbox on_round(const Inbox& inbox, std::uint64_t round) = 0;
  virtual bool halted() const = 0;
  virtual std::uint64_t output() const { return 0; }
};

class BandwidthExceeded : public std::runtime_error {
 public:
  BandwidthExceeded(int vertex, std::uint64_t round, std::size_t bits, int cap)
      : std::runtime_error(make(vertex, round, bits, cap)), vertex(vertex), round(round) {}
  int vertex;
  std::uint64_t round;

 private:
  static std::string make(int vertex, std::uint64_t round, std::size_t bits, int cap) {
    std::ostringstream os;
    os << "bandwidth exceeded: vertex " << vertex << " sent " << bits << " bits in round "
       << round << " (cap " << cap << ")";
    return os.str();
  }
};

class EngineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RoundStats {
  std::uint64_t messages = 0;
  std::uint64_t bits = 0;
};

struct RoundTrace {
  enum class Outcome { completed, round_cap_reached };

  std::uint64_t rounds_elapsed = 0;
  std::uint64_t total_messages = 0;
  std::uint64_t total_bits = 0;
  std::vector<RoundStats> per_round;
  std::vector<std::uint64_t> outputs;
  Outcome outcome = Outcome::completed;

  std::string to_csv() const {
    std::ostringstream os;
    os << "round,messages,bits\n";
    for (std::size_t i = 0; i < per_round.size(); ++i)
      os << (i + 1) << "," << per_round[i].messages << "," << per_round[i].bits << "\n";
    return os.str();
  }
};

using RoundObserver = std::function<void(std::uint64_t round)>;

/// Lockstep simulation: messages sent in round r arrive in round r+1's inbox.
/// Vertices are stepped in ascending ID order; inboxes are snapshotted at
/// round boundaries so the order is unobservable.
inline RoundTrace run(const Graph& g, std::vector<std::unique_ptr<VertexProcess>>& procs,
                      Bandwidth bw, std::uint64_t max_rounds,
                      const RoundObserver& observer = {}) {
  const int n = g.n();
  if (static_cast<int>(procs.size()) != n)
    throw EngineError("need exactly one process per vertex");
  if (max_rounds < 1) throw EngineError("max_rounds must be >= 1");

  // cross[v][i]: position of v inside the adjacency list of its i-th neighbor
  std::vector<std::vector<int>> cross(n);
  for (int v = 0; v < n; ++v) {
    cross[v].resize(g.degree(v));
    for (int i = 0; i < g.degree(v); ++i) {
      int u = g.neighbors(v)[i];
      auto& lst = g.neighbors(u);
      cross[v][i] =
          static_cast<int>(std::lower_bound(lst.begin(), lst.end(), v) - lst.begin());
    }
  }

  for (int v = 0; v < n; ++v)
    procs[v]->init(VertexInit{v, n, g.max_degree(),
                              std::span<const int>(g.neighbors(v).data(), g.degree(v)), bw});

  RoundTrace trace;
  std::vector<Inbox> inboxes(n);
  for (int v = 0; v < n; ++v) inboxes[v].resize(g.degree(v));

  auto all_halted = [&] {
    for (auto& p : procs)
      if (!p->halted()) return false;
    return true;
  };

  bool completed = all_halted();
  for (std::uint64_t round = 1; !completed && round <= max_rounds; ++round) {
    std::vector<Inbox> next(n);
    for (int v = 0; v < n; ++v) next[v].resize(g.degree(v));
    RoundStats rs;
    for (int v = 0; v < n; ++v) {
      if (procs[v]->halted()) continue;
      Outbox out = procs[v]->on_round(inboxes[v], round);
      if (out.size() != static_cast<std::size_t>(g.degree(v)))
        throw EngineError("outbox size does not match degree");
      bool sent_any = false;
      for (int i = 0; i < g.degree(v); ++i) {
        if (!out[i]) continue;
        std::size_t bits = out[i]->bit_len();
        if (bits > static_cast<std::size_t>(bw.bits_per_edge_per_round))
          throw BandwidthExceeded(v, round, bits, bw.bits_per_edge_per_round);
        sent_any = true;
        ++rs.messages;
        rs.bits += bits;
        next[g.neighbors(v)[i]][cross[v][i]] = std::move(*out[i]);
      }
      if (sent_any && procs[v]->halted())
        throw EngineError("process halted with pending sends");
    }
    inboxes = std::move(next);
    trace.per_round.push_back(rs);
    trace.total_messages += rs.messages;
    trace.total_bits += rs.bits;
    trace.rounds_elapsed = round;
    if (observer) observer(round);
    completed = all_halted();
  }

  trace.outcome = completed ? RoundTrace::Outcome::completed
                            : RoundTrace::Outcome::round_cap_reached;
  trace.outputs.resize(n);
  for (int v = 0; v < n; ++v) trace.outputs[v] = procs[v]->output();
  return trace;
}

}  // namespace congestsim
