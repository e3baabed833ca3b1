#pragma once

#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "congestsim/bits.hpp"
#include "congestsim/engine.hpp"

// Coroutine front-end for writing vertex protocols as straight-line code.
// The only suspension point is an exchange: "send these per-neighbor payloads
// over the next R engine rounds, resume me with whatever arrived". The
// CoroVertex adapter chunks payloads to the bandwidth cap and reassembles
// incoming chunks, so algorithm code deals in whole logical messages while
// the engine still sees (and charges for) every round and bit.

namespace congestsim {

template <typename T>
class Task;

namespace detail {

template <typename T>
struct TaskPromiseBase {
  std::coroutine_handle<> continuation;
  std::exception_ptr exception;

  std::suspend_always initial_suspend() noexcept { return {}; }

  struct FinalAwaiter {
    bool await_ready() noexcept { return false; }
    template <typename P>
    std::coroutine_handle<> await_suspend(std::coroutine_handle<P> h) noexcept {
      auto c = h.promise().continuation;
      return c ? c : std::noop_coroutine();
    }
    void await_resume() noexcept {}
  };
  FinalAwaiter final_suspend() noexcept { return {}; }
  void unhandled_exception() { exception = std::current_exception(); }
};

}  // namespace detail

/// Lazily-started coroutine task; co_awaiting it runs it to completion
/// and resumes the awaiter (symmetric transfer).
template <typename T = void>
class [[nodiscard]] Task {
 public:
  struct promise_type : detail::TaskPromiseBase<T> {
    std::optional<T> value;
    Task get_return_object() {
      return Task(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    void return_value(T v) { value = std::move(v); }
  };

  Task() = default;
  Task(Task&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  Task& operator=(Task&& o) noexcept {
    if (this != &o) {
      destroy();
      h_ = std::exchange(o.h_, {});
    }
    return *this;
  }
  ~Task() { destroy(); }

  bool valid() const { return static_cast<bool>(h_); }
  bool done() const { return h_.done(); }
  std::coroutine_handle<promise_type> handle() const { return h_; }

  bool await_ready() const noexcept { return !h_ || h_.done(); }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept {
    h_.promise().continuation = parent;
    return h_;
  }
  T await_resume() {
    if (h_.promise().exception) std::rethrow_exception(h_.promise().exception);
    return std::move(*h_.promise().value);
  }

 private:
  explicit Task(std::coroutine_handle<promise_type> h) : h_(h) {}
  void destroy() {
    if (h_) h_.destroy();
    h_ = {};
  }
  std::coroutine_handle<promise_type> h_;
};

template <>
class [[nodiscard]] Task<void> {
 public:
  struct promise_type : detail::TaskPromiseBase<void> {
    Task get_return_object() {
      return Task(std::coroutine_handle<promise_type>::from_promise(*this));
    }
    void return_void() {}
  };

  Task() = default;
  Task(Task&& o) noexcept : h_(std::exchange(o.h_, {})) {}
  Task& operator=(Task&& o) noexcept {
    if (this != &o) {
      destroy();
      h_ = std::exchange(o.h_, {});
    }
    return *this;
  }
  ~Task() { destroy(); }

  bool valid() const { return static_cast<bool>(h_); }
  bool done() const { return h_.done(); }
  std::coroutine_handle<promise_type> handle() const { return h_; }
  std::exception_ptr exception() const { return h_.promise().exception; }

  bool await_ready() const noexcept { return !h_ || h_.done(); }
  std::coroutine_handle<> await_suspend(std::coroutine_handle<> parent) noexcept {
    h_.promise().continuation = parent;
    return h_;
  }
  void await_resume() {
    if (h_.promise().exception) std::rethrow_exception(h_.promise().exception);
  }

 private:
  explicit Task(std::coroutine_handle<promise_type> h) : h_(h) {}
  void destroy() {
    if (h_) h_.destroy();
    h_ = {};
  }
  std::coroutine_handle<promise_type> h_;
};

struct ExchangeRequest {
  std::vector<BitString> out;  // one payload per neighbor; empty = send nothing
  std::uint64_t rounds = 0;    // engine rounds this exchange spans (same at every vertex)
  std::vector<BitString> in;   // reassembled per-neighbor payloads
};

class ProcCtx;

/// Awaitable created by ProcCtx::exchange.
class ExchangeAwaiter {
 public:
  ExchangeAwaiter(ProcCtx& ctx, std::vector<BitString> out, std::uint64_t rounds);
  bool await_ready() const noexcept { return req_.rounds == 0; }
  void await_suspend(std::coroutine_handle<> h);
  std::vector<BitString> await_resume() { return std::move(req_.in); }

 private:
  ProcCtx& ctx_;
  ExchangeRequest req_;
  friend class CoroVertex;
};

/// Per-vertex execution context handed to protocol coroutines.
class ProcCtx {
 public:
  int id() const { return init_.id; }
  int n() const { return init_.n; }
  int delta() const { return init_.max_degree; }
  int degree() const { return static_cast<int>(init_.neighbor_ids.size()); }
  int neighbor(int i) const { return init_.neighbor_ids[i]; }
  std::span<const int> neighbors() const { return init_.neighbor_ids; }
  int bandwidth() const { return init_.bandwidth.bits_per_edge_per_round; }
  Bandwidth bw() const { return init_.bandwidth; }
  std::uint64_t round() const { return round_; }

  /// Send `out[i]` to neighbor i, spread over `rounds` engine rounds; resumes
  /// with the concatenation of everything each neighbor sent back during the
  /// same window. rounds must cover the longest payload.
  ExchangeAwaiter exchange(std::vector<BitString> out, std::uint64_t rounds) {
    return ExchangeAwaiter(*this, std::move(out), rounds);
  }

  /// Same payload to every neighbor.
  ExchangeAwaiter exchange_all(const BitString& payload, std::uint64_t rounds) {
    std::vector<BitString> out(degree(), payload);
    return ExchangeAwaiter(*this, std::move(out), rounds);
  }

  /// Quiet participation: consume `rounds` engine rounds without sending.
  ExchangeAwaiter idle(std::uint64_t rounds) {
    return ExchangeAwaiter(*this, std::vector<BitString>(degree()), rounds);
  }

  void set_output(std::uint64_t v) { output_ = v; }
  std::uint64_t output() const { return output_; }

  /// Record the engine round at which a named protocol segment ended.
  void mark(const std::string& name) { marks_.push_back({name, round_}); }
  const std::vector<std::pair<std::string, std::uint64_t>>& marks() const { return marks_; }
  std::uint64_t mark_round(const std::string& name) const {
    for (auto& [k, r] : marks_)
      if (k == name) return r;
    throw EngineError("missing segment mark: " + name);
  }

 private:
  friend class CoroVertex;
  friend class ExchangeAwaiter;

  VertexInit init_;
  std::uint64_t round_ = 0;
  std::uint64_t output_ = 0;
  ExchangeRequest* pending_ = nullptr;
  std::coroutine_handle<> resume_point_;
  std::vector<std::pair<std::string, std::uint64_t>> marks_;
};

inline ExchangeAwaiter::ExchangeAwaiter(ProcCtx& ctx, std::vector<BitString> out,
                                        std::uint64_t rounds)
    : ctx_(ctx) {
  if (out.size() != static_cast<std::size_t>(ctx.degree()))
    throw EngineError("exchange needs one payload slot per neighbor");
  const std::uint64_t cap = rounds * static_cast<std::uint64_t>(ctx.bandwidth());
  for (auto& b : out)
    if (b.size() > cap) throw EngineError("exchange payload exceeds allotted rounds");
  req_.out = std::move(out);
  req_.rounds = rounds;
  req_.in.resize(ctx.degree());
}

inline void ExchangeAwaiter::await_suspend(std::coroutine_handle<> h) {
  ctx_.pending_ = &req_;
  ctx_.resume_point_ = h;
}

/// Adapts a protocol coroutine onto the engine's VertexProcess contract.
class CoroVertex : public VertexProcess {
 public:
  using Body = std::function<Task<void>(ProcCtx&)>;

  explicit CoroVertex(Body body) : body_(std::move(body)) {}

  void init(const VertexInit& ctx) override {
    pctx_ = std::make_unique<ProcCtx>();
    pctx_->init_ = ctx;
    root_ = body_(*pctx_);
    pctx_->resume_point_ = root_.handle();
    advance();
  }

  Outbox on_round(const Inbox& inbox, std::uint64_t round) override {
    pctx_->round_ = round;
    // receive phase: chunks from the previous round belong to the exchange
    // that is one send ahead
    bool any_in = false;
    for (auto& m : inbox) any_in |= m.has_value();
    if (cur_ && sent_ > recvd_) {
      for (std::size_t i = 0; i < inbox.size(); ++i)
        if (inbox[i]) cur_->in[i].append(inbox[i]->payload);
      ++recvd_;
      if (recvd_ == cur_->rounds) advance();
    } else if (any_in) {
      throw EngineError("unexpected message: vertex " + std::to_string(pctx_->id()) +
                        " has no exchange awaiting input at round " + std::to_string(round));
    }
    Outbox out(pctx_->degree());
    if (!halted_ && cur_ && sent_ < cur_->rounds) {
      const int B = pctx_->bandwidth();
      for (int i = 0; i < pctx_->degree(); ++i) {
        BitString chunk = cur_->out[i].slice(sent_ * B, B);
        if (!chunk.empty()) out[i] = Message{std::move(chunk)};
      }
      ++sent_;
    }
    return out;
  }

  bool halted() const override { return halted_; }
  std::uint64_t output() const override { return pctx_ ? pctx_->output() : 0; }
  ProcCtx& ctx() { return *pctx_; }

 private:
  void advance() {
    cur_ = nullptr;
    pctx_->pending_ = nullptr;
    pctx_->resume_point_.resume();
    if (root_.done()) {
      if (auto e = root_.exception()) std::rethrow_exception(e);
      halted_ = true;
      return;
    }
    if (!pctx_->pending_)
      throw EngineError("coroutine suspended without an exchange");
    cur_ = pctx_->pending_;
    sent_ = 0;
    recvd_ = 0;
  }

  Body body_;
  std::unique_ptr<ProcCtx> pctx_;
  Task<void> root_;
  ExchangeRequest* cur_ = nullptr;
  std::uint64_t sent_ = 0;
  std::uint64_t recvd_ = 0;
  bool halted_ = false;
};

// ---------------------------------------------------------------------------
// small encode/decode helpers shared by the protocol implementations

inline std::optional<std::uint64_t> dec_value(const BitString& b, int width) {
  if (b.empty()) return std::nullopt;
  BitReader r(b);
  return r.read_uint(width);
}

/// Builds one process per vertex from a per-vertex coroutine factory.
inline std::vector<std::unique_ptr<VertexProcess>> make_processes(
    int n, const std::function<CoroVertex::Body(int)>& body_for) {
  std::vector<std::unique_ptr<VertexProcess>> procs;
  procs.reserve(n);
  for (int v = 0; v < n; ++v) procs.push_back(std::make_unique<CoroVertex>(body_for(v)));
  return procs;
}

}  // namespace congestsim
