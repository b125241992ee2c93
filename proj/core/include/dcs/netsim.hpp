#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <sodium.h>

#include "dcs/types.hpp"

namespace dcs::net {

struct LinkSpec {
  std::uint64_t base_latency_ms = 10;
  std::uint64_t jitter_ms = 0;  // uniform in [0, jitter_ms]
  std::uint64_t bandwidth_bytes_per_ms = 1000;
  double loss_prob = 0.0;
  std::uint32_t buffer_capacity = 4096;  // undelivered messages per channel

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Message classes for the per-class byte/message accounting.
enum class MsgClass : std::uint8_t {
  kProposal = 0,     // carries a full block
  kVote = 1,         // hash + signature only
  kCertificate = 2,  // hash + quorum certificate
  kViewChange = 3,
  kSync = 4,
};
inline constexpr std::size_t kMsgClassCount = 5;
std::string_view msg_class_name(MsgClass c);

struct Payload {
  std::shared_ptr<const Bytes> bytes;
  std::uint32_t size_bytes = 0;  // byte-model size, not bytes->size()
  MsgClass cls = MsgClass::kVote;
};

struct NetMessage {
  NodeId from = 0;
  NodeId to = 0;
  Payload payload;
};

using TimerId = std::uint32_t;

/// Receiver of dispatched events; implemented by whoever owns the engines.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_deliver(const NetMessage& msg, SimTime now) = 0;
  virtual void on_timer(NodeId node, TimerId id, SimTime now) = 0;
  virtual void on_inject(const Transaction& tx, SimTime now) = 0;
};

class UnknownLink : public std::runtime_error {
 public:
  UnknownLink(NodeId from, NodeId to)
      : std::runtime_error("unknown link " + std::to_string(from) + " -> " + std::to_string(to)) {}
};

class EventOverflow : public std::runtime_error {
 public:
  explicit EventOverflow(std::uint64_t cap)
      : std::runtime_error("event cap exceeded (" + std::to_string(cap) + ")") {}
};

struct Counters {
  std::uint64_t events_processed = 0;
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped_loss = 0;
  std::uint64_t dropped_partition = 0;
  std::uint64_t dropped_buffer = 0;
  std::uint64_t in_flight = 0;
  std::uint64_t timers_fired = 0;
  std::uint64_t txs_injected = 0;
  std::array<std::uint64_t, kMsgClassCount> msgs_by_class{};
  std::array<std::uint64_t, kMsgClassCount> bytes_by_class{};

  std::uint64_t dropped() const { return dropped_loss + dropped_partition + dropped_buffer; }
  std::uint64_t total_bytes() const;
};

struct RunReport {
  Counters counters;
  SimTime final_time = 0;
  Digest trace_hash{};

  /// Compact JSON with a fixed key order.
  std::string to_json() const;
};

struct NetworkOptions {
  std::uint64_t event_cap = 200'000'000;
};

/// Deterministic discrete-event network. The single clock of a simulated
/// world; one thread advances it.
class Network {
 public:
  Network(std::uint32_t node_count, std::uint64_t seed, NetworkOptions options = {});

  std::uint32_t node_count() const { return node_count_; }

  void set_default_link(const LinkSpec& spec);
  void clear_default_link() { default_link_.reset(); }
  void set_link(NodeId from, NodeId to, const LinkSpec& spec);
  /// Throws UnknownLink.
  const LinkSpec& link(NodeId from, NodeId to) const;

  /// Schedules delivery of `payload` sent at time `at` (>= now). Returns false
  /// when the message was dropped (loss, partition, or full channel buffer).
  bool send(NodeId from, NodeId to, Payload payload, SimTime at);

  /// Schedules (or re-schedules) timer `id` of `node` at now + delay_ms.
  void set_timer(NodeId node, TimerId id, SimTime delay_ms);
  void cancel_timer(NodeId node, TimerId id);
  bool timer_pending(NodeId node, TimerId id) const;

  void inject_tx(Transaction tx, SimTime at);

  /// Drops every send crossing the two groups issued within [from, until).
  void partition(std::set<NodeId> group_a, std::set<NodeId> group_b, SimTime from, SimTime until);

  /// Dispatches events in (due, seq) order until the queue is empty, the next
  /// event is later than `limit`, or request_stop() was called.
  RunReport run_until(SimTime limit, EventSink& sink);
  void request_stop() { stop_ = true; }

  SimTime now() const { return now_; }
  bool idle() const { return queue_.empty(); }
  const Counters& counters() const { return counters_; }
  Digest trace_hash() const;
  RunReport report() const;

 private:
  struct Deliver {
    NetMessage msg;
  };
  struct Timer {
    NodeId node;
    TimerId id;
  };
  struct Inject {
    Transaction tx;
  };
  struct Event {
    SimTime due;
    std::uint64_t seq;
    std::variant<Deliver, Timer, Inject> kind;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.due != b.due ? a.due > b.due : a.seq > b.seq;
    }
  };
  struct Partition {
    std::set<NodeId> a;
    std::set<NodeId> b;
    SimTime from;
    SimTime until;
  };

  static std::uint64_t key(NodeId a, std::uint32_t b) { return std::uint64_t{a} << 32 | b; }
  std::uint64_t draw_below(std::uint64_t bound);  // uniform in [0, bound)
  double draw_unit();
  bool partitioned(NodeId from, NodeId to, SimTime at) const;
  void record_trace(const Event& ev);

  std::uint32_t node_count_;
  NetworkOptions options_;
  std::mt19937_64 rng_;
  std::optional<LinkSpec> default_link_;
  std::map<std::pair<NodeId, NodeId>, LinkSpec> links_;
  std::vector<Partition> partitions_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_map<std::uint64_t, std::uint64_t> active_timers_;  // (node,id) -> seq
  std::unordered_map<std::uint64_t, std::uint32_t> channel_load_;   // (from,to) -> undelivered
  std::uint64_t next_seq_ = 0;
  SimTime now_ = 0;
  bool stop_ = false;
  Counters counters_;
  crypto_hash_sha256_state trace_{};
};

}  // namespace dcs::net
