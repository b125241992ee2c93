#include "dcs/netsim.hpp"

#include <algorithm>

#include "json.hpp"
#include "sodium_init.hpp"

namespace dcs::net {

void LinkSpec::validate() const {
  if (bandwidth_bytes_per_ms == 0) throw std::invalid_argument("bandwidth_bytes_per_ms must be positive");
  if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw std::invalid_argument("loss_prob must be in [0, 1]");
  if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
}

std::string_view msg_class_name(MsgClass c) {
  switch (c) {
    case MsgClass::kProposal:
      return "proposal";
    case MsgClass::kVote:
      return "vote";
    case MsgClass::kCertificate:
      return "certificate";
    case MsgClass::kViewChange:
      return "view_change";
    case MsgClass::kSync:
      return "sync";
  }
  return "unknown";
}

std::uint64_t Counters::total_bytes() const {
  std::uint64_t total = 0;
  for (auto b : bytes_by_class) total += b;
  return total;
}

std::string RunReport::to_json() const {
  nlohmann::ordered_json j;
  j["events_processed"] = counters.events_processed;
  j["messages_sent"] = counters.sent;
  j["messages_delivered"] = counters.delivered;
  j["messages_dropped"] = counters.dropped();
  j["dropped_loss"] = counters.dropped_loss;
  j["dropped_partition"] = counters.dropped_partition;
  j["dropped_buffer"] = counters.dropped_buffer;
  j["in_flight"] = counters.in_flight;
  j["timers_fired"] = counters.timers_fired;
  j["txs_injected"] = counters.txs_injected;
  nlohmann::ordered_json msgs, bytes;
  for (std::size_t i = 0; i < kMsgClassCount; ++i) {
    auto name = std::string(msg_class_name(static_cast<MsgClass>(i)));
    msgs[name] = counters.msgs_by_class[i];
    bytes[name] = counters.bytes_by_class[i];
  }
  j["messages_by_class"] = msgs;
  j["bytes_by_class"] = bytes;
  j["final_time_ms"] = final_time;
  j["trace_hash"] = to_hex(trace_hash);
  return j.dump();
}

Network::Network(std::uint32_t node_count, std::uint64_t seed, NetworkOptions options)
    : node_count_(node_count), options_(options), rng_(seed) {
  detail::ensure_sodium();
  crypto_hash_sha256_init(&trace_);
}

void Network::set_default_link(const LinkSpec& spec) {
  spec.validate();
  default_link_ = spec;
}

void Network::set_link(NodeId from, NodeId to, const LinkSpec& spec) {
  spec.validate();
  links_[{from, to}] = spec;
}

const LinkSpec& Network::link(NodeId from, NodeId to) const {
  if (from >= node_count_ || to >= node_count_) throw UnknownLink(from, to);
  if (auto it = links_.find({from, to}); it != links_.end()) return it->second;
  if (default_link_) return *default_link_;
  throw UnknownLink(from, to);
}

std::uint64_t Network::draw_below(std::uint64_t bound) {
  // Rejection sampling keeps the draw platform-independent, unlike
  // std::uniform_int_distribution.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = rng_();
  } while (x >= limit);
  return x % bound;
}

double Network::draw_unit() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

bool Network::partitioned(NodeId from, NodeId to, SimTime at) const {
  for (const auto& p : partitions_) {
    if (at < p.from || at >= p.until) continue;
    if ((p.a.contains(from) && p.b.contains(to)) || (p.b.contains(from) && p.a.contains(to))) {
      return true;
    }
  }
  return false;
}

bool Network::send(NodeId from, NodeId to, Payload payload, SimTime at) {
  const auto& spec = link(from, to);
  at = std::max(at, now_);
  ++counters_.sent;
  auto cls = static_cast<std::size_t>(payload.cls);
  ++counters_.msgs_by_class[cls];
  counters_.bytes_by_class[cls] += payload.size_bytes;

  if (partitioned(from, to, at)) {
    ++counters_.dropped_partition;
    return false;
  }
  if (spec.loss_prob > 0.0 && draw_unit() < spec.loss_prob) {
    ++counters_.dropped_loss;
    return false;
  }
  auto& load = channel_load_[key(from, to)];
  if (load >= spec.buffer_capacity) {
    ++counters_.dropped_buffer;
    return false;
  }
  std::uint64_t jitter = spec.jitter_ms > 0 ? draw_below(spec.jitter_ms + 1) : 0;
  std::uint64_t transfer =
      (payload.size_bytes + spec.bandwidth_bytes_per_ms - 1) / spec.bandwidth_bytes_per_ms;
  ++load;
  ++counters_.in_flight;
  queue_.push(Event{at + spec.base_latency_ms + jitter + transfer, next_seq_++,
                    Deliver{NetMessage{from, to, std::move(payload)}}});
  return true;
}

void Network::set_timer(NodeId node, TimerId id, SimTime delay_ms) {
  if (delay_ms == 0) throw std::invalid_argument("timer delay must be positive");
  auto seq = next_seq_++;
  active_timers_[key(node, id)] = seq;
  queue_.push(Event{now_ + delay_ms, seq, Timer{node, id}});
}

void Network::cancel_timer(NodeId node, TimerId id) { active_timers_.erase(key(node, id)); }

bool Network::timer_pending(NodeId node, TimerId id) const {
  return active_timers_.contains(key(node, id));
}

void Network::inject_tx(Transaction tx, SimTime at) {
  queue_.push(Event{std::max(at, now_), next_seq_++, Inject{std::move(tx)}});
}

void Network::partition(std::set<NodeId> group_a, std::set<NodeId> group_b, SimTime from,
                        SimTime until) {
  for (auto id : group_a) {
    if (group_b.contains(id)) throw std::invalid_argument("partition groups must be disjoint");
  }
  partitions_.push_back(Partition{std::move(group_a), std::move(group_b), from, until});
}

void Network::record_trace(const Event& ev) {
  std::array<std::uint8_t, 25> rec{};
  auto put = [&](std::size_t off, std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) rec[off + i] = static_cast<std::uint8_t>(v >> (8 * i));
  };
  put(0, ev.due, 8);
  put(8, ev.seq, 8);
  rec[16] = static_cast<std::uint8_t>(ev.kind.index());
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Deliver>) {
          put(17, k.msg.from, 4);
          put(21, k.msg.to, 4);
        } else if constexpr (std::is_same_v<K, Timer>) {
          put(17, k.node, 4);
          put(21, k.id, 4);
        } else {
          put(17, k.tx.client, 4);
          put(21, k.tx.submit_time, 4);
        }
      },
      ev.kind);
  crypto_hash_sha256_update(&trace_, rec.data(), rec.size());
}

RunReport Network::run_until(SimTime limit, EventSink& sink) {
  stop_ = false;
  while (!queue_.empty() && !stop_) {
    if (queue_.top().due > limit) break;
    // Moving out of top() is safe: the heap order only reads due/seq.
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();

    if (auto* t = std::get_if<Timer>(&ev.kind)) {
      auto it = active_timers_.find(key(t->node, t->id));
      if (it == active_timers_.end() || it->second != ev.seq) continue;  // cancelled or replaced
      active_timers_.erase(it);
    }
    if (++counters_.events_processed > options_.event_cap) throw EventOverflow(options_.event_cap);
    now_ = ev.due;
    record_trace(ev);

    if (auto* d = std::get_if<Deliver>(&ev.kind)) {
      --channel_load_[key(d->msg.from, d->msg.to)];
      --counters_.in_flight;
      ++counters_.delivered;
      sink.on_deliver(d->msg, now_);
    } else if (auto* t = std::get_if<Timer>(&ev.kind)) {
      ++counters_.timers_fired;
      sink.on_timer(t->node, t->id, now_);
    } else {
      ++counters_.txs_injected;
      sink.on_inject(std::get<Inject>(ev.kind).tx, now_);
    }
  }
  if (!stop_ && limit != ~SimTime{0}) now_ = std::max(now_, limit);
  return report();
}

Digest Network::trace_hash() const {
  auto copy = trace_;
  Digest out;
  crypto_hash_sha256_final(&copy, out.data());
  return out;
}

RunReport Network::report() const { return RunReport{counters_, now_, trace_hash()}; }

}  // namespace dcs::net
