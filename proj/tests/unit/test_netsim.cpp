#include <gtest/gtest.h>

#include <random>

#include "dcs/netsim.hpp"

namespace dcs::net {
namespace {

struct Recorder : EventSink {
  struct Entry {
    char kind;
    SimTime at;
    NodeId a;
    std::uint64_t b;
  };
  void on_deliver(const NetMessage& m, SimTime now) override {
    log.push_back({'d', now, m.to, m.from});
  }
  void on_timer(NodeId node, TimerId id, SimTime now) override { log.push_back({'t', now, node, id}); }
  void on_inject(const Transaction& tx, SimTime now) override { log.push_back({'i', now, 0, tx.client}); }
  std::vector<Entry> log;
};

Payload payload(std::uint32_t size, MsgClass cls = MsgClass::kVote) {
  return Payload{std::make_shared<const Bytes>(), size, cls};
}

Network two_nodes(LinkSpec spec, std::uint64_t seed = 1) {
  Network net(2, seed);
  net.set_default_link(spec);
  return net;
}

TEST(Netsim, DeliveryTimeIncludesTransfer) {
  auto net = two_nodes({.base_latency_ms = 5, .jitter_ms = 0, .bandwidth_bytes_per_ms = 100});
  Recorder r;
  EXPECT_TRUE(net.send(0, 1, payload(200), 0));
  auto rep = net.run_until(100, r);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].at, 7u);
  EXPECT_EQ(rep.counters.delivered, 1u);
  EXPECT_EQ(rep.counters.bytes_by_class[static_cast<std::size_t>(MsgClass::kVote)], 200u);
}

TEST(Netsim, TransferRoundsUp) {
  auto net = two_nodes({.base_latency_ms = 5, .bandwidth_bytes_per_ms = 100});
  Recorder r;
  net.send(0, 1, payload(201), 0);
  net.run_until(100, r);
  EXPECT_EQ(r.log.at(0).at, 8u);
}

TEST(Netsim, JitterWithinBounds) {
  auto net = two_nodes({.base_latency_ms = 10, .jitter_ms = 5, .bandwidth_bytes_per_ms = 1000000});
  Recorder r;
  for (int i = 0; i < 200; ++i) net.send(0, 1, payload(1), 0);
  net.run_until(1000, r);
  std::set<SimTime> seen;
  for (const auto& e : r.log) {
    EXPECT_GE(e.at, 11u);
    EXPECT_LE(e.at, 16u);
    seen.insert(e.at);
  }
  EXPECT_EQ(seen.size(), 6u);
}

TEST(Netsim, CertainLossDrops) {
  auto net = two_nodes({.loss_prob = 1.0});
  Recorder r;
  EXPECT_FALSE(net.send(0, 1, payload(10), 0));
  auto rep = net.run_until(1000, r);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(rep.counters.dropped_loss, 1u);
  EXPECT_EQ(rep.counters.sent, 1u);
}

TEST(Netsim, BufferCapacity) {
  auto net = two_nodes({.buffer_capacity = 1});
  Recorder r;
  EXPECT_TRUE(net.send(0, 1, payload(10), 0));
  EXPECT_FALSE(net.send(0, 1, payload(10), 0));
  EXPECT_TRUE(net.send(1, 0, payload(10), 0));  // other direction has its own buffer
  net.run_until(1000, r);
  EXPECT_EQ(net.counters().dropped_buffer, 1u);
  EXPECT_TRUE(net.send(0, 1, payload(10), net.now()));  // drained
}

TEST(Netsim, TimerFiresAtDue) {
  Network net(1, 1);
  Recorder r;
  net.inject_tx(make_transaction(1, {}, 0), 10);
  net.run_until(10, r);
  EXPECT_EQ(net.now(), 10u);
  net.set_timer(0, 7, 40);
  net.run_until(1000, r);
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_EQ(r.log[1].kind, 't');
  EXPECT_EQ(r.log[1].at, 50u);
}

TEST(Netsim, CancelledTimerNeverFires) {
  Network net(1, 1);
  Recorder r;
  net.set_timer(0, 1, 40);
  EXPECT_TRUE(net.timer_pending(0, 1));
  net.cancel_timer(0, 1);
  EXPECT_FALSE(net.timer_pending(0, 1));
  net.run_until(1000, r);
  EXPECT_TRUE(r.log.empty());
}

TEST(Netsim, RescheduleReplacesTimer) {
  Network net(1, 1);
  Recorder r;
  net.set_timer(0, 1, 40);
  net.set_timer(0, 1, 60);
  net.run_until(1000, r);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].at, 60u);
}

TEST(Netsim, SameDueTimersFireInSetOrder) {
  Network net(3, 1);
  Recorder r;
  net.set_timer(2, 5, 30);
  net.set_timer(0, 9, 30);
  net.set_timer(1, 1, 30);
  net.run_until(1000, r);
  ASSERT_EQ(r.log.size(), 3u);
  EXPECT_EQ(r.log[0].a, 2u);
  EXPECT_EQ(r.log[1].a, 0u);
  EXPECT_EQ(r.log[2].a, 1u);
}

TEST(Netsim, ZeroDelayTimerRejected) {
  Network net(1, 1);
  EXPECT_THROW(net.set_timer(0, 1, 0), std::invalid_argument);
}

TEST(Netsim, EmptyRun) {
  Network net(4, 1);
  Recorder r;
  auto rep = net.run_until(500, r);
  EXPECT_EQ(rep.counters.events_processed, 0u);
  EXPECT_EQ(rep.final_time, 500u);
}

TEST(Netsim, InjectWithNoNodes) {
  Network net(0, 1);
  Recorder r;
  net.inject_tx(make_transaction(3, {}, 0), 5);
  auto rep = net.run_until(100, r);
  EXPECT_EQ(rep.counters.events_processed, 1u);
  EXPECT_EQ(rep.counters.txs_injected, 1u);
  EXPECT_EQ(rep.counters.sent, 0u);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].b, 3u);
}

TEST(Netsim, LimitLeavesLaterEventsQueued) {
  Network net(1, 1);
  Recorder r;
  net.set_timer(0, 1, 100);
  net.run_until(50, r);
  EXPECT_TRUE(r.log.empty());
  EXPECT_FALSE(net.idle());
  net.run_until(100, r);
  EXPECT_EQ(r.log.size(), 1u);
}

TEST(Netsim, PartitionWindow) {
  Network net(3, 1);
  net.set_default_link({.base_latency_ms = 1});
  net.partition({0}, {1}, 10, 20);
  Recorder r;
  EXPECT_FALSE(net.send(0, 1, payload(1), 10));
  EXPECT_FALSE(net.send(1, 0, payload(1), 19));
  EXPECT_TRUE(net.send(0, 1, payload(1), 20));
  EXPECT_TRUE(net.send(0, 1, payload(1), 9));
  EXPECT_TRUE(net.send(0, 2, payload(1), 15));
  net.run_until(100, r);
  EXPECT_EQ(net.counters().dropped_partition, 2u);
  EXPECT_EQ(net.counters().delivered, 3u);
}

TEST(Netsim, PartitionGroupsMustBeDisjoint) {
  Network net(3, 1);
  EXPECT_THROW(net.partition({0, 1}, {1, 2}, 0, 10), std::invalid_argument);
}

TEST(Netsim, UnknownLinks) {
  Network net(2, 1);
  EXPECT_THROW(net.link(0, 1), UnknownLink);
  net.set_link(0, 1, {.base_latency_ms = 3});
  EXPECT_EQ(net.link(0, 1).base_latency_ms, 3u);
  EXPECT_THROW(net.link(1, 0), UnknownLink);
  EXPECT_THROW(net.link(0, 5), UnknownLink);
  EXPECT_THROW(net.set_link(0, 1, {.bandwidth_bytes_per_ms = 0}), std::invalid_argument);
  EXPECT_THROW(net.set_default_link({.loss_prob = 1.5}), std::invalid_argument);
}

TEST(Netsim, EventCap) {
  Network net(1, 1, {.event_cap = 2});
  Recorder r;
  for (int i = 1; i <= 3; ++i) net.set_timer(0, static_cast<TimerId>(i), static_cast<SimTime>(i));
  EXPECT_THROW(net.run_until(100, r), EventOverflow);
}

/// A small gossip: every delivery may trigger a forward and a timer.
struct Echo : EventSink {
  explicit Echo(Network& n) : net(n) {}
  void on_deliver(const NetMessage& m, SimTime now) override {
    last = std::max(last, now);
    EXPECT_GE(now, last_dispatch);
    last_dispatch = now;
    if (++hops < 2000) net.send(m.to, (m.to + 1) % net.node_count(), m.payload, now);
    if (hops % 7 == 0) net.set_timer(m.to, 1, 3);
  }
  void on_timer(NodeId node, TimerId, SimTime now) override {
    EXPECT_GE(now, last_dispatch);
    last_dispatch = now;
    net.send(node, (node + 2) % net.node_count(), payload(50, MsgClass::kProposal), now);
  }
  void on_inject(const Transaction&, SimTime now) override {
    for (NodeId i = 1; i < net.node_count(); ++i) net.send(0, i, payload(100), now);
  }
  Network& net;
  SimTime last = 0;
  SimTime last_dispatch = 0;
  int hops = 0;
};

RunReport gossip(std::uint64_t seed) {
  Network net(5, seed);
  net.set_default_link({.base_latency_ms = 3, .jitter_ms = 4, .bandwidth_bytes_per_ms = 10, .loss_prob = 0.05});
  Echo e(net);
  net.inject_tx(make_transaction(1, {}, 0), 0);
  return net.run_until(100000, e);
}

TEST(Netsim, DeterministicReports) {
  auto a = gossip(9);
  auto b = gossip(9);
  EXPECT_GT(a.counters.events_processed, 100u);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.trace_hash, b.trace_hash);
  EXPECT_NE(gossip(10).trace_hash, a.trace_hash);
}

TEST(Netsim, ReportJsonKeys) {
  auto j = gossip(1).to_json();
  for (const char* key : {"events_processed", "messages_sent", "messages_delivered",
                          "messages_dropped", "bytes_by_class", "trace_hash"}) {
    EXPECT_NE(j.find(key), std::string::npos) << key;
  }
}

}  // namespace
}  // namespace dcs::net
