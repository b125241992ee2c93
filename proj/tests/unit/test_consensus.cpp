#include <gtest/gtest.h>

#include "dcs/consensus/engine.hpp"
#include "test_support.hpp"

namespace dcs::consensus {
namespace {

using testing::KeyWorld;

Transaction tx(std::uint64_t i, SimTime submit = 0) {
  return make_transaction(i, Bytes{static_cast<std::uint8_t>(i)}, submit);
}

BlockPtr child(const BlockPtr& parent, std::vector<Transaction> txs = {}, View view = 0) {
  return std::make_shared<Block>(
      make_block({parent->hash, parent->height + 1, view, 0}, std::move(txs)));
}

// --- mempool ---------------------------------------------------------------

TEST(Mempool, FifoBatches) {
  Mempool m;
  for (std::uint64_t i = 0; i < 10; ++i) EXPECT_TRUE(m.add(tx(i), i));
  auto batch = propose_batch(m, 4);
  ASSERT_EQ(batch.size(), 4u);
  for (std::uint64_t i = 0; i < 4; ++i) EXPECT_EQ(batch[i].client, i);
}

TEST(Mempool, PartialAndEmpty) {
  Mempool m;
  EXPECT_TRUE(propose_batch(m, 4).empty());
  m.add(tx(1), 0);
  m.add(tx(2), 1);
  EXPECT_EQ(propose_batch(m, 4).size(), 2u);
}

TEST(Mempool, SameArrivalOrderedById) {
  Mempool m;
  auto a = tx(1), b = tx(2);
  m.add(a, 5);
  m.add(b, 5);
  auto first = std::min(a.id, b.id);
  EXPECT_EQ(propose_batch(m, 1).at(0).id, first);
}

TEST(Mempool, DuplicatesAndRemoval) {
  Mempool m;
  auto t = tx(1);
  EXPECT_TRUE(m.add(t, 0));
  EXPECT_FALSE(m.add(t, 1));
  m.remove(t.id);
  EXPECT_TRUE(m.empty());
  EXPECT_TRUE(m.seen(t.id));
  EXPECT_FALSE(m.add(t, 2));  // committed ids stay out
  auto u = tx(2);
  m.remove(u.id);  // committed before arrival
  EXPECT_FALSE(m.add(u, 3));
}

TEST(Mempool, ExcludeSet) {
  Mempool m;
  for (std::uint64_t i = 0; i < 5; ++i) m.add(tx(i), i);
  DigestSet ex{tx(0).id, tx(2).id};
  auto b = propose_batch(m, 10, &ex);
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].client, 1u);
  EXPECT_EQ(m.count_eligible(&ex), 3u);
  EXPECT_EQ(m.count_eligible(nullptr), 5u);
}

// --- block store -----------------------------------------------------------

TEST(BlockStore, CommitsAppend) {
  BlockStore s;
  auto b1 = child(genesis_block());
  auto b2 = child(b1);
  s.on_commit(b1, 10);
  s.on_commit(b2, 20);
  EXPECT_EQ(s.chain().size(), 3u);
  EXPECT_EQ(s.committed_height(), 2u);
  EXPECT_EQ(s.committed_at(1), b1);
  EXPECT_TRUE(s.is_committed(b2->hash));
  EXPECT_EQ(s.committed_at(3), nullptr);
}

TEST(BlockStore, ConflictingCommitThrows) {
  BlockStore s;
  auto b1 = child(genesis_block());
  s.on_commit(b1, 0);
  auto fork = child(genesis_block(), {}, 1);
  EXPECT_THROW(s.on_commit(fork, 1), ConflictingCommit);
  EXPECT_THROW(s.commit_through(fork, 1), ConflictingCommit);
  s.add(fork);
  EXPECT_THROW(s.commit_through(child(fork), 1), ConflictingCommit);
}

TEST(BlockStore, LatencyFromSubmit) {
  BlockStore s;
  auto rec = s.on_commit(child(genesis_block(), {tx(1, 100)}), 350);
  ASSERT_EQ(rec.tx_latencies.size(), 1u);
  EXPECT_EQ(rec.tx_latencies[0], 250u);
}

TEST(BlockStore, CommitThroughAncestors) {
  BlockStore s;
  auto b1 = child(genesis_block());
  auto b2 = child(b1);
  auto b3 = child(b2);
  s.add(b1);
  s.add(b2);
  auto recs = s.commit_through(b3, 5);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[0].block, b1);
  EXPECT_EQ(recs[2].block, b3);
  EXPECT_TRUE(s.commit_through(b2, 6).empty());
  auto b5 = child(child(b3));
  EXPECT_THROW(s.commit_through(b5, 7), std::out_of_range);
}

TEST(BlockStore, Branches) {
  BlockStore s;
  auto b1 = child(genesis_block());
  auto b2 = child(b1);
  auto other = child(genesis_block(), {}, 3);
  s.add(b1);
  s.add(b2);
  s.add(other);
  auto br = s.pending_branch(b2->hash);
  ASSERT_TRUE(br.has_value());
  EXPECT_EQ(br->size(), 2u);
  EXPECT_TRUE(s.extends_branch(b2->hash, b1->hash));
  EXPECT_TRUE(s.extends_branch(b2->hash, b2->hash));
  EXPECT_FALSE(s.extends_branch(b2->hash, other->hash));
  s.on_commit(b1, 0);
  EXPECT_FALSE(s.pending_branch(other->hash).has_value());
}

TEST(BlockStore, SnapshotMustBeLinked) {
  auto b1 = child(genesis_block());
  EXPECT_NO_THROW(BlockStore({genesis_block(), b1}));
  EXPECT_THROW(BlockStore({genesis_block(), child(b1)}), std::invalid_argument);
  EXPECT_THROW(BlockStore(std::vector<BlockPtr>{}), std::invalid_argument);
}

TEST(BlockStore, CommitCerts) {
  BlockStore s;
  EXPECT_FALSE(s.highest_certified().has_value());
  s.set_commit_cert(2, QuorumCert{});
  s.set_commit_cert(5, QuorumCert{});
  EXPECT_EQ(s.highest_certified(), 5u);
  EXPECT_NE(s.commit_cert(2), nullptr);
  EXPECT_EQ(s.commit_cert(3), nullptr);
}

// --- pacemaker -------------------------------------------------------------

TEST(Pacemaker, ExponentialBackoffWithCap) {
  Pacemaker p(40, 300);
  EXPECT_EQ(p.timeout(), 40u);
  p.on_timeout();
  EXPECT_EQ(p.timeout(), 80u);
  p.on_timeout();
  EXPECT_EQ(p.timeout(), 160u);
  p.on_timeout();
  EXPECT_EQ(p.timeout(), 300u);
  for (int i = 0; i < 100; ++i) p.on_timeout();
  EXPECT_EQ(p.timeout(), 300u);
  p.on_progress();
  EXPECT_EQ(p.timeout(), 40u);
  EXPECT_THROW(Pacemaker(0, 10), std::invalid_argument);
}

// --- leader rotation and engine contract -------------------------------------

TEST(LeaderOf, Modulo) {
  auto c4 = make_config(4, Protocol::kPbft, 1);
  auto c7 = make_config(7, Protocol::kHotstuff, 1);
  EXPECT_EQ(leader_of(0, c4), 0u);
  EXPECT_EQ(leader_of(5, c4), 1u);
  EXPECT_EQ(leader_of(7, c7), 0u);
}

class EngineContract : public ::testing::TestWithParam<Protocol> {
 protected:
  std::unique_ptr<Engine> engine(NodeId id) {
    return make_engine(world.context(id, make_config(4, GetParam(), 4)), BlockStore{}, Mempool{});
  }
  KeyWorld world{4};
};

std::vector<Bytes> payloads(const EngineOutput& out) {
  std::vector<Bytes> r;
  for (const auto& a : out.actions) {
    if (const auto* s = std::get_if<SendAction>(&a)) r.push_back(*s->payload.bytes);
    if (const auto* b = std::get_if<BroadcastAction>(&a)) r.push_back(*b->payload.bytes);
  }
  return r;
}

TEST_P(EngineContract, NewTxAtFollowerOnlyFillsMempool) {
  auto e = engine(1);
  e->start(0);
  auto out = e->step(NewTxEvent{tx(1)}, 5);
  EXPECT_EQ(out.count<SendAction>() + out.count<BroadcastAction>(), 0u);
  EXPECT_EQ(e->mempool().size(), 1u);
}

TEST_P(EngineContract, StepIsPure) {
  auto e = engine(0);
  e->start(0);
  e->step(NewTxEvent{tx(1)}, 1);
  auto copy = e->clone();
  // Fire every timer the leader could have armed; the proposal path signs and broadcasts.
  for (net::TimerId id : {kProposeTimer, kNoopTimer, kWaitTimer, kViewTimer}) {
    auto a = e->step(TimerEvent{id}, 50);
    auto b = copy->step(TimerEvent{id}, 50);
    EXPECT_EQ(a.actions.size(), b.actions.size());
    EXPECT_EQ(payloads(a), payloads(b));
  }
}

TEST_P(EngineContract, GarbageCountsMalformed) {
  auto e = engine(1);
  e->start(0);
  auto before = e->view();
  auto out = e->step(MsgEvent{0, std::make_shared<const Bytes>(Bytes{1, 2, 3})}, 1);
  EXPECT_TRUE(out.actions.empty());
  EXPECT_EQ(e->stats().malformed, 1u);
  EXPECT_EQ(e->view(), before);
  e->step(MsgEvent{0, nullptr}, 1);
  EXPECT_EQ(e->stats().malformed, 2u);
}

TEST_P(EngineContract, WrongEraOrSenderIsMalformed) {
  auto e = engine(1);
  e->start(0);
  auto other = GetParam() == Protocol::kPbft ? Protocol::kHotstuff : Protocol::kPbft;
  e->step(MsgEvent{0, testing::wire(GetParam(), SyncRequest{1}, 1)}, 1);
  e->step(MsgEvent{0, testing::wire(other, SyncRequest{1})}, 1);
  e->step(MsgEvent{5, testing::wire(GetParam(), SyncRequest{1})}, 1);
  e->step(MsgEvent{1, testing::wire(GetParam(), SyncRequest{1})}, 1);
  EXPECT_EQ(e->stats().malformed, 4u);
}

TEST_P(EngineContract, StaleTimersIgnored) {
  auto e = engine(2);
  e->start(0);
  auto out = e->step(TimerEvent{kProposeTimer}, 1);
  EXPECT_TRUE(out.actions.empty());
}

TEST_P(EngineContract, BatchReconfigInPlace) {
  auto e = engine(0);
  auto cfg = make_config(4, GetParam(), 8);
  e->step(ReconfigEvent{cfg, 3}, 0);
  EXPECT_EQ(e->context().config.batch_size, 8u);
  auto bigger = make_config(7, GetParam(), 2);
  e->step(ReconfigEvent{bigger, 3}, 0);
  EXPECT_EQ(e->context().config.batch_size, 8u);
}

INSTANTIATE_TEST_SUITE_P(All, EngineContract,
                         ::testing::Values(Protocol::kPbft, Protocol::kHotstuff, Protocol::kHotstuff2),
                         [](const auto& info) { return std::string(protocol_name(info.param)); });

}  // namespace
}  // namespace dcs::consensus
