#pragma once

#include <memory>
#include <set>
#include <variant>
#include <vector>

#include "dcs/consensus/block_store.hpp"
#include "dcs/consensus/mempool.hpp"
#include "dcs/consensus/messages.hpp"
#include "dcs/consensus/pacemaker.hpp"
#include "dcs/crypto.hpp"
#include "dcs/netsim.hpp"

namespace dcs::consensus {

inline constexpr net::TimerId kViewTimer = 1;
inline constexpr net::TimerId kProposeTimer = 2;
inline constexpr net::TimerId kNoopTimer = 3;
inline constexpr net::TimerId kWaitTimer = 4;

struct EngineParams {
  SimTime base_timeout_ms = 40;
  SimTime max_timeout_ms = 320;
  SimTime noop_interval_ms = 500;
  SimTime packaging_delay_ms = 1;
  SimTime wait_delta_ms = 20;     // HotStuff-2 leader wait after a view change
  SimTime sync_interval_ms = 40;  // minimum spacing of catch-up requests
  Height watermark = 128;         // ignore heights further ahead than this
  std::uint32_t sync_batch = 64;  // blocks per catch-up response
  SizeModel sizes;
};

struct EngineContext {
  NodeId self = 0;
  SystemConfig config;
  std::uint32_t era = 0;
  KeyPair keys;
  std::shared_ptr<const SignatureVerifier> verifier;
  EngineParams params;
};

struct MsgEvent {
  NodeId from = 0;
  std::shared_ptr<const Bytes> payload;
};
struct TimerEvent {
  net::TimerId id = 0;
};
struct NewTxEvent {
  Transaction tx;
};
/// Parameter change that keeps protocol and membership (batch size, epoch
/// length). Protocol and node-count changes restart the engine instead.
struct ReconfigEvent {
  SystemConfig config;
  Height effective_height = 0;
};
using EngineEvent = std::variant<MsgEvent, TimerEvent, NewTxEvent, ReconfigEvent>;

struct SendAction {
  NodeId to = 0;
  net::Payload payload;
};
/// To every other member of the current configuration.
struct BroadcastAction {
  net::Payload payload;
};
struct CommitAction {
  BlockPtr block;
  SimTime commit_time = 0;
};
struct SetTimerAction {
  net::TimerId id = 0;
  SimTime delay = 0;
};
struct CancelTimerAction {
  net::TimerId id = 0;
};
using Action =
    std::variant<SendAction, BroadcastAction, CommitAction, SetTimerAction, CancelTimerAction>;

struct EngineOutput {
  std::vector<Action> actions;

  template <class T>
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& a : actions) n += std::holds_alternative<T>(a) ? 1 : 0;
    return n;
  }
};

struct EngineStats {
  std::uint64_t malformed = 0;
  std::uint64_t invalid = 0;  // well-formed but failed validation
  std::uint64_t equivocations = 0;
  std::uint64_t view_changes = 0;
  std::uint64_t sync_requests = 0;
  std::uint64_t commits = 0;
};

NodeId leader_of(View view, const SystemConfig& config);

/// A consensus state machine. Everything observable leaves through the
/// returned actions; the engine never touches the network or the clock.
class Engine {
 public:
  Engine(EngineContext ctx, BlockStore store, Mempool mempool);
  virtual ~Engine() = default;

  virtual std::unique_ptr<Engine> clone() const = 0;
  virtual Protocol protocol() const = 0;

  EngineOutput start(SimTime now);
  EngineOutput step(const EngineEvent& event, SimTime now);

  View view() const { return pacemaker_.view(); }
  const BlockStore& store() const { return store_; }
  const Mempool& mempool() const { return mempool_; }
  Mempool& mempool() { return mempool_; }
  const EngineStats& stats() const { return stats_; }
  const EngineContext& context() const { return ctx_; }
  const Pacemaker& pacemaker() const { return pacemaker_; }
  NodeId self() const { return ctx_.self; }

 protected:
  virtual void on_start(SimTime now) = 0;
  virtual void on_message(NodeId from, const Message& msg, SimTime now) = 0;
  virtual void on_view_timeout(SimTime now) = 0;
  virtual void on_other_timer(net::TimerId /*id*/, SimTime /*now*/) {}
  /// Blocks were committed outside the normal flow (catch-up).
  virtual void on_caught_up(SimTime /*now*/) {}
  /// Leader-side readiness to cut a new block right now.
  virtual bool ready_to_propose() const = 0;
  virtual void propose(SimTime now, bool allow_empty) = 0;
  /// Work that should keep the view timer live even without new transactions.
  virtual bool work_pending() const { return !mempool_.empty(); }

  const SystemConfig& config() const { return ctx_.config; }
  /// Time of the event being processed.
  SimTime clock() const { return now_; }
  bool is_leader(View v) const { return leader_of(v, ctx_.config) == ctx_.self; }

  void send(NodeId to, Message msg);
  void broadcast(Message msg);
  void set_timer(net::TimerId id, SimTime delay);
  void cancel_timer(net::TimerId id);
  bool timer_armed(net::TimerId id) const { return armed_.contains(id); }

  Signature sign_vote(const Digest& hash, View view, Phase phase) const;
  bool check_vote(NodeId signer, const Digest& hash, View view, Phase phase,
                  const Signature& sig) const;
  bool check_qc(const QuorumCert& qc) const;
  QuorumCert make_qc(const std::vector<SignerEntry>& votes, const Digest& hash, View view,
                     Phase phase) const;

  /// Commits `tip` and its uncommitted ancestors. Returns false (and asks
  /// `peer` for the missing blocks) when the ancestry is not known yet.
  bool commit(const BlockPtr& tip, SimTime now, const QuorumCert* cert, NodeId peer);

  /// Re-arms the view timer from now: phase progress was observed.
  void note_progress(SimTime now);
  void arm_view_timer();
  /// Arms the propose timer if there is something to propose, the no-op
  /// timer otherwise. No-op when ready_to_propose() is false.
  void schedule_proposal();
  void cancel_proposal_timers();
  void arm_noop_timer();

  /// Transactions already carried by uncommitted blocks on the branch ending
  /// at `tip`; they must not be proposed again on top of it.
  DigestSet branch_tx_ids(const Digest& tip) const;
  std::vector<Transaction> next_batch(const DigestSet& exclude) const;

  void request_sync(NodeId peer, SimTime now);

  EngineContext ctx_;
  BlockStore store_;
  Mempool mempool_;
  Pacemaker pacemaker_;
  EngineStats stats_;

 private:
  void handle_bytes(NodeId from, const Bytes& bytes, SimTime now);
  void handle_timer(net::TimerId id, SimTime now);
  void handle_sync_request(NodeId from, const SyncRequest& req);
  void handle_sync_response(NodeId from, const SyncResponse& resp, SimTime now);

  EngineOutput out_;
  std::set<net::TimerId> armed_;
  SimTime now_ = 0;
  SimTime last_progress_ = 0;
  std::optional<SimTime> last_sync_request_;
};

std::unique_ptr<Engine> make_engine(EngineContext ctx, BlockStore store, Mempool mempool);

}  // namespace dcs::consensus
