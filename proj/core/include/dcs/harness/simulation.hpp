#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcs/consensus/engine.hpp"
#include "dcs/controller.hpp"
#include "dcs/harness/scenario.hpp"
#include "dcs/metrics.hpp"
#include "dcs/netsim.hpp"

namespace dcs::harness {

/// Two honest nodes committed different blocks at the same height.
class SafetyViolation : public std::runtime_error {
 public:
  SafetyViolation(Height height, NodeId first, NodeId second, const Digest& a, const Digest& b);
  SafetyViolation(Height height, const std::string& what);
  Height height() const { return height_; }

 private:
  Height height_;
};

/// A reconfiguration asked for more nodes than were provisioned.
class NoStandbyNodes : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// First committed hash per height across all honest nodes.
class SafetyOracle {
 public:
  /// Throws SafetyViolation if `hash` disagrees with what another node committed.
  void observe(NodeId node, Height height, const Digest& hash);
  const Digest* at(Height height) const;
  std::uint64_t observations() const { return observations_; }

 private:
  struct First {
    Digest hash;
    NodeId node;
  };
  std::map<Height, First> first_;
  std::uint64_t observations_ = 0;
};

struct RejectedMove {
  control::Knobs knobs;
  std::string reason;
};

struct EpochRecord {
  metrics::MetricsWindow window;
  control::Knobs knobs;
  metrics::DcsScores scores;
  double score = 0;
  Height first_height = 0;  // first block of the window
  Height last_height = 0;
  bool partial = false;     // trailing window cut short by the run limit
  control::Decision decision = control::Decision::kHold;
  std::optional<control::Knobs> next;  // set when the controller asked for a change
  control::Knobs accepted;
  double accepted_score = 0;
  std::vector<RejectedMove> rejected;
};

struct SwitchRecord {
  Height height = 0;  // last block committed under the old knobs
  SimTime time = 0;
  std::uint32_t era = 0;  // era the old knobs ran in
  control::Knobs from;
  control::Knobs to;
};

struct RunResult {
  std::vector<EpochRecord> epochs;
  std::vector<SwitchRecord> switches;
  net::RunReport report;
  std::vector<BlockPtr> chain;             // canonical chain, genesis first
  std::vector<SimTime> chain_times;        // first honest commit time per height
  control::Knobs final_knobs;
  std::uint64_t load_injected = 0;
  std::uint64_t load_committed = 0;
  SimTime max_latency_ms = 0;              // over committed load transactions
  std::uint64_t oracle_observations = 0;
  std::uint64_t equivocations_sent = 0;    // conflicting proposals split by a faulty leader
  consensus::EngineStats engine_stats;     // summed over every engine instance
};

struct SimOptions {
  net::NetworkOptions network;
};

/// Engine parameters implied by the scenario: explicit values where given,
/// otherwise timeouts derived from the slowest link and the block size.
consensus::EngineParams engine_params(const Scenario& s, std::uint32_t batch);

/// One simulated world: network, engines, load generator, fault injector,
/// safety oracle, epoch measurement and the controller loop.
class Simulation : public net::EventSink {
 public:
  explicit Simulation(Scenario scenario, SimOptions options = {});
  ~Simulation() override;

  /// Runs to completion. Throws SafetyViolation.
  RunResult run();

  void on_deliver(const net::NetMessage& msg, SimTime now) override;
  void on_timer(NodeId node, net::TimerId id, SimTime now) override;
  void on_inject(const Transaction& tx, SimTime now) override;

 private:
  struct Node;

  bool alive(NodeId id, SimTime now) const;
  bool honest(NodeId id) const;
  void deliver_to(NodeId id, const std::shared_ptr<const Bytes>& bytes, NodeId from, SimTime now);
  void step(NodeId id, const consensus::EngineEvent& ev, SimTime now);
  void apply(NodeId id, consensus::EngineOutput out, SimTime now);
  void broadcast(NodeId id, const net::Payload& payload, SimTime now);
  bool equivocate(NodeId id, const net::Payload& payload, SimTime now);
  void on_commit(NodeId id, const BlockPtr& block, SimTime now);
  void on_canonical(const BlockPtr& block, SimTime now);
  void finish_dispatch(SimTime now);

  void schedule_load(SimTime now);
  Transaction load_tx(std::uint64_t index, SimTime at) const;
  void refill(SimTime now);

  void maybe_finalize(SimTime now, bool at_end = false);
  void close_epoch(Height close_height, bool partial, SimTime now);
  void decide(EpochRecord& rec, SimTime now);
  std::optional<std::string> infeasible(const control::Knobs& k) const;

  void apply_switch(Height height, const control::ReconfigTx& r, SimTime now);
  void rebuild(NodeId id, SimTime now);
  void retire(NodeId id);
  void cancel_engine_timers(NodeId id);
  void add_stats(const consensus::EngineStats& s);

  Scenario scenario_;
  SimOptions options_;
  net::Network network_;
  std::shared_ptr<const PublicKeyRegistry> registry_;
  std::vector<KeyPair> keys_;
  std::shared_ptr<const SignatureVerifier> verifier_;
  std::vector<std::unique_ptr<Node>> nodes_;
  control::Controller controller_;
  SafetyOracle oracle_;

  control::Knobs knobs_;
  SystemConfig config_;
  std::uint32_t era_ = 0;
  std::set<View> equivocation_views_;
  std::set<NodeId> byzantine_;
  std::uint64_t equivocations_sent_ = 0;

  // canonical chain
  std::vector<BlockPtr> chain_;
  std::vector<SimTime> chain_times_;
  std::vector<metrics::CommitObservation> observations_;

  // load
  std::uint64_t next_load_ = 0;
  std::uint64_t load_injected_ = 0;
  std::uint64_t load_committed_ = 0;
  std::uint64_t load_scheduled_ = 0;  // saturated: injected or queued for injection
  SimTime max_latency_ = 0;

  // reconfiguration
  std::uint64_t reconfig_seq_ = 0;
  std::optional<control::Knobs> awaiting_;  // reconfig tx issued, not yet applied
  std::vector<std::pair<Height, control::ReconfigTx>> pending_switches_;
  std::vector<SwitchRecord> switches_;

  // epochs
  std::optional<Height> anchor_;  // unset while waiting for the first block of a new era
  Height warmup_height_ = 0;
  std::optional<Height> closing_;  // close height awaiting finalization
  SimTime window_start_ = 0;
  std::uint64_t epoch_index_ = 0;
  net::Counters traffic_mark_;
  std::vector<EpochRecord> epochs_;
  bool done_ = false;
  bool forced_ = false;

  consensus::EngineStats stats_;
};

RunResult run_scenario(const Scenario& s, SimOptions options = {});

/// Runs the closed control loop with the scenario's policy for the requested
/// number of epochs (0 = scenario.epochs).
RunResult run_adaptive(Scenario s, std::uint32_t epochs = 0, SimOptions options = {});

/// Candidate space for the controller: the scenario grid, else the standard space.
control::CandidateSpace candidate_space(const Scenario& s);

}  // namespace dcs::harness
