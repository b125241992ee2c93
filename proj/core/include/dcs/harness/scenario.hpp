#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcs/controller.hpp"
#include "dcs/crypto.hpp"
#include "dcs/netsim.hpp"

namespace dcs::harness {

/// Invalid scenario text or contents. what() names the line or field.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LoadMode : std::uint8_t { kNone, kOpen, kSaturated };

struct LoadSpec {
  LoadMode mode = LoadMode::kOpen;
  double rate_tps = 100;         // open loop
  std::uint32_t depth = 2;       // saturated: outstanding = depth * batch
  std::uint32_t tx_bytes = 32;   // actual payload bytes (the byte model charges 256)
  SimTime start_ms = 0;
  std::optional<SimTime> duration_ms;  // open loop stops injecting after this
  std::optional<std::uint64_t> max_txs;
};

struct CrashFault {
  NodeId node = 0;
  SimTime at_ms = 0;
};

/// The leader of `view` (in the initial configuration) sends conflicting
/// proposals to two halves of the other members whenever it proposes in that view.
struct EquivocationFault {
  View view = 0;
};

struct PartitionFault {
  std::vector<NodeId> a;
  std::vector<NodeId> b;
  SimTime from_ms = 0;
  SimTime until_ms = 0;
};

struct FaultPlan {
  std::vector<CrashFault> crashes;
  std::vector<EquivocationFault> equivocations;
  std::vector<PartitionFault> partitions;
};

struct LinkOverride {
  NodeId from = 0;
  NodeId to = 0;
  net::LinkSpec spec;
};

struct ConsensusSpec {
  std::optional<SimTime> base_timeout_ms;  // derived from the topology when unset
  std::optional<SimTime> max_timeout_ms;   // 8x base when unset
  std::optional<SimTime> wait_delta_ms;    // 2x base latency when unset
  SimTime noop_interval_ms = 500;
  SimTime packaging_delay_ms = 1;
  AuthMode auth = AuthMode::kMultisig;
};

struct ControllerSpec {
  control::PolicyKind policy = control::PolicyKind::kStatic;
  control::Objective objective;
  std::optional<control::CandidateSpace> grid;
};

struct Scenario {
  std::uint64_t seed = 1;
  control::Knobs knobs;
  std::uint32_t max_nodes = 13;  // members plus standby pool
  std::uint32_t epoch_len = 20;  // blocks per measurement epoch
  std::uint32_t epochs = 10;     // stop after this many epochs
  SimTime run_limit_ms = 60'000;
  net::LinkSpec link;
  std::vector<LinkOverride> links;
  LoadSpec load;
  FaultPlan faults;
  ConsensusSpec consensus;
  double log_base = 10.0;
  ControllerSpec controller;
  bool force_conflicting_commit = false;  // test hook
};

/// Parses the JSON scenario format. Unknown keys are errors. Comments are allowed.
Scenario parse_scenario(std::string_view text);
/// Every field spelled out, fixed key order; parse_scenario(to_json(s)) == s.
std::string scenario_to_json(const Scenario& s);
/// Throws ScenarioError on inconsistent contents (node references, fault bound, ranges).
void validate(const Scenario& s);

/// Nodes that deviate from the protocol or stop: crashed nodes and equivocating leaders.
std::vector<NodeId> faulty_nodes(const Scenario& s);

/// "n=4,7;protocol=pbft,hotstuff;batch=1,16". Missing dimensions take the
/// scenario's initial value.
control::CandidateSpace parse_grid(std::string_view spec, const control::Knobs& base);

}  // namespace dcs::harness
