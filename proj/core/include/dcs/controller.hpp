#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dcs/metrics.hpp"
#include "dcs/types.hpp"

namespace dcs::control {

struct Knobs {
  std::uint32_t n = 4;
  Protocol protocol = Protocol::kPbft;
  std::uint32_t batch = 1;

  auto operator<=>(const Knobs&) const = default;
};

std::string to_string(const Knobs& k);

enum class ObjectiveMode : std::uint8_t { kWeighted, kConstrained };

struct Objective {
  double w_d = 1.0 / 3.0;
  double w_c = 1.0 / 3.0;
  double w_s = 1.0 / 3.0;
  double epsilon = 0.01;
  ObjectiveMode mode = ObjectiveMode::kWeighted;
  double d_min = 0.0;  // constrained mode only
  double c_min = 0.0;

  /// Throws ConfigError unless the weights are non-negative, sum to 1, and epsilon > 0.
  void validate() const;
};

/// Weighted mode: w_d*d + w_c*c + w_s*s. Constrained mode: s when d >= d_min
/// and c >= c_min, s - 1 otherwise (any feasible point beats any infeasible one).
double score(const metrics::DcsScores& s, const Objective& obj);

/// Discrete candidate values per knob, each sorted ascending. Adjacent means
/// neighbouring in these lists.
struct CandidateSpace {
  std::vector<std::uint32_t> n_values;
  std::vector<Protocol> protocols;
  std::vector<std::uint32_t> batch_values;

  /// n in {4, 7, ..., max_nodes}, all protocols, batch in {1, 2, 4, ..., max_batch}.
  static CandidateSpace standard(std::uint32_t max_nodes, std::uint32_t max_batch = 1024);

  bool contains(const Knobs& k) const;
  std::size_t size() const { return n_values.size() * protocols.size() * batch_values.size(); }
  /// Grid points in a fixed order: n, then protocol, then batch.
  std::vector<Knobs> enumerate() const;
  /// Single-knob neighbours in proposal order: batch up, batch down,
  /// protocol next, protocol previous, n up, n down.
  std::vector<Knobs> neighbours(const Knobs& k) const;
};

enum class Decision : std::uint8_t { kInitial, kAccept, kReject, kRevert, kExplore, kHold };
std::string_view decision_name(Decision d);

struct HistoryEntry {
  Knobs knobs;
  double score = 0;
};

struct Step {
  Decision decision = Decision::kHold;
  Knobs next;          // knobs for the next epoch
  bool hold = false;   // no untried neighbour remains
  Knobs accepted;      // accepted point after this observation
  double accepted_score = 0;
};

enum class PolicyKind : std::uint8_t { kStatic, kGreedy, kSweep };
std::string_view policy_name(PolicyKind p);
PolicyKind parse_policy(std::string_view name);

/// Online knob selection. Fed one (knobs, score) observation per epoch.
///
/// Greedy: hill-climb over single-knob neighbours of the accepted point. A
/// trial is accepted only if it beats the accepted score by more than
/// epsilon; otherwise the next epoch reverts to the accepted knobs and the
/// move is marked tried. Tried marks clear when a move is accepted.
/// Sweep: visits every grid point once, then holds the argmax.
/// Static: never moves.
class Controller {
 public:
  Controller(PolicyKind policy, CandidateSpace space, Objective objective);

  Step observe(const Knobs& knobs, double score);
  /// The proposed move could not be applied (e.g. not enough standby nodes).
  /// It is marked tried without running an epoch; returns the replacement step.
  Step reject_trial();

  PolicyKind policy() const { return policy_; }
  const CandidateSpace& space() const { return space_; }
  const Objective& objective() const { return objective_; }
  std::optional<HistoryEntry> accepted() const { return accepted_; }
  /// Scores at which points were accepted, in order.
  const std::vector<double>& accepted_scores() const { return accepted_scores_; }

 private:
  Step observe_greedy(const Knobs& knobs, double score);
  Step observe_sweep(const Knobs& knobs, double score);
  Step finish(Decision d, const Knobs& next, bool hold);
  std::optional<Knobs> untried_neighbour() const;

  PolicyKind policy_;
  CandidateSpace space_;
  Objective objective_;
  std::optional<HistoryEntry> accepted_;
  std::vector<double> accepted_scores_;
  std::optional<Knobs> trial_;
  std::set<Knobs> tried_;
  std::set<Knobs> visited_;  // every point ever accepted
  std::size_t sweep_index_ = 0;
};

/// Pure replay of a history through a fresh greedy controller: the knobs to
/// run next, or nullopt for HOLD. Throws std::invalid_argument on an empty history.
std::optional<Knobs> next_move(const std::vector<HistoryEntry>& history,
                               const CandidateSpace& space, const Objective& objective);

// --- reconfiguration transactions ----------------------------------------------

struct ReconfigTx {
  Knobs knobs;
  std::uint64_t sequence = 0;  // makes repeated requests distinct
};

Transaction make_reconfig_tx(const ReconfigTx& r, SimTime submit_time);
/// nullopt unless `tx` is a well-formed reconfiguration transaction.
std::optional<ReconfigTx> parse_reconfig_tx(const Transaction& tx);

}  // namespace dcs::control
