#include "dcs/controller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dcs/codec.hpp"

namespace dcs::control {

std::string to_string(const Knobs& k) {
  return std::string(protocol_name(k.protocol)) + "/n=" + std::to_string(k.n) +
         "/batch=" + std::to_string(k.batch);
}

void Objective::validate() const {
  if (w_d < 0 || w_c < 0 || w_s < 0) throw ConfigError("objective weights must be non-negative");
  if (std::abs(w_d + w_c + w_s - 1.0) > 1e-6) throw ConfigError("objective weights must sum to 1");
  if (!(epsilon > 0)) throw ConfigError("hysteresis epsilon must be positive");
}

double score(const metrics::DcsScores& s, const Objective& obj) {
  if (obj.mode == ObjectiveMode::kConstrained) {
    return (s.d >= obj.d_min && s.c >= obj.c_min) ? s.s : s.s - 1.0;
  }
  return obj.w_d * s.d + obj.w_c * s.c + obj.w_s * s.s;
}

CandidateSpace CandidateSpace::standard(std::uint32_t max_nodes, std::uint32_t max_batch) {
  CandidateSpace c;
  for (std::uint32_t n = 4; n <= max_nodes; n += 3) c.n_values.push_back(n);
  c.protocols = {Protocol::kPbft, Protocol::kHotstuff, Protocol::kHotstuff2};
  for (std::uint32_t b = 1; b <= max_batch; b *= 2) c.batch_values.push_back(b);
  return c;
}

bool CandidateSpace::contains(const Knobs& k) const {
  return std::ranges::find(n_values, k.n) != n_values.end() &&
         std::ranges::find(protocols, k.protocol) != protocols.end() &&
         std::ranges::find(batch_values, k.batch) != batch_values.end();
}

std::vector<Knobs> CandidateSpace::enumerate() const {
  std::vector<Knobs> out;
  for (auto n : n_values) {
    for (auto p : protocols) {
      for (auto b : batch_values) out.push_back({n, p, b});
    }
  }
  return out;
}

namespace {

template <class T>
std::optional<T> step_in(const std::vector<T>& values, const T& current, int dir, bool wrap) {
  auto it = std::ranges::find(values, current);
  if (it == values.end() || values.size() < 2) return std::nullopt;
  auto idx = static_cast<long>(it - values.begin()) + dir;
  auto size = static_cast<long>(values.size());
  if (idx < 0 || idx >= size) {
    if (!wrap) return std::nullopt;
    idx = (idx + size) % size;
  }
  return values[static_cast<std::size_t>(idx)];
}

}  // namespace

std::vector<Knobs> CandidateSpace::neighbours(const Knobs& k) const {
  std::vector<Knobs> out;
  auto add = [&](Knobs c) {
    if (c != k && std::ranges::find(out, c) == out.end()) out.push_back(c);
  };
  for (int dir : {+1, -1}) {
    if (auto b = step_in(batch_values, k.batch, dir, false)) add({k.n, k.protocol, *b});
  }
  for (int dir : {+1, -1}) {
    if (auto p = step_in(protocols, k.protocol, dir, true)) add({k.n, *p, k.batch});
  }
  for (int dir : {+1, -1}) {
    if (auto n = step_in(n_values, k.n, dir, false)) add({*n, k.protocol, k.batch});
  }
  return out;
}

std::string_view decision_name(Decision d) {
  switch (d) {
    case Decision::kInitial:
      return "initial";
    case Decision::kAccept:
      return "accept";
    case Decision::kReject:
      return "reject";
    case Decision::kRevert:
      return "revert";
    case Decision::kExplore:
      return "explore";
    case Decision::kHold:
      return "hold";
  }
  return "?";
}

std::string_view policy_name(PolicyKind p) {
  switch (p) {
    case PolicyKind::kStatic:
      return "static";
    case PolicyKind::kGreedy:
      return "greedy";
    case PolicyKind::kSweep:
      return "sweep";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view name) {
  if (name == "static") return PolicyKind::kStatic;
  if (name == "greedy") return PolicyKind::kGreedy;
  if (name == "sweep") return PolicyKind::kSweep;
  throw ConfigError("unknown policy '" + std::string(name) + "'");
}

Controller::Controller(PolicyKind policy, CandidateSpace space, Objective objective)
    : policy_(policy), space_(std::move(space)), objective_(objective) {
  objective_.validate();
}

Step Controller::finish(Decision d, const Knobs& next, bool hold) {
  Step s;
  s.decision = d;
  s.next = next;
  s.hold = hold;
  s.accepted = accepted_->knobs;
  s.accepted_score = accepted_->score;
  return s;
}

std::optional<Knobs> Controller::untried_neighbour() const {
  for (const auto& c : space_.neighbours(accepted_->knobs)) {
    if (!tried_.contains(c) && !visited_.contains(c)) return c;
  }
  return std::nullopt;
}

Step Controller::observe(const Knobs& knobs, double score) {
  switch (policy_) {
    case PolicyKind::kGreedy:
      return observe_greedy(knobs, score);
    case PolicyKind::kSweep:
      return observe_sweep(knobs, score);
    case PolicyKind::kStatic:
      break;
  }
  if (!accepted_) {
    accepted_ = HistoryEntry{knobs, score};
    accepted_scores_.push_back(score);
    return finish(Decision::kInitial, knobs, true);
  }
  return finish(Decision::kHold, accepted_->knobs, true);
}

Step Controller::observe_greedy(const Knobs& knobs, double score) {
  Decision decision = Decision::kHold;
  if (!accepted_) {
    accepted_ = HistoryEntry{knobs, score};
    accepted_scores_.push_back(score);
    visited_.insert(knobs);
    decision = Decision::kInitial;
  } else if (trial_ && knobs == *trial_) {
    trial_.reset();
    if (score > accepted_->score + objective_.epsilon) {
      accepted_ = HistoryEntry{knobs, score};
      accepted_scores_.push_back(score);
      visited_.insert(knobs);
      tried_.clear();
      decision = Decision::kAccept;
    } else {
      tried_.insert(knobs);
      return finish(Decision::kReject, accepted_->knobs, false);
    }
  } else if (knobs != accepted_->knobs) {
    // Observation of knobs we did not ask for: treat as a fresh start there.
    trial_.reset();
    accepted_ = HistoryEntry{knobs, score};
    accepted_scores_.push_back(score);
    visited_.insert(knobs);
    tried_.clear();
    decision = Decision::kInitial;
  } else {
    decision = Decision::kRevert;
  }
  if (auto move = untried_neighbour()) {
    trial_ = *move;
    return finish(decision == Decision::kRevert ? Decision::kExplore : decision, *move, false);
  }
  return finish(decision == Decision::kRevert ? Decision::kHold : decision, accepted_->knobs,
                true);
}

Step Controller::reject_trial() {
  if (!accepted_) throw std::logic_error("reject_trial before the first observation");
  if (policy_ == PolicyKind::kSweep) {
    auto grid = space_.enumerate();
    if (sweep_index_ < grid.size()) ++sweep_index_;
    if (sweep_index_ < grid.size()) return finish(Decision::kExplore, grid[sweep_index_], false);
    return finish(Decision::kHold, accepted_->knobs, true);
  }
  if (trial_) {
    tried_.insert(*trial_);
    trial_.reset();
  }
  if (policy_ == PolicyKind::kGreedy) {
    if (auto move = untried_neighbour()) {
      trial_ = *move;
      return finish(Decision::kExplore, *move, false);
    }
  }
  return finish(Decision::kHold, accepted_->knobs, true);
}

Step Controller::observe_sweep(const Knobs& knobs, double score) {
  auto grid = space_.enumerate();
  if (!accepted_ || score > accepted_->score) {
    accepted_ = HistoryEntry{knobs, score};
    accepted_scores_.push_back(score);
  }
  // Advance past the point just measured.
  if (sweep_index_ < grid.size() && grid[sweep_index_] == knobs) ++sweep_index_;
  while (sweep_index_ < grid.size() && grid[sweep_index_] == knobs) ++sweep_index_;
  if (sweep_index_ < grid.size()) {
    return finish(Decision::kExplore, grid[sweep_index_], false);
  }
  return finish(Decision::kHold, accepted_->knobs, true);
}

std::optional<Knobs> next_move(const std::vector<HistoryEntry>& history,
                               const CandidateSpace& space, const Objective& objective) {
  if (history.empty()) throw std::invalid_argument("next_move needs at least one epoch");
  Controller c(PolicyKind::kGreedy, space, objective);
  Step s;
  for (const auto& h : history) s = c.observe(h.knobs, h.score);
  if (s.hold) return std::nullopt;
  return s.next;
}

// --- reconfiguration transactions ----------------------------------------------

namespace {

constexpr std::uint32_t kReconfigMagic = 0x52534344;  // "DCSR" little-endian

}  // namespace

Transaction make_reconfig_tx(const ReconfigTx& r, SimTime submit_time) {
  ByteWriter w(32);
  w.u32(kReconfigMagic);
  w.u32(r.knobs.n);
  w.u8(static_cast<std::uint8_t>(r.knobs.protocol));
  w.u32(r.knobs.batch);
  w.u64(r.sequence);
  return make_transaction(kReconfigClient, std::move(w).take(), submit_time);
}

std::optional<ReconfigTx> parse_reconfig_tx(const Transaction& tx) {
  if (tx.client != kReconfigClient) return std::nullopt;
  try {
    ByteReader r(tx.payload);
    if (r.u32() != kReconfigMagic) return std::nullopt;
    ReconfigTx out;
    out.knobs.n = r.u32();
    auto p = r.u8();
    if (p < 1 || p > 3) return std::nullopt;
    out.knobs.protocol = static_cast<Protocol>(p);
    out.knobs.batch = r.u32();
    out.sequence = r.u64();
    if (!r.done()) return std::nullopt;
    return out;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

}  // namespace dcs::control
