#include "dcs/hotstuff2.hpp"

namespace dcs::hotstuff2 {

using namespace consensus;

std::unique_ptr<Engine> Hotstuff2Engine::clone() const {
  return std::make_unique<Hotstuff2Engine>(*this);
}

void Hotstuff2Engine::on_start(SimTime now) {
  wait_done_ = true;
  enter_view(0, false, now);
}

void Hotstuff2Engine::on_view_timeout(SimTime now) {
  wait_done_ = false;
  entry_high_ = high_qc_;
  const View next = view() + 1;
  if (is_leader(next)) set_timer(kWaitTimer, ctx_.params.wait_delta_ms);
  enter_view(next, true, now);
}

void Hotstuff2Engine::on_other_timer(net::TimerId id, SimTime) {
  if (id != kWaitTimer) return;
  wait_done_ = true;
  schedule_proposal();
}

std::optional<Phase> Hotstuff2Engine::next_vote(Phase cert_phase) const {
  if (cert_phase == Phase::kHs2Lock) return Phase::kHs2Commit;
  return std::nullopt;
}

bool Hotstuff2Engine::justify_phase(Phase p) const {
  return p == Phase::kHs2Lock || p == Phase::kHs2Commit;
}

void Hotstuff2Engine::on_certificate(NodeId from, const QuorumCert& qc, SimTime now) {
  switch (qc.phase) {
    case Phase::kHs2Lock:
      update_high_qc(qc);
      if (qc.view > locked_qc_.view || is_anchor(locked_qc_)) locked_qc_ = qc;
      break;
    case Phase::kHs2Commit: {
      if (qc.view >= high_qc_.view) high_qc_ = qc;
      if (qc.view > locked_qc_.view || is_anchor(locked_qc_)) locked_qc_ = qc;
      if (auto block = store_.find(qc.block_hash)) {
        commit(block, now, &qc, from);
      } else {
        request_sync(from, now);
      }
      wait_done_ = false;
      enter_view(view() + 1, false, now);
      break;
    }
    default:
      ++stats_.invalid;
  }
}

bool Hotstuff2Engine::leader_may_propose() const {
  // A certificate from the previous view is the highest that can exist.
  if (view() == 0 || high_qc_.view + 1 == view()) return true;
  if (new_view_count(view()) < quorum_size(config())) return false;
  // Otherwise wait out the deadline if some NewView revealed a lock we lacked.
  return wait_done_ || high_qc_ == entry_high_;
}

void Hotstuff2Engine::on_new_view_msg(NodeId, View v, SimTime) {
  if (v == view() && is_leader(v) && !wait_done_ && !timer_armed(kWaitTimer)) {
    // Entered this view by following others rather than by our own timeout.
    entry_high_ = locked_qc_;
    set_timer(kWaitTimer, ctx_.params.wait_delta_ms);
  }
}

}  // namespace dcs::hotstuff2
