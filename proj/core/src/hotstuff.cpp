#include "dcs/hotstuff.hpp"

namespace dcs::hotstuff {

using namespace consensus;

LinearEngine::LinearEngine(EngineContext ctx, BlockStore store, Mempool mempool)
    : Engine(std::move(ctx), std::move(store), std::move(mempool)) {
  anchor_qc_.block_hash = store_.head()->hash;
  anchor_qc_.view = 0;
  high_qc_ = anchor_qc_;
  locked_qc_ = anchor_qc_;
}

bool LinearEngine::is_anchor(const QuorumCert& qc) const {
  return qc.signers.empty() && qc.view == 0 && qc.block_hash == anchor_qc_.block_hash;
}

void LinearEngine::on_start(SimTime now) { enter_view(0, true, now); }

void LinearEngine::enter_view(View v, bool send_new_view, SimTime now) {
  if (v < view()) return;
  pacemaker_.set_view(v);
  proposal_.reset();
  proposed_ = false;
  certified_.clear();
  votes_.clear();
  cancel_proposal_timers();
  std::erase_if(new_views_, [&](const auto& kv) { return kv.first < v; });
  note_progress(now);
  if (send_new_view) {
    if (is_leader(v)) {
      new_views_[v][self()] = high_qc_;
    } else {
      send(leader_of(v, config()), HsNewView{v, high_qc_});
    }
  }
  if (auto it = new_views_.find(v); it != new_views_.end()) {
    for (const auto& [node, qc] : it->second) update_high_qc(qc);
  }
  schedule_proposal();
}

void LinearEngine::update_high_qc(const QuorumCert& qc) {
  if (is_anchor(qc)) return;
  // Within a view, later phases certify the same block further along.
  if (is_anchor(high_qc_) || qc.view > high_qc_.view ||
      (qc.view == high_qc_.view && qc.phase > high_qc_.phase)) {
    high_qc_ = qc;
  }
}

std::size_t LinearEngine::new_view_count(View v) const {
  auto it = new_views_.find(v);
  return it == new_views_.end() ? 0 : it->second.size();
}

bool LinearEngine::ready_to_propose() const {
  return is_leader(view()) && !proposed_ && leader_may_propose() &&
         store_.knows(high_qc_.block_hash);
}

void LinearEngine::propose(SimTime now, bool allow_empty) {
  auto parent = store_.find(high_qc_.block_hash);
  if (!parent) return;
  auto txs = next_batch(branch_tx_ids(parent->hash));
  if (txs.empty() && !allow_empty) {
    arm_noop_timer();
    return;
  }
  cancel_proposal_timers();
  proposed_ = true;
  auto block = std::make_shared<const Block>(make_block(
      BlockHeader{parent->hash, parent->height + 1, view(), self()}, std::move(txs)));
  store_.add(block);
  proposal_ = block;
  broadcast(HsProposal{view(), block, high_qc_});
  note_progress(now);
  cast_vote(first_phase(), block->hash);
}

void LinearEngine::cast_vote(Phase phase, const Digest& hash) {
  auto sig = sign_vote(hash, view(), phase);
  if (is_leader(view())) {
    on_vote(self(), HsVote{view(), phase, hash, sig}, clock());
  } else {
    send(leader_of(view(), config()), HsVote{view(), phase, hash, sig});
  }
}

void LinearEngine::on_message(NodeId from, const Message& msg, SimTime now) {
  if (const auto* p = std::get_if<HsProposal>(&msg)) {
    on_proposal(from, *p, now);
  } else if (const auto* v = std::get_if<HsVote>(&msg)) {
    on_vote(from, *v, now);
  } else if (const auto* c = std::get_if<HsCert>(&msg)) {
    on_cert(from, *c, now);
  } else if (const auto* nv = std::get_if<HsNewView>(&msg)) {
    on_new_view(from, *nv, now);
  } else {
    ++stats_.malformed;
  }
}

void LinearEngine::on_proposal(NodeId from, const HsProposal& m, SimTime now) {
  if (from != leader_of(m.view, config())) {
    ++stats_.invalid;
    return;
  }
  if (m.view < view()) return;
  const auto& b = *m.block;
  const auto& justify = m.justify;
  if (b.view != m.view || b.proposer != from || b.parent != justify.block_hash ||
      b.txs.size() > kMaxBatchSize ||
      !(is_anchor(justify) ||
        (justify.view < m.view && justify_phase(justify.phase) && check_qc(justify)))) {
    ++stats_.invalid;
    return;
  }
  auto parent = store_.find(b.parent);
  if (!parent) {
    request_sync(from, now);
    return;
  }
  if (b.height != parent->height + 1) {
    ++stats_.invalid;
    return;
  }
  if (!store_.extends_branch(parent->hash, store_.head()->hash)) {
    if (parent->height > store_.committed_height()) {
      request_sync(from, now);
    } else {
      ++stats_.invalid;
    }
    return;
  }
  const bool safe = store_.extends_branch(b.parent, locked_qc_.block_hash) ||
                    justify.view > locked_qc_.view;
  if (!safe) {
    ++stats_.invalid;
    return;
  }
  if (m.view > view()) enter_view(m.view, false, now);
  if (proposal_) {
    if (proposal_->hash != b.hash) ++stats_.equivocations;
    return;
  }
  update_high_qc(justify);
  if (!is_anchor(justify) && is_commit_phase(justify.phase)) {
    commit(parent, now, &justify, from);
  }
  store_.add(m.block);
  proposal_ = m.block;
  note_progress(now);
  cast_vote(first_phase(), b.hash);
}

void LinearEngine::on_vote(NodeId from, const HsVote& m, SimTime now) {
  if (m.view != view() || !is_leader(m.view) || !proposal_ || m.hash != proposal_->hash) return;
  if (certified_.contains(m.phase)) return;
  if (from != self() && !check_vote(from, m.hash, m.view, m.phase, m.sig)) {
    ++stats_.invalid;
    return;
  }
  auto& set = votes_[m.phase];
  if (!set.emplace(from, m.sig).second) return;
  if (set.size() < quorum_size(config())) return;
  std::vector<SignerEntry> entries;
  for (const auto& [node, sig] : set) entries.push_back({node, sig});
  QuorumCert qc;
  try {
    qc = make_qc(entries, m.hash, m.view, m.phase);
  } catch (const InsufficientVotes&) {
    return;
  }
  broadcast(HsCert{m.view, qc});
  on_cert(self(), HsCert{m.view, qc}, now);
}

void LinearEngine::on_cert(NodeId from, const HsCert& m, SimTime now) {
  if (from != leader_of(m.view, config())) {
    ++stats_.invalid;
    return;
  }
  if (m.view < view()) return;
  if (m.qc.view != m.view || (from != self() && !check_qc(m.qc))) {
    ++stats_.invalid;
    return;
  }
  if (m.view > view()) enter_view(m.view, false, now);
  if (!certified_.insert(m.qc.phase).second) return;
  note_progress(now);
  auto vote = next_vote(m.qc.phase);
  const bool cast = vote && proposal_ && proposal_->hash == m.qc.block_hash;
  on_certificate(from, m.qc, now);
  if (cast) cast_vote(*vote, m.qc.block_hash);
}

void LinearEngine::on_new_view(NodeId from, const HsNewView& m, SimTime now) {
  if (m.view < view() || !is_leader(m.view)) return;
  if (!is_anchor(m.qc) &&
      (!justify_phase(m.qc.phase) || m.qc.view >= m.view || !check_qc(m.qc))) {
    ++stats_.invalid;
    return;
  }
  new_views_[m.view][from] = m.qc;
  if (!store_.knows(m.qc.block_hash)) request_sync(from, now);
  if (m.view > view()) {
    if (new_view_count(m.view) + 1 < quorum_size(config())) return;
    enter_view(m.view, true, now);
  } else {
    update_high_qc(m.qc);
  }
  on_new_view_msg(from, m.view, now);
  schedule_proposal();
}

void LinearEngine::on_caught_up(SimTime) {
  if (auto cert = store_.commit_cert(store_.committed_height())) update_high_qc(*cert);
  schedule_proposal();
}

// --- HotStuff ----------------------------------------------------------------

std::unique_ptr<Engine> HotstuffEngine::clone() const {
  return std::make_unique<HotstuffEngine>(*this);
}

void HotstuffEngine::on_view_timeout(SimTime now) { enter_view(view() + 1, true, now); }

std::optional<Phase> HotstuffEngine::next_vote(Phase cert_phase) const {
  switch (cert_phase) {
    case Phase::kHsPrepare:
      return Phase::kHsPreCommit;
    case Phase::kHsPreCommit:
      return Phase::kHsCommit;
    default:
      return std::nullopt;
  }
}

bool HotstuffEngine::justify_phase(Phase p) const {
  return p == Phase::kHsPrepare || p == Phase::kHsPreCommit || p == Phase::kHsCommit;
}

void HotstuffEngine::on_certificate(NodeId from, const QuorumCert& qc, SimTime now) {
  switch (qc.phase) {
    case Phase::kHsPrepare:
      update_high_qc(qc);
      break;
    case Phase::kHsPreCommit:
      update_high_qc(qc);
      if (qc.view > locked_qc_.view || is_anchor(locked_qc_)) locked_qc_ = qc;
      break;
    case Phase::kHsCommit: {
      update_high_qc(qc);
      if (auto block = store_.find(qc.block_hash)) {
        commit(block, now, &qc, from);
      } else {
        request_sync(from, now);
      }
      enter_view(view() + 1, true, now);
      break;
    }
    default:
      ++stats_.invalid;
  }
}

bool HotstuffEngine::leader_may_propose() const {
  return new_view_count(view()) >= quorum_size(config());
}

}  // namespace dcs::hotstuff
