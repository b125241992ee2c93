#include "dcs/pbft.hpp"

#include <algorithm>

namespace dcs::pbft {

using namespace consensus;

Reproposal select_reproposal(const std::vector<PbftViewChange>& proofs) {
  Height committed = 0;
  for (const auto& vc : proofs) committed = std::max(committed, vc.committed);
  Reproposal r{committed + 1, nullptr};
  const PreparedCert* best = nullptr;
  for (const auto& vc : proofs) {
    for (const auto& p : vc.prepared) {
      if (p.block->height != r.height) continue;
      if (best == nullptr || p.qc.view > best->qc.view ||
          (p.qc.view == best->qc.view && p.block->hash < best->block->hash)) {
        best = &p;
      }
    }
  }
  if (best != nullptr) r.block = best->block;
  return r;
}

PbftEngine::PbftEngine(EngineContext ctx, BlockStore store, Mempool mempool)
    : Engine(std::move(ctx), std::move(store), std::move(mempool)) {}

std::unique_ptr<Engine> PbftEngine::clone() const { return std::make_unique<PbftEngine>(*this); }

void PbftEngine::on_start(SimTime) { schedule_proposal(); }

bool PbftEngine::ready_to_propose() const {
  if (view_changing_ || !is_leader(view())) return false;
  return !accepted_.contains({store_.committed_height() + 1, view()});
}

bool PbftEngine::work_pending() const {
  return view_changing_ || !mempool_.empty() ||
         accepted_.contains({store_.committed_height() + 1, view()});
}

void PbftEngine::propose(SimTime now, bool allow_empty) {
  auto txs = next_batch({});
  if (txs.empty() && !allow_empty) {
    arm_noop_timer();
    return;
  }
  cancel_proposal_timers();
  const auto& head = store_.head();
  auto block = std::make_shared<const Block>(make_block(
      BlockHeader{head->hash, head->height + 1, view(), self()}, std::move(txs)));
  auto sig = sign_vote(block->hash, view(), Phase::kPbftPrepare);
  store_.add(block);
  accepted_[{block->height, view()}] = Accepted{block, sig, true};
  broadcast(PbftPrePrepare{view(), block->height, block, sig});
  note_progress(now);
}

void PbftEngine::on_message(NodeId from, const Message& msg, SimTime now) {
  if (const auto* pp = std::get_if<PbftPrePrepare>(&msg)) {
    on_pre_prepare(from, *pp, now);
  } else if (const auto* v = std::get_if<PbftVote>(&msg)) {
    on_vote(from, *v, now);
  } else if (const auto* vc = std::get_if<PbftViewChange>(&msg)) {
    on_view_change(from, *vc, now);
  } else if (const auto* nv = std::get_if<PbftNewView>(&msg)) {
    on_new_view(from, *nv, now);
  } else {
    ++stats_.malformed;
  }
}

void PbftEngine::on_pre_prepare(NodeId from, const PbftPrePrepare& m, SimTime now) {
  const Height committed = store_.committed_height();
  if (from != leader_of(m.view, config())) {
    ++stats_.invalid;
    return;
  }
  if (m.view != view() || view_changing_) return;
  if (m.height <= committed || m.height > committed + ctx_.params.watermark) return;
  const auto& b = *m.block;
  if (b.height != m.height || b.view != m.view || b.proposer != from ||
      b.txs.size() > kMaxBatchSize ||
      !check_vote(from, b.hash, m.view, Phase::kPbftPrepare, m.sig)) {
    ++stats_.invalid;
    return;
  }
  auto key = std::make_pair(m.height, m.view);
  if (auto it = accepted_.find(key); it != accepted_.end()) {
    if (it->second.block->hash != b.hash) ++stats_.equivocations;
    return;
  }
  store_.add(m.block);
  accepted_[key] = Accepted{m.block, m.sig, false};
  note_progress(now);
  if (m.height > committed + 2) request_sync(from, now);
  try_prepare(m.height, m.view);
}

void PbftEngine::try_prepare(Height h, View v) {
  auto it = accepted_.find({h, v});
  if (it == accepted_.end() || it->second.sent_prepare) return;
  if (h != store_.committed_height() + 1 || v != view() || view_changing_) return;
  auto& acc = it->second;
  if (acc.block->parent != store_.head()->hash) {
    ++stats_.invalid;
    return;
  }
  acc.sent_prepare = true;
  SlotKey key{h, v, acc.block->hash};
  if (!is_leader(v)) {
    auto sig = sign_vote(acc.block->hash, v, Phase::kPbftPrepare);
    slots_[key].prepares[self()] = sig;
    broadcast(PbftVote{v, h, acc.block->hash, Phase::kPbftPrepare, sig});
  }
  check_prepared(key);
}

void PbftEngine::on_vote(NodeId from, const PbftVote& m, SimTime now) {
  const Height committed = store_.committed_height();
  if (m.height <= committed || m.height > committed + ctx_.params.watermark) return;
  if (m.phase != Phase::kPbftPrepare && m.phase != Phase::kPbftCommit) {
    ++stats_.invalid;
    return;
  }
  if (m.phase == Phase::kPbftPrepare && from == leader_of(m.view, config())) return;
  if (!check_vote(from, m.hash, m.view, m.phase, m.sig)) {
    ++stats_.invalid;
    return;
  }
  SlotKey key{m.height, m.view, m.hash};
  auto& slot = slots_[key];
  if (m.phase == Phase::kPbftPrepare) {
    if (!slot.prepares.emplace(from, m.sig).second) return;
    if (m.view == view()) note_progress(now);
    check_prepared(key);
  } else {
    if (!slot.commits.emplace(from, m.sig).second) return;
    if (m.view == view()) note_progress(now);
    check_committed(key, from, now);
  }
}

void PbftEngine::check_prepared(const SlotKey& key) {
  auto acc = accepted_.find({key.height, key.view});
  if (acc == accepted_.end() || acc->second.block->hash != key.hash) return;
  auto& slot = slots_[key];
  if (!slot.prepare_qc) {
    if (slot.prepares.size() + 1 < quorum_size(config())) return;
    std::vector<SignerEntry> votes;
    votes.push_back({leader_of(key.view, config()), acc->second.leader_sig});
    for (const auto& [node, sig] : slot.prepares) votes.push_back({node, sig});
    try {
      slot.prepare_qc = make_qc(votes, key.hash, key.view, Phase::kPbftPrepare);
    } catch (const InsufficientVotes&) {
      return;
    }
  }
  maybe_send_commit(key);
  check_committed(key, leader_of(key.view, config()), clock());
}

void PbftEngine::maybe_send_commit(const SlotKey& key) {
  auto& slot = slots_[key];
  if (!slot.prepare_qc || slot.sent_commit) return;
  if (key.view != view() || view_changing_) return;
  slot.sent_commit = true;
  auto sig = sign_vote(key.hash, key.view, Phase::kPbftCommit);
  slot.commits[self()] = sig;
  broadcast(PbftVote{key.view, key.height, key.hash, Phase::kPbftCommit, sig});
}


void PbftEngine::check_committed(const SlotKey& key, NodeId peer, SimTime now) {
  auto& slot = slots_[key];
  if (slot.commits.size() < quorum_size(config())) return;
  const Height committed = store_.committed_height();
  if (key.height <= committed) return;
  auto block = store_.find(key.hash);
  if (!block || key.height > committed + 1) {
    request_sync(peer, now);
    return;
  }
  if (!slot.prepare_qc) return;  // held until prepared
  std::vector<SignerEntry> votes;
  for (const auto& [node, sig] : slot.commits) votes.push_back({node, sig});
  QuorumCert qc;
  try {
    qc = make_qc(votes, key.hash, key.view, Phase::kPbftCommit);
  } catch (const InsufficientVotes&) {
    return;
  }
  if (commit(block, now, &qc, peer)) after_commit(now);
}

void PbftEngine::after_commit(SimTime now) {
  const Height committed = store_.committed_height();
  std::erase_if(slots_, [&](const auto& kv) { return kv.first.height <= committed; });
  std::erase_if(accepted_, [&](const auto& kv) { return kv.first.first <= committed; });
  if (pending_new_view_) {
    auto target = *pending_new_view_;
    pending_new_view_.reset();
    maybe_new_view(target, now);
  }
  try_prepare(committed + 1, view());
  // Votes for the next height may have arrived before this commit.
  std::vector<SlotKey> next;
  for (auto it = slots_.lower_bound(SlotKey{committed + 1, 0, {}});
       it != slots_.end() && it->first.height == committed + 1; ++it) {
    next.push_back(it->first);
  }
  for (const auto& key : next) {
    check_prepared(key);
    check_committed(key, leader_of(key.view, config()), now);
  }
  schedule_proposal();
}

void PbftEngine::on_caught_up(SimTime now) { after_commit(now); }

// --- view change --------------------------------------------------------------

PbftViewChange PbftEngine::make_view_change(View target) const {
  PbftViewChange vc;
  vc.target = target;
  vc.committed = store_.committed_height();
  vc.sender = self();
  const Slot* best = nullptr;
  const SlotKey* best_key = nullptr;
  for (auto it = slots_.lower_bound(SlotKey{vc.committed + 1, 0, {}});
       it != slots_.end() && it->first.height == vc.committed + 1; ++it) {
    if (!it->second.prepare_qc) continue;
    if (best == nullptr || it->first.view > best_key->view) {
      best = &it->second;
      best_key = &it->first;
    }
  }
  if (best != nullptr) {
    if (auto block = store_.find(best_key->hash)) {
      vc.prepared.push_back(PreparedCert{block, *best->prepare_qc});
    }
  }
  vc.sig = sign(ctx_.keys.secret, view_change_message(vc));
  return vc;
}

bool PbftEngine::valid_view_change(const PbftViewChange& vc) const {
  if (!config().is_member(vc.sender)) return false;
  if (!ctx_.verifier->verify(vc.sender, view_change_message(vc), vc.sig)) return false;
  for (const auto& p : vc.prepared) {
    if (p.qc.phase != Phase::kPbftPrepare || p.qc.block_hash != p.block->hash ||
        p.qc.view >= vc.target || !check_qc(p.qc)) {
      return false;
    }
  }
  return true;
}

void PbftEngine::on_view_timeout(SimTime now) {
  View target = (view_changing_ ? std::max(vc_target_, view()) : view()) + 1;
  start_view_change(target, now);
}

void PbftEngine::start_view_change(View target, SimTime now) {
  view_changing_ = true;
  vc_target_ = target;
  cancel_proposal_timers();
  auto vc = make_view_change(target);
  view_changes_[target][self()] = vc;
  highest_target_[self()] = std::max(highest_target_[self()], target);
  broadcast(vc);
  arm_view_timer();
  maybe_new_view(target, now);
}

void PbftEngine::on_view_change(NodeId from, const PbftViewChange& vc, SimTime now) {
  if (vc.sender != from || !valid_view_change(vc)) {
    ++stats_.invalid;
    return;
  }
  if (vc.target <= view()) return;
  view_changes_[vc.target][from] = vc;
  auto& top = highest_target_[from];
  top = std::max(top, vc.target);

  // Join once f+1 members have moved past our own target.
  const View current = view_changing_ ? vc_target_ : view();
  std::vector<View> ahead;
  for (const auto& [node, t] : highest_target_) {
    if (node != self() && t > current) ahead.push_back(t);
  }
  if (ahead.size() >= config().f + 1) {
    std::sort(ahead.rbegin(), ahead.rend());
    start_view_change(ahead[config().f], now);
  }
  maybe_new_view(vc.target, now);
}

void PbftEngine::maybe_new_view(View target, SimTime now) {
  if (!is_leader(target) || target <= view()) return;
  if (new_view_sent_ && *new_view_sent_ >= target) return;
  auto it = view_changes_.find(target);
  if (it == view_changes_.end()) return;
  const auto quorum = quorum_size(config());
  if (it->second.size() + (it->second.contains(self()) ? 0 : 1) < quorum) return;

  // Our own proof is refreshed so that it reflects what we have committed.
  it->second[self()] = make_view_change(target);
  std::vector<PbftViewChange> proofs;
  proofs.push_back(it->second.at(self()));
  for (const auto& [node, vc] : it->second) {
    if (node != self() && proofs.size() < quorum) proofs.push_back(vc);
  }
  std::sort(proofs.begin(), proofs.end(),
            [](const auto& a, const auto& b) { return a.sender < b.sender; });

  auto plan = select_reproposal(proofs);
  if (plan.height > store_.committed_height() + 1) {
    NodeId best = self();
    Height best_h = 0;
    for (const auto& vc : proofs) {
      if (vc.committed > best_h) {
        best_h = vc.committed;
        best = vc.sender;
      }
    }
    pending_new_view_ = target;
    request_sync(best, now);
    return;
  }

  new_view_sent_ = target;
  PbftNewView nv;
  nv.view = target;
  nv.proofs = std::move(proofs);
  nv.block = plan.block;
  nv.sig = sign_vote(plan.block ? plan.block->hash : kZeroDigest, target, Phase::kPbftPrepare);
  auto block = nv.block;
  auto sig = nv.sig;
  broadcast(std::move(nv));
  install_view(target, now);
  if (block) {
    store_.add(block);
    accepted_[{plan.height, target}] = Accepted{block, sig, false};
    try_prepare(plan.height, target);
  }
  schedule_proposal();
}

void PbftEngine::on_new_view(NodeId from, const PbftNewView& nv, SimTime now) {
  if (from != leader_of(nv.view, config())) {
    ++stats_.invalid;
    return;
  }
  if (nv.view <= view()) return;
  std::set<NodeId> senders;
  for (const auto& vc : nv.proofs) {
    if (vc.target != nv.view || !senders.insert(vc.sender).second || !valid_view_change(vc)) {
      ++stats_.invalid;
      return;
    }
  }
  if (senders.size() < quorum_size(config())) {
    ++stats_.invalid;
    return;
  }
  auto plan = select_reproposal(nv.proofs);
  if (plan.block) {
    if (!nv.block || nv.block->hash != plan.block->hash) {
      ++stats_.invalid;
      return;
    }
  } else if (nv.block && (nv.block->height != plan.height || nv.block->view != nv.view ||
                          nv.block->proposer != from)) {
    ++stats_.invalid;
    return;
  }
  if (!check_vote(from, nv.block ? nv.block->hash : kZeroDigest, nv.view, Phase::kPbftPrepare,
                  nv.sig)) {
    ++stats_.invalid;
    return;
  }
  install_view(nv.view, now);
  if (nv.block) {
    store_.add(nv.block);
    accepted_[{plan.height, nv.view}] = Accepted{nv.block, nv.sig, false};
    if (plan.height > store_.committed_height() + 1) request_sync(from, now);
    try_prepare(plan.height, nv.view);
  }
}

void PbftEngine::install_view(View v, SimTime now) {
  pacemaker_.set_view(v);
  view_changing_ = false;
  vc_target_ = v;
  cancel_proposal_timers();
  std::erase_if(view_changes_, [&](const auto& kv) { return kv.first <= v; });
  note_progress(now);
}

}  // namespace dcs::pbft
