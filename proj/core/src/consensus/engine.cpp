#include "dcs/consensus/engine.hpp"

#include <algorithm>

#include "dcs/hotstuff.hpp"
#include "dcs/hotstuff2.hpp"
#include "dcs/pbft.hpp"

namespace dcs::consensus {

NodeId leader_of(View view, const SystemConfig& config) {
  return static_cast<NodeId>(view % config.n);
}

Engine::Engine(EngineContext ctx, BlockStore store, Mempool mempool)
    : ctx_(std::move(ctx)),
      store_(std::move(store)),
      mempool_(std::move(mempool)),
      pacemaker_(ctx_.params.base_timeout_ms, ctx_.params.max_timeout_ms) {
  if (!ctx_.verifier) throw std::invalid_argument("engine needs a signature verifier");
  for (const auto& b : store_.chain()) {
    for (const auto& tx : b->txs) mempool_.remove(tx.id);
  }
}

EngineOutput Engine::start(SimTime now) {
  out_ = {};
  now_ = now;
  last_progress_ = now;
  arm_view_timer();
  on_start(now);
  return std::move(out_);
}

EngineOutput Engine::step(const EngineEvent& event, SimTime now) {
  out_ = {};
  now_ = now;
  if (const auto* m = std::get_if<MsgEvent>(&event)) {
    if (m->payload) {
      handle_bytes(m->from, *m->payload, now);
    } else {
      ++stats_.malformed;
    }
  } else if (const auto* t = std::get_if<TimerEvent>(&event)) {
    handle_timer(t->id, now);
  } else if (const auto* tx = std::get_if<NewTxEvent>(&event)) {
    if (mempool_.add(tx->tx, now)) schedule_proposal();
  } else if (const auto* r = std::get_if<ReconfigEvent>(&event)) {
    if (r->config.n == ctx_.config.n && r->config.protocol == ctx_.config.protocol) {
      ctx_.config.batch_size = r->config.batch_size;
      ctx_.config.epoch_len = r->config.epoch_len;
    }
  }
  return std::move(out_);
}

void Engine::handle_bytes(NodeId from, const Bytes& bytes, SimTime now) {
  auto env = decode(bytes);
  if (!env || env->protocol != protocol() || env->era != ctx_.era ||
      !ctx_.config.is_member(from) || from == ctx_.self) {
    ++stats_.malformed;
    return;
  }
  if (const auto* req = std::get_if<SyncRequest>(&env->body)) {
    handle_sync_request(from, *req);
  } else if (const auto* resp = std::get_if<SyncResponse>(&env->body)) {
    handle_sync_response(from, *resp, now);
  } else {
    on_message(from, env->body, now);
  }
}

void Engine::handle_timer(net::TimerId id, SimTime now) {
  if (armed_.erase(id) == 0) return;  // stale
  switch (id) {
    case kViewTimer:
      if (!work_pending() &&
          now - last_progress_ < ctx_.params.noop_interval_ms + pacemaker_.timeout()) {
        arm_view_timer();
        return;
      }
      ++stats_.view_changes;
      pacemaker_.on_timeout();
      on_view_timeout(now);
      return;
    case kProposeTimer:
      if (ready_to_propose()) propose(now, false);
      return;
    case kNoopTimer:
      if (ready_to_propose()) propose(now, true);
      return;
    default:
      on_other_timer(id, now);
  }
}

void Engine::send(NodeId to, Message msg) {
  out_.actions.push_back(
      SendAction{to, encode(Envelope{protocol(), ctx_.era, std::move(msg)}, ctx_.params.sizes)});
}

void Engine::broadcast(Message msg) {
  out_.actions.push_back(
      BroadcastAction{encode(Envelope{protocol(), ctx_.era, std::move(msg)}, ctx_.params.sizes)});
}

void Engine::set_timer(net::TimerId id, SimTime delay) {
  armed_.insert(id);
  out_.actions.push_back(SetTimerAction{id, std::max<SimTime>(delay, 1)});
}

void Engine::cancel_timer(net::TimerId id) {
  if (armed_.erase(id) != 0) out_.actions.push_back(CancelTimerAction{id});
}

Signature Engine::sign_vote(const Digest& hash, View view, Phase phase) const {
  return sign(ctx_.keys.secret, vote_message(hash, view, phase));
}

bool Engine::check_vote(NodeId signer, const Digest& hash, View view, Phase phase,
                        const Signature& sig) const {
  return ctx_.config.is_member(signer) &&
         ctx_.verifier->verify(signer, vote_message(hash, view, phase), sig);
}

bool Engine::check_qc(const QuorumCert& qc) const {
  return verify_qc(qc, ctx_.config, *ctx_.verifier);
}

QuorumCert Engine::make_qc(const std::vector<SignerEntry>& votes, const Digest& hash, View view,
                           Phase phase) const {
  return assemble_qc(votes, hash, view, phase, ctx_.config, *ctx_.verifier);
}

bool Engine::commit(const BlockPtr& tip, SimTime now, const QuorumCert* cert, NodeId peer) {
  std::vector<CommitRecord> records;
  try {
    records = store_.commit_through(tip, now);
  } catch (const std::out_of_range&) {
    request_sync(peer, now);
    return false;
  }
  if (cert != nullptr) store_.set_commit_cert(tip->height, *cert);
  for (const auto& rec : records) {
    for (const auto& tx : rec.block->txs) mempool_.remove(tx.id);
    out_.actions.push_back(CommitAction{rec.block, now});
    ++stats_.commits;
  }
  if (!records.empty()) {
    pacemaker_.on_progress();
    note_progress(now);
  }
  return true;
}

void Engine::note_progress(SimTime now) {
  last_progress_ = now;
  arm_view_timer();
}

void Engine::arm_view_timer() { set_timer(kViewTimer, pacemaker_.timeout()); }

void Engine::schedule_proposal() {
  if (!ready_to_propose()) return;
  if (timer_armed(kProposeTimer)) return;
  if (mempool_.empty()) {
    arm_noop_timer();
    return;
  }
  set_timer(kProposeTimer, ctx_.params.packaging_delay_ms);
}

void Engine::arm_noop_timer() {
  if (!timer_armed(kNoopTimer)) set_timer(kNoopTimer, ctx_.params.noop_interval_ms);
}

void Engine::cancel_proposal_timers() {
  cancel_timer(kProposeTimer);
  cancel_timer(kNoopTimer);
}

DigestSet Engine::branch_tx_ids(const Digest& tip) const {
  DigestSet ids;
  auto branch = store_.pending_branch(tip);
  if (!branch) return ids;
  for (const auto& b : *branch) {
    for (const auto& tx : b->txs) ids.insert(tx.id);
  }
  return ids;
}

std::vector<Transaction> Engine::next_batch(const DigestSet& exclude) const {
  return propose_batch(mempool_, ctx_.config.batch_size, &exclude);
}

void Engine::request_sync(NodeId peer, SimTime now) {
  if (peer == ctx_.self || !ctx_.config.is_member(peer)) return;
  if (last_sync_request_ && now - *last_sync_request_ < ctx_.params.sync_interval_ms) return;
  last_sync_request_ = now;
  ++stats_.sync_requests;
  send(peer, SyncRequest{store_.committed_height() + 1});
}

void Engine::handle_sync_request(NodeId from, const SyncRequest& req) {
  auto top = store_.highest_certified();
  if (!top || *top < req.from_height) return;
  Height last = std::min<Height>(*top, req.from_height + ctx_.params.sync_batch - 1);
  // Respond with a certified prefix: walk down to the nearest certified height.
  while (last >= req.from_height && store_.commit_cert(last) == nullptr) --last;
  if (last < req.from_height) return;
  SyncResponse resp;
  for (Height h = req.from_height; h <= last; ++h) {
    auto b = store_.committed_at(h);
    if (!b) return;
    resp.blocks.push_back(b);
  }
  resp.cert = *store_.commit_cert(last);
  send(from, std::move(resp));
}

void Engine::handle_sync_response(NodeId from, const SyncResponse& resp, SimTime now) {
  if (resp.blocks.empty()) return;
  const auto& tip = resp.blocks.back();
  if (tip->height <= store_.committed_height()) return;
  if (resp.cert.block_hash != tip->hash || !is_commit_phase(resp.cert.phase) ||
      !check_qc(resp.cert)) {
    ++stats_.invalid;
    return;
  }
  for (std::size_t i = 1; i < resp.blocks.size(); ++i) {
    if (!extends(*resp.blocks[i], *resp.blocks[i - 1])) {
      ++stats_.invalid;
      return;
    }
  }
  for (const auto& b : resp.blocks) store_.add(b);
  if (commit(tip, now, &resp.cert, from)) on_caught_up(now);
}

std::unique_ptr<Engine> make_engine(EngineContext ctx, BlockStore store, Mempool mempool) {
  switch (ctx.config.protocol) {
    case Protocol::kPbft:
      return std::make_unique<pbft::PbftEngine>(std::move(ctx), std::move(store),
                                                std::move(mempool));
    case Protocol::kHotstuff:
      return std::make_unique<hotstuff::HotstuffEngine>(std::move(ctx), std::move(store),
                                                        std::move(mempool));
    case Protocol::kHotstuff2:
      return std::make_unique<hotstuff2::Hotstuff2Engine>(std::move(ctx), std::move(store),
                                                          std::move(mempool));
  }
  throw std::invalid_argument("unknown protocol");
}

}  // namespace dcs::consensus
