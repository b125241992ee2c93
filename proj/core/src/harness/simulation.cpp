#include "dcs/harness/simulation.hpp"

#include <algorithm>

namespace dcs::harness {

using consensus::Engine;
using consensus::EngineOutput;
using consensus::Envelope;

namespace {

constexpr net::TimerId kTransferTimer = 1000;
constexpr std::uint64_t kSyntheticClient = std::uint64_t{1} << 62;

bool is_load_tx(const Transaction& tx) { return tx.client >= 1 && tx.client < kSyntheticClient; }

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

std::string short_hex(const Digest& d) { return to_hex(d).substr(0, 16); }

}  // namespace

SafetyViolation::SafetyViolation(Height height, NodeId first, NodeId second, const Digest& a,
                                 const Digest& b)
    : std::runtime_error("conflicting commits at height " + std::to_string(height) + ": node " +
                         std::to_string(first) + " committed " + short_hex(a) + ", node " +
                         std::to_string(second) + " committed " + short_hex(b)),
      height_(height) {}

SafetyViolation::SafetyViolation(Height height, const std::string& what)
    : std::runtime_error(what), height_(height) {}

void SafetyOracle::observe(NodeId node, Height height, const Digest& hash) {
  ++observations_;
  auto [it, inserted] = first_.try_emplace(height, First{hash, node});
  if (!inserted && it->second.hash != hash) {
    throw SafetyViolation(height, it->second.node, node, it->second.hash, hash);
  }
}

const Digest* SafetyOracle::at(Height height) const {
  auto it = first_.find(height);
  return it == first_.end() ? nullptr : &it->second.hash;
}

// ---------------------------------------------------------------------------

consensus::EngineParams engine_params(const Scenario& s, std::uint32_t batch) {
  std::uint64_t latency = s.link.base_latency_ms;
  std::uint64_t jitter = s.link.jitter_ms;
  std::uint64_t bw = s.link.bandwidth_bytes_per_ms;
  for (const auto& o : s.links) {
    latency = std::max(latency, o.spec.base_latency_ms);
    jitter = std::max(jitter, o.spec.jitter_ms);
    bw = std::min(bw, o.spec.bandwidth_bytes_per_ms);
  }
  consensus::EngineParams p;
  p.sizes.auth.mode = s.consensus.auth;
  const auto& bytes = p.sizes.bytes;
  std::uint64_t block = bytes.header + bytes.hash + std::uint64_t{batch} * bytes.tx +
                        p.sizes.auth.qc_wire_size(s.max_nodes);
  SimTime derived = 4 * (latency + jitter) + 2 * ceil_div(block, bw);
  p.base_timeout_ms = std::max<SimTime>(s.consensus.base_timeout_ms.value_or(derived), 1);
  p.max_timeout_ms =
      std::max(s.consensus.max_timeout_ms.value_or(8 * p.base_timeout_ms), p.base_timeout_ms);
  p.wait_delta_ms = s.consensus.wait_delta_ms.value_or(std::max<SimTime>(2 * latency, 1));
  p.noop_interval_ms = s.consensus.noop_interval_ms;
  p.packaging_delay_ms = s.consensus.packaging_delay_ms;
  p.sync_interval_ms = p.base_timeout_ms;
  return p;
}

control::CandidateSpace candidate_space(const Scenario& s) {
  if (s.controller.grid) return *s.controller.grid;
  return control::CandidateSpace::standard(s.max_nodes, static_cast<std::uint32_t>(kMaxBatchSize));
}

struct Simulation::Node {
  std::unique_ptr<Engine> engine;
  bool member = false;
  std::uint32_t era = 0;
  bool pending = false;        // waiting for a state transfer
  Height have_height = 0;      // committed prefix held while pending
  Height target_height = 0;    // prefix delivered by the transfer
  std::optional<consensus::Mempool> held;
  std::vector<std::pair<NodeId, std::shared_ptr<const Bytes>>> stash;
  std::optional<SimTime> crash_at;
};

Simulation::Simulation(Scenario scenario, SimOptions options)
    : scenario_(std::move(scenario)),
      options_(options),
      network_(scenario_.max_nodes, derive_seed(scenario_.seed, "network"), options_.network),
      controller_(scenario_.controller.policy, candidate_space(scenario_),
                  scenario_.controller.objective),
      knobs_(scenario_.knobs) {
  validate(scenario_);
  config_ = make_config(knobs_.n, knobs_.protocol, knobs_.batch, scenario_.epoch_len);

  auto provisioned = PublicKeyRegistry::provision(
      master_seed_from(derive_seed(scenario_.seed, "keys")), knobs_.n, scenario_.max_nodes);
  registry_ = provisioned.registry;
  keys_ = std::move(provisioned.keys);
  verifier_ = std::make_shared<SignatureVerifier>(registry_);

  network_.set_default_link(scenario_.link);
  for (const auto& o : scenario_.links) network_.set_link(o.from, o.to, o.spec);
  for (const auto& p : scenario_.faults.partitions) {
    network_.partition({p.a.begin(), p.a.end()}, {p.b.begin(), p.b.end()}, p.from_ms, p.until_ms);
  }

  for (std::uint32_t i = 0; i < scenario_.max_nodes; ++i) nodes_.push_back(std::make_unique<Node>());
  for (const auto& c : scenario_.faults.crashes) {
    auto& at = nodes_[c.node]->crash_at;
    at = at ? std::min(*at, c.at_ms) : c.at_ms;
  }
  for (const auto& e : scenario_.faults.equivocations) {
    equivocation_views_.insert(e.view);
    byzantine_.insert(consensus::leader_of(e.view, config_));
  }

  chain_.push_back(genesis_block());
  chain_times_.push_back(0);
  anchor_ = 0;
}

Simulation::~Simulation() = default;

bool Simulation::alive(NodeId id, SimTime now) const {
  const auto& c = nodes_[id]->crash_at;
  return !c || now < *c;
}

bool Simulation::honest(NodeId id) const { return !byzantine_.contains(id); }

RunResult Simulation::run() {
  auto params = engine_params(scenario_, knobs_.batch);
  for (NodeId id = 0; id < config_.n; ++id) {
    auto& node = *nodes_[id];
    node.member = true;
    consensus::EngineContext ctx{id, config_, era_, keys_[id], verifier_, params};
    node.engine = consensus::make_engine(std::move(ctx), consensus::BlockStore{},
                                         consensus::Mempool{});
  }
  for (NodeId id = 0; id < config_.n; ++id) {
    if (!alive(id, 0)) continue;
    apply(id, nodes_[id]->engine->start(0), 0);
  }
  schedule_load(0);
  traffic_mark_ = network_.counters();

  network_.run_until(scenario_.run_limit_ms, *this);

  maybe_finalize(network_.now(), true);
  Height top = chain_.size() - 1;
  if (!done_ && anchor_ && top > *anchor_ && epochs_.size() < scenario_.epochs) {
    close_epoch(top, true, network_.now());
  }

  RunResult r;
  for (const auto& node : nodes_) {
    if (node->engine) add_stats(node->engine->stats());
  }
  r.epochs = epochs_;
  r.switches = switches_;
  r.report = network_.report();
  r.chain = chain_;
  r.chain_times = chain_times_;
  r.final_knobs = knobs_;
  r.load_injected = load_injected_;
  r.load_committed = load_committed_;
  r.max_latency_ms = max_latency_;
  r.oracle_observations = oracle_.observations();
  r.equivocations_sent = equivocations_sent_;
  r.engine_stats = stats_;
  return r;
}

// --- dispatch ------------------------------------------------------------------

void Simulation::on_deliver(const net::NetMessage& msg, SimTime now) {
  maybe_finalize(now);
  deliver_to(msg.to, msg.payload.bytes, msg.from, now);
  finish_dispatch(now);
}

void Simulation::on_timer(NodeId id, net::TimerId timer, SimTime now) {
  maybe_finalize(now);
  auto& node = *nodes_[id];
  if (!alive(id, now) || !node.member) return;
  if (timer == kTransferTimer) {
    if (node.pending) rebuild(id, now);
  } else if (node.engine && !node.pending) {
    step(id, consensus::TimerEvent{timer}, now);
  }
  finish_dispatch(now);
}

void Simulation::on_inject(const Transaction& tx, SimTime now) {
  maybe_finalize(now);
  if (is_load_tx(tx)) {
    ++load_injected_;
    if (scenario_.load.mode == LoadMode::kOpen) schedule_load(now);
  }
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    auto& node = *nodes_[id];
    if (!node.member || !alive(id, now)) continue;
    if (node.pending) {
      if (node.held) node.held->add(tx, now);
    } else if (node.engine) {
      step(id, consensus::NewTxEvent{tx}, now);
    }
  }
  finish_dispatch(now);
}

void Simulation::deliver_to(NodeId id, const std::shared_ptr<const Bytes>& bytes, NodeId from,
                            SimTime now) {
  auto& node = *nodes_[id];
  if (!node.member || !alive(id, now)) return;
  if (bytes) {
    if (auto tag = consensus::peek(*bytes); tag && tag->era < node.era) return;
  }
  if (node.pending) {
    node.stash.emplace_back(from, bytes);
    return;
  }
  if (node.engine) step(id, consensus::MsgEvent{from, bytes}, now);
}

void Simulation::step(NodeId id, const consensus::EngineEvent& ev, SimTime now) {
  auto& node = *nodes_[id];
  EngineOutput out;
  try {
    out = node.engine->step(ev, now);
  } catch (const consensus::ConflictingCommit& e) {
    if (honest(id)) {
      throw SafetyViolation(node.engine->store().committed_height() + 1,
                            "node " + std::to_string(id) + ": " + e.what());
    }
    // A byzantine node's own state is irrelevant; silence it.
    add_stats(node.engine->stats());
    node.engine.reset();
    return;
  }
  apply(id, std::move(out), now);
}

void Simulation::apply(NodeId id, EngineOutput out, SimTime now) {
  for (auto& action : out.actions) {
    if (auto* s = std::get_if<consensus::SendAction>(&action)) {
      if (s->to < nodes_.size()) network_.send(id, s->to, std::move(s->payload), now);
    } else if (auto* b = std::get_if<consensus::BroadcastAction>(&action)) {
      broadcast(id, b->payload, now);
    } else if (auto* c = std::get_if<consensus::CommitAction>(&action)) {
      on_commit(id, c->block, c->commit_time);
    } else if (auto* t = std::get_if<consensus::SetTimerAction>(&action)) {
      network_.set_timer(id, t->id, t->delay);
    } else if (auto* x = std::get_if<consensus::CancelTimerAction>(&action)) {
      network_.cancel_timer(id, x->id);
    }
  }
}

void Simulation::broadcast(NodeId id, const net::Payload& payload, SimTime now) {
  if (era_ == 0 && byzantine_.contains(id) && equivocate(id, payload, now)) return;
  for (NodeId to = 0; to < config_.n; ++to) {
    if (to != id) network_.send(id, to, payload, now);
  }
}

bool Simulation::equivocate(NodeId id, const net::Payload& payload, SimTime now) {
  auto env = consensus::decode(*payload.bytes);
  if (!env) return false;
  BlockPtr original;
  View view = 0;
  if (const auto* pp = std::get_if<consensus::PbftPrePrepare>(&env->body)) {
    original = pp->block;
    view = pp->view;
  } else if (const auto* hp = std::get_if<consensus::HsProposal>(&env->body)) {
    original = hp->block;
    view = hp->view;
  } else {
    return false;
  }
  if (!original || !equivocation_views_.contains(view) ||
      consensus::leader_of(view, config_) != id) {
    return false;
  }

  auto txs = original->txs;
  auto extra = make_transaction(kSyntheticClient + view, {}, now);
  if (txs.size() >= kMaxBatchSize) {
    txs.back() = extra;
  } else {
    txs.push_back(extra);
  }
  auto variant = std::make_shared<const Block>(make_block(
      {original->parent, original->height, original->view, original->proposer}, std::move(txs)));

  Envelope alt{env->protocol, env->era, env->body};
  if (auto* pp = std::get_if<consensus::PbftPrePrepare>(&alt.body)) {
    pp->block = variant;
    pp->sig = sign(keys_[id].secret, vote_message(variant->hash, view, Phase::kPbftPrepare));
  } else {
    std::get<consensus::HsProposal>(alt.body).block = variant;
  }
  auto alt_payload = consensus::encode(alt, nodes_[id]->engine->context().params.sizes);

  // Original to the lower half of the other members, the variant to the rest.
  std::uint32_t split = (config_.n - 1) / 2;
  std::uint32_t k = 0;
  for (NodeId to = 0; to < config_.n; ++to) {
    if (to == id) continue;
    network_.send(id, to, k++ < split ? payload : alt_payload, now);
  }
  ++equivocations_sent_;
  return true;
}

void Simulation::on_commit(NodeId id, const BlockPtr& block, SimTime now) {
  if (!honest(id)) return;
  oracle_.observe(id, block->height, block->hash);
  if (scenario_.force_conflicting_commit && !forced_) {
    forced_ = true;
    Digest fake = block->hash;
    fake[0] ^= 0xff;
    NodeId other = (id + 1) % config_.n;
    oracle_.observe(other, block->height, fake);
  }
  if (block->height == chain_.size()) on_canonical(block, now);
}

void Simulation::on_canonical(const BlockPtr& block, SimTime now) {
  Height h = block->height;
  chain_.push_back(block);
  chain_times_.push_back(now);

  metrics::CommitObservation obs{h, now, {}};
  std::uint64_t load = 0;
  for (const auto& tx : block->txs) {
    if (is_load_tx(tx)) {
      SimTime lat = now >= tx.submit_time ? now - tx.submit_time : 0;
      obs.latencies_ms.push_back(lat);
      max_latency_ = std::max(max_latency_, lat);
      ++load;
    } else if (auto r = control::parse_reconfig_tx(tx)) {
      pending_switches_.emplace_back(h, *r);
    }
  }
  observations_.push_back(std::move(obs));
  load_committed_ += load;
  if (load > 0 && scenario_.load.mode == LoadMode::kSaturated) refill(now);

  if (!anchor_ && !awaiting_ && h == warmup_height_) {
    anchor_ = h;
    window_start_ = now + 1;
    traffic_mark_ = network_.counters();
  } else if (anchor_ && !closing_ && h == *anchor_ + scenario_.epoch_len) {
    closing_ = h;
  }
}

void Simulation::finish_dispatch(SimTime now) {
  while (!pending_switches_.empty()) {
    auto [height, r] = pending_switches_.front();
    pending_switches_.erase(pending_switches_.begin());
    apply_switch(height, r, now);
  }
}

// --- load ----------------------------------------------------------------------

Transaction Simulation::load_tx(std::uint64_t index, SimTime at) const {
  Bytes payload(scenario_.load.tx_bytes, 0);
  for (std::size_t i = 0; i < payload.size() && i < 8; ++i) {
    payload[i] = static_cast<std::uint8_t>(index >> (8 * i));
  }
  return make_transaction(1 + index, std::move(payload), at);
}

void Simulation::schedule_load(SimTime now) {
  const auto& load = scenario_.load;
  auto allowed = [&](std::uint64_t i, SimTime at) {
    if (load.max_txs && i >= *load.max_txs) return false;
    if (load.duration_ms && at >= load.start_ms + *load.duration_ms) return false;
    return at <= scenario_.run_limit_ms;
  };
  if (load.mode == LoadMode::kOpen) {
    auto at = load.start_ms +
              static_cast<SimTime>(static_cast<double>(next_load_) * 1000.0 / load.rate_tps);
    if (!allowed(next_load_, at)) return;
    network_.inject_tx(load_tx(next_load_, at), std::max(at, now));
    ++next_load_;
  } else if (load.mode == LoadMode::kSaturated && now == 0) {
    std::uint64_t target = std::uint64_t{load.depth} * knobs_.batch;
    while (load_scheduled_ < target && allowed(next_load_, load.start_ms)) {
      network_.inject_tx(load_tx(next_load_, load.start_ms), load.start_ms);
      ++next_load_;
      ++load_scheduled_;
    }
  }
}

void Simulation::refill(SimTime now) {
  const auto& load = scenario_.load;
  std::uint64_t target = std::uint64_t{load.depth} * knobs_.batch;
  while (load_scheduled_ - load_committed_ < target) {
    if (load.max_txs && next_load_ >= *load.max_txs) return;
    if (load.duration_ms && now >= load.start_ms + *load.duration_ms) return;
    network_.inject_tx(load_tx(next_load_, now), now);
    ++next_load_;
    ++load_scheduled_;
  }
}

// --- epochs and control ----------------------------------------------------------

void Simulation::maybe_finalize(SimTime now, bool at_end) {
  if (!closing_) return;
  if (!at_end && now <= chain_times_[*closing_]) return;
  Height h = *closing_;
  closing_.reset();
  close_epoch(h, false, now);
}

void Simulation::close_epoch(Height close_height, bool partial, SimTime now) {
  SimTime end = std::max(chain_times_[close_height] + 1, window_start_ + 1);
  const auto& counters = network_.counters();
  metrics::TrafficCount traffic{counters.sent - traffic_mark_.sent,
                                counters.total_bytes() - traffic_mark_.total_bytes()};

  auto first = std::lower_bound(
      observations_.begin(), observations_.end(), window_start_,
      [](const metrics::CommitObservation& o, SimTime t) { return o.commit_time < t; });
  std::span<const metrics::CommitObservation> span(first, observations_.end());

  EpochRecord rec;
  rec.window = metrics::measure_epoch(epoch_index_, config_.n, span, traffic, window_start_, end);
  rec.knobs = knobs_;
  rec.partial = partial;
  for (const auto& o : span) {
    if (o.commit_time >= end) break;
    if (rec.first_height == 0) rec.first_height = o.height;
    rec.last_height = o.height;
  }
  rec.scores = metrics::scores(rec.window, scenario_.log_base);
  rec.score = control::score(rec.scores, controller_.objective());
  rec.accepted = knobs_;

  window_start_ = end;
  traffic_mark_ = counters;
  ++epoch_index_;
  anchor_ = close_height;

  if (!partial) decide(rec, now);
  epochs_.push_back(std::move(rec));
  if (!partial && epochs_.size() >= scenario_.epochs) {
    done_ = true;
    network_.request_stop();
  }
}

std::optional<std::string> Simulation::infeasible(const control::Knobs& k) const {
  if (k.n > scenario_.max_nodes) {
    return "NoStandbyNodes: n=" + std::to_string(k.n) + " exceeds the provisioned pool of " +
           std::to_string(scenario_.max_nodes);
  }
  std::uint32_t faulty = 0;
  for (auto id : faulty_nodes(scenario_)) faulty += id < k.n ? 1 : 0;
  if (faulty > fault_bound(k.n)) {
    return "fault bound: " + std::to_string(faulty) + " faulty nodes exceed f=" +
           std::to_string(fault_bound(k.n));
  }
  return std::nullopt;
}

void Simulation::decide(EpochRecord& rec, SimTime now) {
  auto step = controller_.observe(knobs_, rec.score);
  while (step.next != knobs_) {
    auto reason = infeasible(step.next);
    if (!reason) break;
    rec.rejected.push_back({step.next, *reason});
    step = controller_.reject_trial();
  }
  rec.decision = step.decision;
  rec.accepted = step.accepted;
  rec.accepted_score = step.accepted_score;
  if (step.next == knobs_ || done_) return;
  if (epochs_.size() + 1 >= scenario_.epochs) return;  // no epoch left to measure it

  rec.next = step.next;
  control::ReconfigTx r{step.next, ++reconfig_seq_};
  network_.inject_tx(control::make_reconfig_tx(r, now), now);
  awaiting_ = step.next;
  anchor_.reset();
}

// --- reconfiguration ---------------------------------------------------------------

void Simulation::cancel_engine_timers(NodeId id) {
  for (net::TimerId t : {consensus::kViewTimer, consensus::kProposeTimer, consensus::kNoopTimer,
                         consensus::kWaitTimer, kTransferTimer}) {
    network_.cancel_timer(id, t);
  }
}

void Simulation::add_stats(const consensus::EngineStats& s) {
  stats_.malformed += s.malformed;
  stats_.invalid += s.invalid;
  stats_.equivocations += s.equivocations;
  stats_.view_changes += s.view_changes;
  stats_.sync_requests += s.sync_requests;
  stats_.commits += s.commits;
}

void Simulation::retire(NodeId id) {
  auto& node = *nodes_[id];
  if (node.engine) add_stats(node.engine->stats());
  node.engine.reset();
  node.member = false;
  node.pending = false;
  node.held.reset();
  node.stash.clear();
  cancel_engine_timers(id);
}

void Simulation::apply_switch(Height height, const control::ReconfigTx& r, SimTime now) {
  if (!awaiting_ || r.sequence != reconfig_seq_) return;
  awaiting_.reset();
  Height top = chain_.size() - 1;
  switches_.push_back({top, now, era_, knobs_, r.knobs});
  warmup_height_ = top + 1;
  (void)height;

  bool rebuild_all = r.knobs.n != knobs_.n || r.knobs.protocol != knobs_.protocol;
  knobs_ = r.knobs;
  config_ = make_config(knobs_.n, knobs_.protocol, knobs_.batch, scenario_.epoch_len);

  if (!rebuild_all) {
    for (NodeId id = 0; id < config_.n; ++id) {
      auto& node = *nodes_[id];
      if (node.engine && !node.pending && alive(id, now)) {
        step(id, consensus::ReconfigEvent{config_, top}, now);
      }
    }
    return;
  }

  ++era_;
  std::optional<consensus::Mempool> donor;
  for (NodeId id = 0; id < nodes_.size() && !donor; ++id) {
    const auto& node = *nodes_[id];
    if (node.member && alive(id, now) && honest(id)) {
      if (node.engine && !node.pending) {
        donor = node.engine->mempool();
      } else if (node.held) {
        donor = *node.held;
      }
    }
  }

  const auto& bytes = consensus::SizeModel{}.bytes;
  std::vector<NodeId> ready;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    auto& node = *nodes_[id];
    if (id >= config_.n || !alive(id, now)) {
      if (node.member || node.engine) retire(id);
      node.member = id < config_.n;  // a crashed member stays in the set, silent
      continue;
    }
    Height have = 0;
    if (node.engine && !node.pending) {
      have = node.engine->store().committed_height();
      node.held = node.engine->mempool();
      add_stats(node.engine->stats());
    } else if (node.member && node.pending) {
      have = node.have_height;
    } else {
      node.held = donor ? *donor : consensus::Mempool{};
    }
    node.engine.reset();
    cancel_engine_timers(id);
    node.stash.clear();
    node.member = true;
    node.era = era_;
    node.have_height = have;
    node.target_height = top;
    if (!node.held) node.held = donor ? *donor : consensus::Mempool{};

    std::uint64_t missing = 0;
    for (Height h = have + 1; h <= top; ++h) {
      missing += bytes.header + bytes.hash + chain_[h]->txs.size() * bytes.tx;
    }
    node.pending = true;
    if (missing == 0) {
      ready.push_back(id);
    } else {
      auto bw = network_.link(0, id == 0 ? 1 : 0).bandwidth_bytes_per_ms;
      network_.set_timer(id, kTransferTimer, std::max<SimTime>(1, ceil_div(missing, bw)));
    }
  }
  for (auto id : ready) rebuild(id, now);
}

void Simulation::rebuild(NodeId id, SimTime now) {
  auto& node = *nodes_[id];
  node.pending = false;
  std::vector<BlockPtr> prefix(chain_.begin(),
                               chain_.begin() + static_cast<std::ptrdiff_t>(node.target_height + 1));
  consensus::EngineContext ctx{id, config_, era_, keys_[id], verifier_,
                               engine_params(scenario_, knobs_.batch)};
  auto pool = node.held ? std::move(*node.held) : consensus::Mempool{};
  node.held.reset();
  node.engine = consensus::make_engine(std::move(ctx), consensus::BlockStore(std::move(prefix)),
                                       std::move(pool));
  node.have_height = node.target_height;
  apply(id, node.engine->start(now), now);
  auto stash = std::move(node.stash);
  node.stash.clear();
  for (auto& [from, bytes] : stash) {
    deliver_to(id, bytes, from, now);
    if (!node.engine) break;
  }
}

// ---------------------------------------------------------------------------

RunResult run_scenario(const Scenario& s, SimOptions options) {
  Scenario copy = s;
  copy.controller.policy = control::PolicyKind::kStatic;
  return Simulation(std::move(copy), options).run();
}

RunResult run_adaptive(Scenario s, std::uint32_t epochs, SimOptions options) {
  if (epochs != 0) s.epochs = epochs;
  return Simulation(std::move(s), options).run();
}

}  // namespace dcs::harness
