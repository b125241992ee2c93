#pragma once

#include <map>
#include <optional>

#include "dcs/consensus/engine.hpp"

namespace dcs::hotstuff {

using consensus::BlockStore;
using consensus::EngineContext;
using consensus::Mempool;
using consensus::Message;

/// Leader-based linear BFT machinery shared by HotStuff and HotStuff-2:
/// proposals justified by a QC, votes sent to the leader, certificates
/// broadcast by the leader, and the lock/safe-node rule.
class LinearEngine : public consensus::Engine {
 public:
  LinearEngine(EngineContext ctx, BlockStore store, Mempool mempool);

  const QuorumCert& high_qc() const { return high_qc_; }
  const QuorumCert& locked_qc() const { return locked_qc_; }

 protected:
  void on_start(SimTime now) override;
  void on_message(NodeId from, const Message& msg, SimTime now) override;
  void on_caught_up(SimTime now) override;
  bool ready_to_propose() const override;
  void propose(SimTime now, bool allow_empty) override;

  /// Phase of the first vote on a proposal.
  virtual Phase first_phase() const = 0;
  /// Phase that follows a certificate of `phase`, if replicas vote again.
  virtual std::optional<Phase> next_vote(Phase cert_phase) const = 0;
  /// Phases a proposal may be justified by.
  virtual bool justify_phase(Phase p) const = 0;
  /// Replica reaction to a validated certificate of the current view.
  virtual void on_certificate(NodeId from, const QuorumCert& qc, SimTime now) = 0;
  /// Extra leader condition before proposing in the current view.
  virtual bool leader_may_propose() const = 0;
  virtual void on_new_view_msg(NodeId /*from*/, View /*v*/, SimTime /*now*/) {}

  /// Moves to view `v`, optionally sending NewView(high_qc) to its leader.
  void enter_view(View v, bool send_new_view, SimTime now);
  void update_high_qc(const QuorumCert& qc);
  bool is_anchor(const QuorumCert& qc) const;
  bool valid_qc(const QuorumCert& qc) const { return is_anchor(qc) || check_qc(qc); }
  void cast_vote(Phase phase, const Digest& hash);
  std::size_t new_view_count(View v) const;

  QuorumCert anchor_qc_;
  QuorumCert high_qc_;
  QuorumCert locked_qc_;
  BlockPtr proposal_;  // accepted proposal of the current view
  bool proposed_ = false;
  std::set<Phase> certified_;  // certificates of this view already handled
  std::map<Phase, std::map<NodeId, Signature>> votes_;
  std::map<View, std::map<NodeId, QuorumCert>> new_views_;

 private:
  void on_proposal(NodeId from, const consensus::HsProposal& m, SimTime now);
  void on_vote(NodeId from, const consensus::HsVote& m, SimTime now);
  void on_cert(NodeId from, const consensus::HsCert& m, SimTime now);
  void on_new_view(NodeId from, const consensus::HsNewView& m, SimTime now);
};

/// Basic (non-pipelined) HotStuff: NewView, proposal, then prepare,
/// pre-commit and commit vote rounds, each certified by the leader.
class HotstuffEngine final : public LinearEngine {
 public:
  using LinearEngine::LinearEngine;

  std::unique_ptr<consensus::Engine> clone() const override;
  Protocol protocol() const override { return Protocol::kHotstuff; }

 protected:
  void on_view_timeout(SimTime now) override;
  Phase first_phase() const override { return Phase::kHsPrepare; }
  std::optional<Phase> next_vote(Phase cert_phase) const override;
  bool justify_phase(Phase p) const override;
  void on_certificate(NodeId from, const QuorumCert& qc, SimTime now) override;
  bool leader_may_propose() const override;
};

}  // namespace dcs::hotstuff
