#pragma once

#include "dcs/hotstuff.hpp"

namespace dcs::hotstuff2 {

using consensus::BlockStore;
using consensus::EngineContext;
using consensus::Mempool;

/// Two-phase HotStuff: proposal, lock vote, commit vote. On the happy path
/// the next leader proposes as soon as it sees the commit certificate, with
/// no NewView round. After a timeout the new leader either holds a
/// certificate from the previous view or waits a bounded delay for locks.
class Hotstuff2Engine final : public hotstuff::LinearEngine {
 public:
  using LinearEngine::LinearEngine;

  std::unique_ptr<consensus::Engine> clone() const override;
  Protocol protocol() const override { return Protocol::kHotstuff2; }

 protected:
  void on_start(SimTime now) override;
  void on_view_timeout(SimTime now) override;
  void on_other_timer(net::TimerId id, SimTime now) override;
  Phase first_phase() const override { return Phase::kHs2Lock; }
  std::optional<Phase> next_vote(Phase cert_phase) const override;
  bool justify_phase(Phase p) const override;
  void on_certificate(NodeId from, const QuorumCert& qc, SimTime now) override;
  bool leader_may_propose() const override;
  void on_new_view_msg(NodeId from, View v, SimTime now) override;

 private:
  bool wait_done_ = false;  // leader wait after a view change elapsed
  QuorumCert entry_high_;  // our best certificate on entering the view
};

}  // namespace dcs::hotstuff2
