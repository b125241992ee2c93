#pragma once

#include <map>
#include <optional>

#include "dcs/consensus/engine.hpp"

namespace dcs::pbft {

using consensus::BlockStore;
using consensus::EngineContext;
using consensus::Mempool;
using consensus::Message;

/// Stable-leader three-phase BFT (pre-prepare, prepare, commit) with view
/// changes. One proposal is outstanding at a time, at committed height + 1.
class PbftEngine final : public consensus::Engine {
 public:
  PbftEngine(EngineContext ctx, BlockStore store, Mempool mempool);

  std::unique_ptr<consensus::Engine> clone() const override;
  Protocol protocol() const override { return Protocol::kPbft; }

  bool view_changing() const { return view_changing_; }
  View view_change_target() const { return vc_target_; }

 protected:
  void on_start(SimTime now) override;
  void on_message(NodeId from, const Message& msg, SimTime now) override;
  void on_view_timeout(SimTime now) override;
  void on_caught_up(SimTime now) override;
  bool ready_to_propose() const override;
  void propose(SimTime now, bool allow_empty) override;
  bool work_pending() const override;

 private:
  struct SlotKey {
    Height height;
    View view;
    Digest hash;
    auto operator<=>(const SlotKey&) const = default;
  };
  struct Slot {
    std::map<NodeId, Signature> prepares;  // leader excluded
    std::map<NodeId, Signature> commits;
    std::optional<QuorumCert> prepare_qc;
    bool sent_commit = false;
  };
  struct Accepted {
    BlockPtr block;
    Signature leader_sig{};
    bool sent_prepare = false;
  };

  void on_pre_prepare(NodeId from, const consensus::PbftPrePrepare& m, SimTime now);
  void on_vote(NodeId from, const consensus::PbftVote& m, SimTime now);
  void on_view_change(NodeId from, const consensus::PbftViewChange& m, SimTime now);
  void on_new_view(NodeId from, const consensus::PbftNewView& m, SimTime now);

  void try_prepare(Height h, View v);
  void check_prepared(const SlotKey& key);
  void maybe_send_commit(const SlotKey& key);
  void check_committed(const SlotKey& key, NodeId peer, SimTime now);
  void after_commit(SimTime now);

  consensus::PbftViewChange make_view_change(View target) const;
  bool valid_view_change(const consensus::PbftViewChange& vc) const;
  void start_view_change(View target, SimTime now);
  void maybe_new_view(View target, SimTime now);
  void install_view(View v, SimTime now);

  bool view_changing_ = false;
  View vc_target_ = 0;
  std::map<SlotKey, Slot> slots_;
  std::map<std::pair<Height, View>, Accepted> accepted_;
  std::map<View, std::map<NodeId, consensus::PbftViewChange>> view_changes_;
  std::map<NodeId, View> highest_target_;
  std::optional<View> new_view_sent_;
  std::optional<View> pending_new_view_;
};

/// Height and block a new leader must re-propose given view-change proofs:
/// the highest-view prepared certificate at max(committed) + 1, if any.
struct Reproposal {
  Height height = 1;
  BlockPtr block;
};
Reproposal select_reproposal(const std::vector<consensus::PbftViewChange>& proofs);

}  // namespace dcs::pbft
