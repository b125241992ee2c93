#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "dcs/types.hpp"

namespace dcs::consensus {

/// The safety invariant was violated: a block conflicting with the committed
/// chain was about to be committed. Fatal.
class ConflictingCommit : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct CommitRecord {
  BlockPtr block;
  SimTime commit_time = 0;
  std::vector<SimTime> tx_latencies;  // now - submit_time, in block order
};

/// Known blocks plus the committed chain, which is hash-linked from genesis
/// (or from a snapshot anchor) and never rewritten.
class BlockStore {
 public:
  BlockStore();
  /// Starts from an already-committed chain; chain.front() is genesis.
  explicit BlockStore(std::vector<BlockPtr> committed_chain);

  void add(const BlockPtr& block);
  BlockPtr find(const Digest& hash) const;
  bool knows(const Digest& hash) const { return blocks_.contains(hash); }

  const BlockPtr& head() const { return chain_.back(); }
  Height committed_height() const { return head()->height; }
  BlockPtr committed_at(Height h) const;
  bool is_committed(const Digest& hash) const;
  const std::vector<BlockPtr>& chain() const { return chain_; }

  /// Blocks strictly above the committed head up to and including `tip`, in
  /// height order; nullopt if some ancestor is unknown or the branch does not
  /// descend from the head.
  std::optional<std::vector<BlockPtr>> pending_branch(const Digest& tip) const;

  /// True if `descendant` equals or descends from `ancestor` through known blocks.
  bool extends_branch(const Digest& descendant, const Digest& ancestor) const;

  /// Commits a block extending the head. Throws ConflictingCommit if it does not.
  CommitRecord on_commit(const BlockPtr& block, SimTime now);

  /// Commits `tip` together with every uncommitted ancestor, lowest first.
  /// Already-committed tips yield an empty list. Throws ConflictingCommit if
  /// `tip` conflicts with the committed chain and std::out_of_range if an
  /// ancestor is unknown.
  std::vector<CommitRecord> commit_through(const BlockPtr& tip, SimTime now);

  void set_commit_cert(Height h, QuorumCert cert) { certs_[h] = std::move(cert); }
  const QuorumCert* commit_cert(Height h) const;
  /// Highest committed height that has a stored commit certificate.
  std::optional<Height> highest_certified() const;

 private:
  std::unordered_map<Digest, BlockPtr, DigestHash> blocks_;
  std::vector<BlockPtr> chain_;
  std::map<Height, QuorumCert> certs_;
};

}  // namespace dcs::consensus
