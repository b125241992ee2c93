#include "dcs/consensus/block_store.hpp"

#include <algorithm>

namespace dcs::consensus {

BlockStore::BlockStore() : BlockStore(std::vector<BlockPtr>{genesis_block()}) {}

BlockStore::BlockStore(std::vector<BlockPtr> committed_chain) : chain_(std::move(committed_chain)) {
  if (chain_.empty()) throw std::invalid_argument("committed chain must contain genesis");
  for (std::size_t i = 0; i < chain_.size(); ++i) {
    if (i > 0 && !extends(*chain_[i], *chain_[i - 1])) {
      throw std::invalid_argument("snapshot chain is not hash-linked");
    }
    blocks_.emplace(chain_[i]->hash, chain_[i]);
  }
}

void BlockStore::add(const BlockPtr& block) { blocks_.emplace(block->hash, block); }

BlockPtr BlockStore::find(const Digest& hash) const {
  auto it = blocks_.find(hash);
  return it == blocks_.end() ? nullptr : it->second;
}

BlockPtr BlockStore::committed_at(Height h) const {
  auto base = chain_.front()->height;
  if (h < base || h - base >= chain_.size()) return nullptr;
  return chain_[h - base];
}

bool BlockStore::is_committed(const Digest& hash) const {
  auto b = find(hash);
  if (!b) return false;
  auto c = committed_at(b->height);
  return c && c->hash == hash;
}

std::optional<std::vector<BlockPtr>> BlockStore::pending_branch(const Digest& tip) const {
  std::vector<BlockPtr> branch;
  auto cur = find(tip);
  while (cur && cur->height > committed_height()) {
    branch.push_back(cur);
    cur = find(cur->parent);
  }
  if (!cur || cur->hash != head()->hash) return std::nullopt;
  std::reverse(branch.begin(), branch.end());
  return branch;
}

bool BlockStore::extends_branch(const Digest& descendant, const Digest& ancestor) const {
  auto anc = find(ancestor);
  if (!anc) return false;
  auto cur = find(descendant);
  while (cur && cur->height > anc->height) cur = find(cur->parent);
  return cur && cur->hash == anc->hash;
}

CommitRecord BlockStore::on_commit(const BlockPtr& block, SimTime now) {
  if (!extends(*block, *head())) {
    throw ConflictingCommit("block at height " + std::to_string(block->height) +
                            " does not extend committed head " +
                            std::to_string(committed_height()));
  }
  add(block);
  chain_.push_back(block);
  CommitRecord rec{block, now, {}};
  rec.tx_latencies.reserve(block->txs.size());
  for (const auto& tx : block->txs) {
    rec.tx_latencies.push_back(now >= tx.submit_time ? now - tx.submit_time : 0);
  }
  return rec;
}

std::vector<CommitRecord> BlockStore::commit_through(const BlockPtr& tip, SimTime now) {
  if (tip->height <= committed_height()) {
    auto c = committed_at(tip->height);
    if (c && c->hash == tip->hash) return {};
    throw ConflictingCommit("block at height " + std::to_string(tip->height) +
                            " conflicts with the committed chain");
  }
  add(tip);
  std::vector<BlockPtr> branch;
  for (auto cur = tip; cur->height > committed_height();) {
    branch.push_back(cur);
    auto parent = find(cur->parent);
    if (!parent) throw std::out_of_range("unknown ancestor of block to commit");
    cur = parent;
    if (cur->height == committed_height() && cur->hash != head()->hash) {
      throw ConflictingCommit("branch forks below height " + std::to_string(cur->height + 1));
    }
  }
  std::vector<CommitRecord> out;
  for (auto it = branch.rbegin(); it != branch.rend(); ++it) out.push_back(on_commit(*it, now));
  return out;
}

const QuorumCert* BlockStore::commit_cert(Height h) const {
  auto it = certs_.find(h);
  return it == certs_.end() ? nullptr : &it->second;
}

std::optional<Height> BlockStore::highest_certified() const {
  if (certs_.empty()) return std::nullopt;
  return certs_.rbegin()->first;
}

}  // namespace dcs::consensus
