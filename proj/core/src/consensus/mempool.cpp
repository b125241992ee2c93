#include "dcs/consensus/mempool.hpp"

namespace dcs::consensus {

bool Mempool::add(const Transaction& tx, SimTime arrival) {
  if (!seen_.insert(tx.id).second) return false;
  Key key{arrival, tx.id};
  order_.insert(key);
  entries_.emplace(tx.id, Entry{key, tx});
  return true;
}

void Mempool::remove(const Digest& id) {
  seen_.insert(id);
  auto it = entries_.find(id);
  if (it == entries_.end()) return;
  order_.erase(it->second.key);
  entries_.erase(it);
}

std::vector<Transaction> Mempool::peek(std::size_t max, const DigestSet* exclude) const {
  std::vector<Transaction> out;
  for (auto it = order_.begin(); it != order_.end() && out.size() < max; ++it) {
    if (exclude != nullptr && exclude->contains(it->id)) continue;
    out.push_back(entries_.at(it->id).tx);
  }
  return out;
}

std::size_t Mempool::count_eligible(const DigestSet* exclude) const {
  if (exclude == nullptr || exclude->empty()) return entries_.size();
  std::size_t n = 0;
  for (const auto& k : order_) n += exclude->contains(k.id) ? 0 : 1;
  return n;
}

std::vector<Transaction> propose_batch(const Mempool& mempool, std::size_t batch_size,
                                       const DigestSet* exclude) {
  return mempool.peek(batch_size, exclude);
}

}  // namespace dcs::consensus
