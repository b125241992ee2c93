#pragma once

#include <set>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dcs/types.hpp"

namespace dcs::consensus {

using DigestSet = std::unordered_set<Digest, DigestHash>;

/// Pending transactions in arrival order; same-millisecond arrivals are
/// ordered by id.
class Mempool {
 public:
  /// False if the id was seen before (pending or already committed).
  bool add(const Transaction& tx, SimTime arrival);
  void remove(const Digest& id);

  bool contains(const Digest& id) const { return entries_.contains(id); }
  bool seen(const Digest& id) const { return seen_.contains(id); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Up to `max` pending transactions in order, skipping ids in `exclude`.
  std::vector<Transaction> peek(std::size_t max, const DigestSet* exclude = nullptr) const;
  std::size_t count_eligible(const DigestSet* exclude) const;

 private:
  struct Key {
    SimTime arrival;
    Digest id;
    auto operator<=>(const Key&) const = default;
  };
  struct Entry {
    Key key;
    Transaction tx;
  };

  std::set<Key> order_;
  std::unordered_map<Digest, Entry, DigestHash> entries_;
  DigestSet seen_;
};

/// Up to batch_size pending transactions, FIFO. Empty if nothing is pending.
std::vector<Transaction> propose_batch(const Mempool& mempool, std::size_t batch_size,
                                       const DigestSet* exclude = nullptr);

}  // namespace dcs::consensus
