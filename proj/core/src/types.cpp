#include "dcs/types.hpp"

#include <sodium.h>

#include <algorithm>

#include "dcs/codec.hpp"

namespace dcs {

Digest sha256(ByteSpan data) {
  Digest out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

Digest sha256(std::string_view data) {
  return sha256(ByteSpan{reinterpret_cast<const std::uint8_t*>(data.data()), data.size()});
}

std::string to_hex(ByteSpan data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

Digest digest_from_hex(std::string_view hex) {
  if (hex.size() != 64) throw std::invalid_argument("digest hex must be 64 characters");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("invalid hex digit");
  };
  Digest out;
  for (std::size_t i = 0; i < 32; ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  ByteWriter w;
  w.u64(master);
  w.raw(ByteSpan{reinterpret_cast<const std::uint8_t*>(label.data()), label.size()});
  auto d = sha256(w.data());
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= std::uint64_t{d[i]} << (8 * i);
  return out;
}

std::string_view protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kPbft:
      return "pbft";
    case Protocol::kHotstuff:
      return "hotstuff";
    case Protocol::kHotstuff2:
      return "hotstuff2";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "pbft") return Protocol::kPbft;
  if (lower == "hotstuff") return Protocol::kHotstuff;
  if (lower == "hotstuff2" || lower == "hotstuff-2") return Protocol::kHotstuff2;
  throw ConfigError("unknown protocol '" + std::string(name) + "'");
}

bool is_commit_phase(Phase p) {
  return p == Phase::kPbftCommit || p == Phase::kHsCommit || p == Phase::kHs2Commit;
}

Digest transaction_id(std::uint64_t client, ByteSpan payload, SimTime submit_time) {
  ByteWriter w(payload.size() + 20);
  w.u64(client);
  w.u64(submit_time);
  w.bytes(payload);
  return sha256(w.data());
}

Transaction make_transaction(std::uint64_t client, Bytes payload, SimTime submit_time,
                             std::size_t max_payload) {
  if (payload.size() > max_payload) throw std::invalid_argument("transaction payload too large");
  Transaction tx;
  tx.id = transaction_id(client, payload, submit_time);
  tx.payload = std::move(payload);
  tx.client = client;
  tx.submit_time = submit_time;
  return tx;
}

Digest hash_block(const BlockHeader& header, std::span<const Transaction> txs) {
  ByteWriter w(60 + 32 * txs.size());
  w.digest(header.parent);
  w.u64(header.height);
  w.u64(header.view);
  w.u32(header.proposer);
  w.u32(static_cast<std::uint32_t>(txs.size()));
  for (const auto& tx : txs) w.digest(tx.id);
  return sha256(w.data());
}

Digest hash_block(const Block& block) {
  return hash_block(BlockHeader{block.parent, block.height, block.view, block.proposer}, block.txs);
}

Block make_block(const BlockHeader& header, std::vector<Transaction> txs) {
  Block b;
  b.parent = header.parent;
  b.height = header.height;
  b.view = header.view;
  b.proposer = header.proposer;
  b.txs = std::move(txs);
  b.hash = hash_block(b);
  return b;
}

const BlockPtr& genesis_block() {
  static const BlockPtr kGenesis = std::make_shared<const Block>(make_block(BlockHeader{}, {}));
  return kGenesis;
}

bool extends(const Block& child, const Block& parent) {
  return child.parent == parent.hash && child.height == parent.height + 1;
}

std::uint32_t fault_bound(std::uint32_t n) { return n == 0 ? 0 : (n - 1) / 3; }

SystemConfig make_config(std::uint32_t n, Protocol protocol, std::uint32_t batch_size,
                         std::uint32_t epoch_len, std::size_t max_batch) {
  if (n < 4) throw ConfigError("n must be at least 4 (got " + std::to_string(n) + ")");
  if (batch_size < 1 || batch_size > max_batch) {
    throw ConfigError("batch_size must be in [1, " + std::to_string(max_batch) + "] (got " +
                      std::to_string(batch_size) + ")");
  }
  if (epoch_len < 1) throw ConfigError("epoch_len must be positive");
  SystemConfig c;
  c.n = n;
  c.f = fault_bound(n);
  c.protocol = protocol;
  c.batch_size = batch_size;
  c.epoch_len = epoch_len;
  return c;
}

std::uint32_t quorum_size(const SystemConfig& config) { return config.n - config.f; }

std::uint32_t doubled_commit_wait(std::uint32_t n, std::uint32_t f) { return 2 * n - 2 * f; }

}  // namespace dcs
