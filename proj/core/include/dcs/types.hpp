#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dcs {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

/// 256-bit SHA-256 digest.
using Digest = std::array<std::uint8_t, 32>;

using NodeId = std::uint32_t;
using Height = std::uint64_t;
using View = std::uint64_t;

/// Simulated milliseconds since world start.
using SimTime = std::uint64_t;

inline constexpr Digest kZeroDigest{};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (std::size_t i = 0; i < sizeof h; ++i) h |= std::size_t{d[i]} << (8 * i);
    return h;
  }
};

Digest sha256(ByteSpan data);
Digest sha256(std::string_view data);
std::string to_hex(ByteSpan data);
inline std::string to_hex(const Digest& d) { return to_hex(ByteSpan{d}); }
Digest digest_from_hex(std::string_view hex);

/// Derives an independent 64-bit stream seed from a master seed and a label.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

enum class Protocol : std::uint8_t { kPbft = 1, kHotstuff = 2, kHotstuff2 = 3 };

std::string_view protocol_name(Protocol p);
Protocol parse_protocol(std::string_view name);

/// Vote/certificate phase tags, shared across the three engines so that a
/// certificate is unambiguous about which step of which protocol it attests.
enum class Phase : std::uint8_t {
  kPbftPrepare = 1,
  kPbftCommit = 2,
  kHsPrepare = 10,
  kHsPreCommit = 11,
  kHsCommit = 12,
  kHs2Lock = 20,
  kHs2Commit = 21,
};

bool is_commit_phase(Phase p);

// ---------------------------------------------------------------------------

struct Transaction {
  Digest id{};
  Bytes payload;
  std::uint64_t client = 0;
  SimTime submit_time = 0;

  bool operator==(const Transaction&) const = default;
};

inline constexpr std::size_t kDefaultMaxPayload = 256;

/// Transactions from this client id carry a serialized reconfiguration.
inline constexpr std::uint64_t kReconfigClient = ~std::uint64_t{0};

Digest transaction_id(std::uint64_t client, ByteSpan payload, SimTime submit_time);

/// Builds a transaction with its id filled in. Throws std::invalid_argument if
/// the payload exceeds `max_payload`.
Transaction make_transaction(std::uint64_t client, Bytes payload, SimTime submit_time,
                             std::size_t max_payload = kDefaultMaxPayload);

struct BlockHeader {
  Digest parent{};
  Height height = 0;
  View view = 0;
  NodeId proposer = 0;
};

struct Block {
  Digest parent{};
  Height height = 0;
  View view = 0;
  NodeId proposer = 0;
  std::vector<Transaction> txs;
  Digest hash{};
};

using BlockPtr = std::shared_ptr<const Block>;

Digest hash_block(const BlockHeader& header, std::span<const Transaction> txs);
Digest hash_block(const Block& block);

/// Builds and hashes a block.
Block make_block(const BlockHeader& header, std::vector<Transaction> txs);
const BlockPtr& genesis_block();

/// True iff `child` is the direct successor of `parent`.
bool extends(const Block& child, const Block& parent);

// ---------------------------------------------------------------------------

using Signature = std::array<std::uint8_t, 64>;

struct SignerEntry {
  NodeId node = 0;
  Signature sig{};
  bool operator==(const SignerEntry&) const = default;
};

struct QuorumCert {
  Digest block_hash{};
  View view = 0;
  Phase phase = Phase::kHsPrepare;
  std::vector<SignerEntry> signers;  // sorted by node id

  bool operator==(const QuorumCert&) const = default;
};

// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxBatchSize = 1024;

struct SystemConfig {
  std::uint32_t n = 4;
  std::uint32_t f = 1;
  Protocol protocol = Protocol::kPbft;
  std::uint32_t batch_size = 1;
  std::uint32_t epoch_len = 20;

  bool is_member(NodeId id) const { return id < n; }
  bool operator==(const SystemConfig&) const = default;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint32_t fault_bound(std::uint32_t n);

/// Validates and derives f. Throws ConfigError.
SystemConfig make_config(std::uint32_t n, Protocol protocol, std::uint32_t batch_size,
                         std::uint32_t epoch_len = 20, std::size_t max_batch = kMaxBatchSize);

std::uint32_t quorum_size(const SystemConfig& config);

/// Commit-phase wait when the node count doubles from `n` to 2n while the
/// fault bound stays at `f`: 2n - 2f (versus n - f before doubling).
std::uint32_t doubled_commit_wait(std::uint32_t n, std::uint32_t f);

}  // namespace dcs
