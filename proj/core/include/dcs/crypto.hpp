#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <unordered_set>
#include <vector>

#include "dcs/types.hpp"

namespace dcs {

using PublicKey = std::array<std::uint8_t, 32>;
using SecretKey = std::array<std::uint8_t, 64>;
using MasterSeed = std::array<std::uint8_t, 32>;

struct KeyPair {
  NodeId node = 0;
  SecretKey secret{};
  PublicKey public_key{};
};

/// Name of the compiled-in signature scheme ("ed25519" or "mac").
std::string_view signature_scheme();

MasterSeed master_seed_from(std::uint64_t seed);

/// Deterministic per-node key derivation from the master seed.
KeyPair keygen(const MasterSeed& master, NodeId node);

Signature sign(const SecretKey& secret, ByteSpan message);
bool verify(const PublicKey& public_key, ByteSpan message, const Signature& sig);

/// Canonical byte string signed by a vote over (block_hash, view, phase).
Bytes vote_message(const Digest& block_hash, View view, Phase phase);

/// Pre-distributed public keys for consensus members and the standby pool.
/// Append-only: a node id can be registered exactly once.
class PublicKeyRegistry {
 public:
  struct Provisioned;

  /// Generates keys for nodes [0, pool_size); ids >= initial_members form the
  /// standby pool.
  static Provisioned provision(const MasterSeed& master, std::uint32_t initial_members,
                               std::uint32_t pool_size);

  void register_key(NodeId node, const PublicKey& key);
  void add_standby(NodeId node);
  const PublicKey* find(NodeId node) const;
  bool contains(NodeId node) const { return find(node) != nullptr; }
  const std::vector<NodeId>& standby() const { return standby_; }
  std::size_t size() const { return keys_.size(); }

 private:
  std::map<NodeId, PublicKey> keys_;
  std::vector<NodeId> standby_;
};

struct PublicKeyRegistry::Provisioned {
  std::shared_ptr<const PublicKeyRegistry> registry;
  std::vector<KeyPair> keys;  // indexed by node id
};

/// Registry-backed signature checks with a memo of already-verified
/// (key, message, signature) triples. One instance per simulated world.
class SignatureVerifier {
 public:
  explicit SignatureVerifier(std::shared_ptr<const PublicKeyRegistry> registry);

  bool verify(NodeId node, ByteSpan message, const Signature& sig) const;
  const PublicKeyRegistry& registry() const { return *registry_; }
  std::size_t cache_hits() const { return hits_; }

 private:
  std::shared_ptr<const PublicKeyRegistry> registry_;
  mutable std::unordered_set<Digest, DigestHash> verified_;
  mutable std::size_t hits_ = 0;
};

enum class AuthMode : std::uint8_t { kMultisig, kSimulatedThreshold };

/// Byte cost charged for a quorum certificate. Real threshold signatures are
/// not implemented; SIMULATED_THRESHOLD only changes the accounted size.
struct AuthenticatorModel {
  static constexpr std::uint32_t kQcOverhead = 48;  // hash + view + phase/bitmap

  AuthMode mode = AuthMode::kMultisig;
  std::uint32_t sig_bytes = 64;

  std::uint64_t qc_wire_size(std::size_t signer_count) const {
    if (mode == AuthMode::kSimulatedThreshold) return sig_bytes + kQcOverhead;
    return signer_count * sig_bytes + kQcOverhead;
  }
};

class InsufficientVotes : public std::runtime_error {
 public:
  InsufficientVotes(std::size_t have, std::size_t need)
      : std::runtime_error("insufficient votes: " + std::to_string(have) + " of " +
                           std::to_string(need)),
        have_(have),
        need_(need) {}
  std::size_t have() const { return have_; }
  std::size_t need() const { return need_; }

 private:
  std::size_t have_;
  std::size_t need_;
};

/// Builds a QC from votes: invalid signatures and non-members are discarded,
/// duplicate signers count once. Throws InsufficientVotes below quorum.
QuorumCert assemble_qc(std::span<const SignerEntry> votes, const Digest& block_hash, View view,
                       Phase phase, const SystemConfig& config, const SignatureVerifier& verifier);
QuorumCert assemble_qc(std::span<const SignerEntry> votes, const Digest& block_hash, View view,
                       Phase phase, const SystemConfig& config,
                       const std::shared_ptr<const PublicKeyRegistry>& registry);

bool verify_qc(const QuorumCert& qc, const SystemConfig& config, const SignatureVerifier& verifier);
bool verify_qc(const QuorumCert& qc, const SystemConfig& config,
               const std::shared_ptr<const PublicKeyRegistry>& registry);

}  // namespace dcs
