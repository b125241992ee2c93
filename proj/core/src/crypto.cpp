#include "dcs/crypto.hpp"

#include <sodium.h>

#include <algorithm>

#include "dcs/codec.hpp"
#include "sodium_init.hpp"

namespace dcs {

namespace {

std::array<std::uint8_t, 32> node_seed(const MasterSeed& master, NodeId node) {
  ByteWriter w;
  w.raw(master);
  w.raw(ByteSpan{reinterpret_cast<const std::uint8_t*>("dcs-node-key"), 12});
  w.u32(node);
  return sha256(w.data());
}

}  // namespace

std::string_view signature_scheme() {
#ifdef DCS_SIGNATURE_MAC
  return "mac";
#else
  return "ed25519";
#endif
}

MasterSeed master_seed_from(std::uint64_t seed) {
  ByteWriter w;
  w.raw(ByteSpan{reinterpret_cast<const std::uint8_t*>("dcs-master"), 10});
  w.u64(seed);
  return sha256(w.data());
}

KeyPair keygen(const MasterSeed& master, NodeId node) {
  detail::ensure_sodium();
  auto seed = node_seed(master, node);
  KeyPair kp;
  kp.node = node;
#ifdef DCS_SIGNATURE_MAC
  // Keyed-MAC stand-in: the "public" key doubles as the MAC key.
  ByteWriter w;
  w.raw(ByteSpan{reinterpret_cast<const std::uint8_t*>("mac-pk"), 6});
  w.raw(seed);
  kp.public_key = sha256(w.data());
  std::copy(seed.begin(), seed.end(), kp.secret.begin());
  std::copy(kp.public_key.begin(), kp.public_key.end(), kp.secret.begin() + 32);
#else
  crypto_sign_seed_keypair(kp.public_key.data(), kp.secret.data(), seed.data());
#endif
  return kp;
}

Signature sign(const SecretKey& secret, ByteSpan message) {
  detail::ensure_sodium();
  Signature sig{};
#ifdef DCS_SIGNATURE_MAC
  crypto_auth_hmacsha512(sig.data(), message.data(), message.size(), secret.data() + 32);
#else
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret.data());
#endif
  return sig;
}

bool verify(const PublicKey& public_key, ByteSpan message, const Signature& sig) {
  detail::ensure_sodium();
#ifdef DCS_SIGNATURE_MAC
  Signature expect{};
  crypto_auth_hmacsha512(expect.data(), message.data(), message.size(), public_key.data());
  return sodium_memcmp(expect.data(), sig.data(), sig.size()) == 0;
#else
  return crypto_sign_verify_detached(sig.data(), message.data(), message.size(),
                                     public_key.data()) == 0;
#endif
}

Bytes vote_message(const Digest& block_hash, View view, Phase phase) {
  ByteWriter w(48);
  w.raw(ByteSpan{reinterpret_cast<const std::uint8_t*>("dcs-vote"), 8});
  w.digest(block_hash);
  w.u64(view);
  w.u8(static_cast<std::uint8_t>(phase));
  return std::move(w).take();
}

// ---------------------------------------------------------------------------

PublicKeyRegistry::Provisioned PublicKeyRegistry::provision(const MasterSeed& master,
                                                            std::uint32_t initial_members,
                                                            std::uint32_t pool_size) {
  if (initial_members > pool_size) throw ConfigError("initial members exceed key pool");
  auto reg = std::make_shared<PublicKeyRegistry>();
  Provisioned out;
  out.keys.reserve(pool_size);
  for (NodeId id = 0; id < pool_size; ++id) {
    auto kp = keygen(master, id);
    reg->register_key(id, kp.public_key);
    if (id >= initial_members) reg->add_standby(id);
    out.keys.push_back(kp);
  }
  out.registry = std::move(reg);
  return out;
}

void PublicKeyRegistry::register_key(NodeId node, const PublicKey& key) {
  if (!keys_.emplace(node, key).second) {
    throw std::logic_error("node " + std::to_string(node) + " already registered");
  }
}

void PublicKeyRegistry::add_standby(NodeId node) {
  if (!contains(node)) throw std::logic_error("standby node has no registered key");
  if (std::find(standby_.begin(), standby_.end(), node) != standby_.end()) return;
  standby_.push_back(node);
}

const PublicKey* PublicKeyRegistry::find(NodeId node) const {
  auto it = keys_.find(node);
  return it == keys_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------

SignatureVerifier::SignatureVerifier(std::shared_ptr<const PublicKeyRegistry> registry)
    : registry_(std::move(registry)) {
  if (!registry_) throw std::invalid_argument("null registry");
}

bool SignatureVerifier::verify(NodeId node, ByteSpan message, const Signature& sig) const {
  const auto* pk = registry_->find(node);
  if (pk == nullptr) return false;
  crypto_hash_sha256_state st;
  crypto_hash_sha256_init(&st);
  crypto_hash_sha256_update(&st, pk->data(), pk->size());
  crypto_hash_sha256_update(&st, sig.data(), sig.size());
  crypto_hash_sha256_update(&st, message.data(), message.size());
  Digest key;
  crypto_hash_sha256_final(&st, key.data());
  if (verified_.contains(key)) {
    ++hits_;
    return true;
  }
  if (!dcs::verify(*pk, message, sig)) return false;
  verified_.insert(key);
  return true;
}

namespace {

std::vector<SignerEntry> valid_distinct(std::span<const SignerEntry> votes, const Digest& hash,
                                        View view, Phase phase, const SystemConfig& config,
                                        const SignatureVerifier& verifier) {
  auto msg = vote_message(hash, view, phase);
  std::vector<SignerEntry> out;
  for (const auto& v : votes) {
    if (!config.is_member(v.node)) continue;
    if (std::any_of(out.begin(), out.end(), [&](const auto& e) { return e.node == v.node; })) continue;
    if (!verifier.verify(v.node, msg, v.sig)) continue;
    out.push_back(v);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.node < b.node; });
  return out;
}

}  // namespace

QuorumCert assemble_qc(std::span<const SignerEntry> votes, const Digest& block_hash, View view,
                       Phase phase, const SystemConfig& config, const SignatureVerifier& verifier) {
  auto signers = valid_distinct(votes, block_hash, view, phase, config, verifier);
  auto need = quorum_size(config);
  if (signers.size() < need) throw InsufficientVotes(signers.size(), need);
  signers.resize(need);
  return QuorumCert{block_hash, view, phase, std::move(signers)};
}

QuorumCert assemble_qc(std::span<const SignerEntry> votes, const Digest& block_hash, View view,
                       Phase phase, const SystemConfig& config,
                       const std::shared_ptr<const PublicKeyRegistry>& registry) {
  return assemble_qc(votes, block_hash, view, phase, config, SignatureVerifier(registry));
}

bool verify_qc(const QuorumCert& qc, const SystemConfig& config, const SignatureVerifier& verifier) {
  if (qc.signers.size() < quorum_size(config)) return false;
  auto msg = vote_message(qc.block_hash, qc.view, qc.phase);
  for (std::size_t i = 0; i < qc.signers.size(); ++i) {
    const auto& s = qc.signers[i];
    if (i > 0 && qc.signers[i - 1].node >= s.node) return false;  // sorted, distinct
    if (!config.is_member(s.node)) return false;
    if (!verifier.verify(s.node, msg, s.sig)) return false;
  }
  return true;
}

bool verify_qc(const QuorumCert& qc, const SystemConfig& config,
               const std::shared_ptr<const PublicKeyRegistry>& registry) {
  return verify_qc(qc, config, SignatureVerifier(registry));
}

}  // namespace dcs
