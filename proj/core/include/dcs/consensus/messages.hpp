#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "dcs/crypto.hpp"
#include "dcs/netsim.hpp"
#include "dcs/types.hpp"

namespace dcs::consensus {

/// Byte model charged to the network: header 64 B, hash 32 B, 256 B per
/// transaction; signatures and certificates per the AuthenticatorModel.
/// Proposals carry the full block, every later phase carries the hash only.
struct ByteModel {
  std::uint32_t header = 64;
  std::uint32_t hash = 32;
  std::uint32_t tx = 256;
};

struct SizeModel {
  ByteModel bytes;
  AuthenticatorModel auth;

  std::uint64_t block_body(const Block& b) const { return bytes.hash + b.txs.size() * bytes.tx; }
  std::uint64_t qc(const QuorumCert& q) const { return auth.qc_wire_size(q.signers.size()); }
};

// --- PBFT -------------------------------------------------------------------

/// `sig` signs vote_message(hash, view, kPbftPrepare): the pre-prepare doubles
/// as the leader's prepare.
struct PbftPrePrepare {
  View view = 0;
  Height height = 0;
  BlockPtr block;
  Signature sig{};
};

struct PbftVote {
  View view = 0;
  Height height = 0;
  Digest hash{};
  Phase phase = Phase::kPbftPrepare;
  Signature sig{};
};

/// A block plus 2f+1 prepare signatures (leader's pre-prepare included).
struct PreparedCert {
  BlockPtr block;
  QuorumCert qc;
};

struct PbftViewChange {
  View target = 0;
  Height committed = 0;
  std::vector<PreparedCert> prepared;
  NodeId sender = 0;
  Signature sig{};
};

struct PbftNewView {
  View view = 0;
  std::vector<PbftViewChange> proofs;
  BlockPtr block;  // optional re-proposal / first proposal of the view
  Signature sig{};
};

Bytes view_change_message(const PbftViewChange& vc);

// --- HotStuff / HotStuff-2 ----------------------------------------------------

struct HsProposal {
  View view = 0;
  BlockPtr block;
  QuorumCert justify;
};

struct HsVote {
  View view = 0;
  Phase phase = Phase::kHsPrepare;
  Digest hash{};
  Signature sig{};
};

/// Leader broadcast of a freshly formed certificate (pre-commit, commit and
/// decide messages in HotStuff; lock and commit in HotStuff-2).
struct HsCert {
  View view = 0;
  QuorumCert qc;
};

struct HsNewView {
  View view = 0;
  QuorumCert qc;
};

// --- shared catch-up ----------------------------------------------------------

struct SyncRequest {
  Height from_height = 0;
};

struct SyncResponse {
  std::vector<BlockPtr> blocks;  // consecutive heights
  QuorumCert cert;               // commit certificate of blocks.back()
};

using Message = std::variant<PbftPrePrepare, PbftVote, PbftViewChange, PbftNewView, HsProposal,
                             HsVote, HsCert, HsNewView, SyncRequest, SyncResponse>;

struct Envelope {
  Protocol protocol = Protocol::kPbft;
  std::uint32_t era = 0;
  Message body;
};

struct EnvelopeTag {
  Protocol protocol;
  std::uint32_t era;
};

net::MsgClass message_class(const Message& m);
std::uint64_t model_size(const Message& m, const SizeModel& model);

net::Payload encode(const Envelope& env, const SizeModel& model);

/// Returns nullopt for anything malformed: truncation, bad tags, trailing
/// bytes, transaction ids or block hashes that do not match their contents.
std::optional<Envelope> decode(ByteSpan bytes);
std::optional<EnvelopeTag> peek(ByteSpan bytes);

}  // namespace dcs::consensus
