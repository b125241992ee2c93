#include "dcs/consensus/messages.hpp"

#include "dcs/codec.hpp"

namespace dcs::consensus {

namespace {

constexpr std::uint8_t kMagic = 0xDC;
constexpr std::uint8_t kVersion = 1;
constexpr std::size_t kMaxTxsPerBlock = 1 << 16;
constexpr std::size_t kSignerSize = 4 + 64;

void put_sig(ByteWriter& w, const Signature& s) { w.raw(s); }

void put_qc(ByteWriter& w, const QuorumCert& qc) {
  w.digest(qc.block_hash);
  w.u64(qc.view);
  w.u8(static_cast<std::uint8_t>(qc.phase));
  w.u32(static_cast<std::uint32_t>(qc.signers.size()));
  for (const auto& s : qc.signers) {
    w.u32(s.node);
    put_sig(w, s.sig);
  }
}

void put_block(ByteWriter& w, const Block& b) {
  w.digest(b.parent);
  w.u64(b.height);
  w.u64(b.view);
  w.u32(b.proposer);
  w.u32(static_cast<std::uint32_t>(b.txs.size()));
  for (const auto& tx : b.txs) {
    w.u64(tx.client);
    w.u64(tx.submit_time);
    w.bytes(tx.payload);
  }
}

Phase get_phase(ByteReader& r) {
  auto p = r.u8();
  switch (static_cast<Phase>(p)) {
    case Phase::kPbftPrepare:
    case Phase::kPbftCommit:
    case Phase::kHsPrepare:
    case Phase::kHsPreCommit:
    case Phase::kHsCommit:
    case Phase::kHs2Lock:
    case Phase::kHs2Commit:
      return static_cast<Phase>(p);
  }
  throw DecodeError("unknown phase");
}

QuorumCert get_qc(ByteReader& r) {
  QuorumCert qc;
  qc.block_hash = r.digest();
  qc.view = r.u64();
  qc.phase = get_phase(r);
  auto count = r.count(kSignerSize);
  qc.signers.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SignerEntry e;
    e.node = r.u32();
    e.sig = r.fixed<64>();
    qc.signers.push_back(e);
  }
  return qc;
}

BlockPtr get_block(ByteReader& r) {
  Block b;
  b.parent = r.digest();
  b.height = r.u64();
  b.view = r.u64();
  b.proposer = r.u32();
  auto count = r.count(20);
  if (count > kMaxTxsPerBlock) throw DecodeError("too many transactions");
  b.txs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Transaction tx;
    tx.client = r.u64();
    tx.submit_time = r.u64();
    tx.payload = r.bytes(kDefaultMaxPayload);
    tx.id = transaction_id(tx.client, tx.payload, tx.submit_time);
    b.txs.push_back(std::move(tx));
  }
  b.hash = hash_block(b);
  return std::make_shared<const Block>(std::move(b));
}

void put_view_change(ByteWriter& w, const PbftViewChange& m) {
  w.u64(m.target);
  w.u64(m.committed);
  w.u32(static_cast<std::uint32_t>(m.prepared.size()));
  for (const auto& p : m.prepared) {
    put_block(w, *p.block);
    put_qc(w, p.qc);
  }
  w.u32(m.sender);
  put_sig(w, m.sig);
}

PbftViewChange get_view_change(ByteReader& r) {
  PbftViewChange m;
  m.target = r.u64();
  m.committed = r.u64();
  auto count = r.count(60);
  for (std::size_t i = 0; i < count; ++i) {
    PreparedCert p;
    p.block = get_block(r);
    p.qc = get_qc(r);
    if (p.qc.block_hash != p.block->hash) throw DecodeError("prepared cert does not match block");
    m.prepared.push_back(std::move(p));
  }
  m.sender = r.u32();
  m.sig = r.fixed<64>();
  return m;
}

enum class Tag : std::uint8_t {
  kPbftPrePrepare = 1,
  kPbftVote,
  kPbftViewChange,
  kPbftNewView,
  kHsProposal,
  kHsVote,
  kHsCert,
  kHsNewView,
  kSyncRequest,
  kSyncResponse,
};

void put_body(ByteWriter& w, const Message& m) {
  w.u8(static_cast<std::uint8_t>(m.index() + 1));
  std::visit(
      [&](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, PbftPrePrepare>) {
          w.u64(msg.view);
          w.u64(msg.height);
          put_block(w, *msg.block);
          put_sig(w, msg.sig);
        } else if constexpr (std::is_same_v<T, PbftVote>) {
          w.u64(msg.view);
          w.u64(msg.height);
          w.digest(msg.hash);
          w.u8(static_cast<std::uint8_t>(msg.phase));
          put_sig(w, msg.sig);
        } else if constexpr (std::is_same_v<T, PbftViewChange>) {
          put_view_change(w, msg);
        } else if constexpr (std::is_same_v<T, PbftNewView>) {
          w.u64(msg.view);
          w.u32(static_cast<std::uint32_t>(msg.proofs.size()));
          for (const auto& vc : msg.proofs) put_view_change(w, vc);
          w.u8(msg.block ? 1 : 0);
          if (msg.block) put_block(w, *msg.block);
          put_sig(w, msg.sig);
        } else if constexpr (std::is_same_v<T, HsProposal>) {
          w.u64(msg.view);
          put_block(w, *msg.block);
          put_qc(w, msg.justify);
        } else if constexpr (std::is_same_v<T, HsVote>) {
          w.u64(msg.view);
          w.u8(static_cast<std::uint8_t>(msg.phase));
          w.digest(msg.hash);
          put_sig(w, msg.sig);
        } else if constexpr (std::is_same_v<T, HsCert> || std::is_same_v<T, HsNewView>) {
          w.u64(msg.view);
          put_qc(w, msg.qc);
        } else if constexpr (std::is_same_v<T, SyncRequest>) {
          w.u64(msg.from_height);
        } else if constexpr (std::is_same_v<T, SyncResponse>) {
          w.u32(static_cast<std::uint32_t>(msg.blocks.size()));
          for (const auto& b : msg.blocks) put_block(w, *b);
          put_qc(w, msg.cert);
        }
      },
      m);
}

Message get_body(ByteReader& r) {
  switch (static_cast<Tag>(r.u8())) {
    case Tag::kPbftPrePrepare: {
      PbftPrePrepare m;
      m.view = r.u64();
      m.height = r.u64();
      m.block = get_block(r);
      m.sig = r.fixed<64>();
      return m;
    }
    case Tag::kPbftVote: {
      PbftVote m;
      m.view = r.u64();
      m.height = r.u64();
      m.hash = r.digest();
      m.phase = get_phase(r);
      m.sig = r.fixed<64>();
      return m;
    }
    case Tag::kPbftViewChange:
      return get_view_change(r);
    case Tag::kPbftNewView: {
      PbftNewView m;
      m.view = r.u64();
      auto count = r.count(100);
      for (std::size_t i = 0; i < count; ++i) m.proofs.push_back(get_view_change(r));
      if (r.u8() != 0) m.block = get_block(r);
      m.sig = r.fixed<64>();
      return m;
    }
    case Tag::kHsProposal: {
      HsProposal m;
      m.view = r.u64();
      m.block = get_block(r);
      m.justify = get_qc(r);
      return m;
    }
    case Tag::kHsVote: {
      HsVote m;
      m.view = r.u64();
      m.phase = get_phase(r);
      m.hash = r.digest();
      m.sig = r.fixed<64>();
      return m;
    }
    case Tag::kHsCert: {
      HsCert m;
      m.view = r.u64();
      m.qc = get_qc(r);
      return m;
    }
    case Tag::kHsNewView: {
      HsNewView m;
      m.view = r.u64();
      m.qc = get_qc(r);
      return m;
    }
    case Tag::kSyncRequest:
      return SyncRequest{r.u64()};
    case Tag::kSyncResponse: {
      SyncResponse m;
      auto count = r.count(60);
      for (std::size_t i = 0; i < count; ++i) m.blocks.push_back(get_block(r));
      m.cert = get_qc(r);
      return m;
    }
  }
  throw DecodeError("unknown message tag");
}

}  // namespace

Bytes view_change_message(const PbftViewChange& vc) {
  ByteWriter w(64);
  w.raw(ByteSpan{reinterpret_cast<const std::uint8_t*>("dcs-viewchange"), 14});
  w.u64(vc.target);
  w.u64(vc.committed);
  w.u32(vc.sender);
  w.u32(static_cast<std::uint32_t>(vc.prepared.size()));
  for (const auto& p : vc.prepared) {
    w.digest(p.qc.block_hash);
    w.u64(p.qc.view);
    w.u64(p.block->height);
  }
  return std::move(w).take();
}

net::MsgClass message_class(const Message& m) {
  return std::visit(
      [](const auto& msg) {
        using T = std::decay_t<decltype(msg)>;
        if constexpr (std::is_same_v<T, PbftPrePrepare> || std::is_same_v<T, HsProposal>) {
          return net::MsgClass::kProposal;
        } else if constexpr (std::is_same_v<T, PbftVote> || std::is_same_v<T, HsVote>) {
          return net::MsgClass::kVote;
        } else if constexpr (std::is_same_v<T, HsCert>) {
          return net::MsgClass::kCertificate;
        } else if constexpr (std::is_same_v<T, SyncRequest> || std::is_same_v<T, SyncResponse>) {
          return net::MsgClass::kSync;
        } else {
          return net::MsgClass::kViewChange;
        }
      },
      m);
}

namespace {

std::uint64_t view_change_size(const PbftViewChange& vc, const SizeModel& s) {
  std::uint64_t size = s.bytes.hash + s.auth.sig_bytes;
  for (const auto& p : vc.prepared) size += s.block_body(*p.block) + s.qc(p.qc);
  return size;
}

}  // namespace

std::uint64_t model_size(const Message& m, const SizeModel& s) {
  const std::uint64_t header = s.bytes.header;
  const std::uint64_t sig = s.auth.sig_bytes;
  return header + std::visit(
                      [&](const auto& msg) -> std::uint64_t {
                        using T = std::decay_t<decltype(msg)>;
                        if constexpr (std::is_same_v<T, PbftPrePrepare>) {
                          return s.block_body(*msg.block) + sig;
                        } else if constexpr (std::is_same_v<T, PbftVote> ||
                                             std::is_same_v<T, HsVote>) {
                          return s.bytes.hash + sig;
                        } else if constexpr (std::is_same_v<T, PbftViewChange>) {
                          return view_change_size(msg, s);
                        } else if constexpr (std::is_same_v<T, PbftNewView>) {
                          std::uint64_t size = s.bytes.hash + sig;
                          for (const auto& vc : msg.proofs) size += view_change_size(vc, s);
                          if (msg.block) size += s.block_body(*msg.block);
                          return size;
                        } else if constexpr (std::is_same_v<T, HsProposal>) {
                          return s.block_body(*msg.block) + s.qc(msg.justify);
                        } else if constexpr (std::is_same_v<T, HsCert> ||
                                             std::is_same_v<T, HsNewView>) {
                          return s.bytes.hash + s.qc(msg.qc);
                        } else if constexpr (std::is_same_v<T, SyncRequest>) {
                          return 8;
                        } else {
                          std::uint64_t size = s.qc(msg.cert);
                          for (const auto& b : msg.blocks) size += s.block_body(*b);
                          return size;
                        }
                      },
                      m);
}

net::Payload encode(const Envelope& env, const SizeModel& model) {
  ByteWriter w(256);
  w.u8(kMagic);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(env.protocol));
  w.u32(env.era);
  put_body(w, env.body);
  net::Payload p;
  p.bytes = std::make_shared<const Bytes>(std::move(w).take());
  p.size_bytes = static_cast<std::uint32_t>(model_size(env.body, model));
  p.cls = message_class(env.body);
  return p;
}

std::optional<EnvelopeTag> peek(ByteSpan bytes) {
  try {
    ByteReader r(bytes);
    if (r.u8() != kMagic || r.u8() != kVersion) return std::nullopt;
    auto proto = r.u8();
    if (proto < 1 || proto > 3) return std::nullopt;
    return EnvelopeTag{static_cast<Protocol>(proto), r.u32()};
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

std::optional<Envelope> decode(ByteSpan bytes) {
  auto tag = peek(bytes);
  if (!tag) return std::nullopt;
  try {
    ByteReader r(bytes.subspan(7));
    Envelope env{tag->protocol, tag->era, get_body(r)};
    if (!r.done()) return std::nullopt;
    return env;
  } catch (const DecodeError&) {
    return std::nullopt;
  }
}

}  // namespace dcs::consensus
