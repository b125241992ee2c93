#include <benchmark/benchmark.h>

#include <memory>
#include <vector>

#include "dcs/consensus/messages.hpp"
#include "dcs/crypto.hpp"
#include "dcs/harness/simulation.hpp"
#include "dcs/netsim.hpp"

namespace {

using namespace dcs;

void BM_Sha256(benchmark::State& state) {
  Bytes data(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(sha256(data));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(64)->Arg(4096);

void BM_HashBlock(benchmark::State& state) {
  std::vector<Transaction> txs;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    txs.push_back(make_transaction(static_cast<std::uint64_t>(i), Bytes(32, 1), 0));
  }
  BlockHeader h{genesis_block()->hash, 1, 0, 0};
  for (auto _ : state) benchmark::DoNotOptimize(hash_block(h, txs));
}
BENCHMARK(BM_HashBlock)->Arg(1)->Arg(64)->Arg(1024);

void BM_Sign(benchmark::State& state) {
  auto kp = keygen(master_seed_from(1), 0);
  auto msg = vote_message(genesis_block()->hash, 3, Phase::kHsPrepare);
  for (auto _ : state) benchmark::DoNotOptimize(sign(kp.secret, msg));
}
BENCHMARK(BM_Sign);

void BM_Verify(benchmark::State& state) {
  auto kp = keygen(master_seed_from(1), 0);
  auto msg = vote_message(genesis_block()->hash, 3, Phase::kHsPrepare);
  auto sig = sign(kp.secret, msg);
  for (auto _ : state) benchmark::DoNotOptimize(verify(kp.public_key, msg, sig));
}
BENCHMARK(BM_Verify);

void BM_AssembleQc(benchmark::State& state) {
  auto n = static_cast<std::uint32_t>(state.range(0));
  auto prov = PublicKeyRegistry::provision(master_seed_from(1), n, n);
  auto config = make_config(n, Protocol::kHotstuff, 1);
  std::vector<SignerEntry> votes;
  auto hash = genesis_block()->hash;
  for (NodeId i = 0; i < quorum_size(config); ++i) {
    votes.push_back({i, sign(prov.keys[i].secret, vote_message(hash, 1, Phase::kHsPrepare))});
  }
  for (auto _ : state) {
    // A fresh verifier each time so the memo does not hide the signature checks.
    SignatureVerifier verifier(prov.registry);
    benchmark::DoNotOptimize(assemble_qc(votes, hash, 1, Phase::kHsPrepare, config, verifier));
  }
}
BENCHMARK(BM_AssembleQc)->Arg(4)->Arg(13);

class NullSink : public net::EventSink {
 public:
  void on_deliver(const net::NetMessage&, SimTime) override {}
  void on_timer(NodeId, net::TimerId, SimTime) override {}
  void on_inject(const Transaction&, SimTime) override {}
};

void BM_NetworkDispatch(benchmark::State& state) {
  auto payload = net::Payload{std::make_shared<const Bytes>(Bytes(160, 0)), 160, net::MsgClass::kVote};
  for (auto _ : state) {
    net::Network network(16, 7);
    network.set_default_link({.base_latency_ms = 10, .jitter_ms = 5, .bandwidth_bytes_per_ms = 1000});
    for (SimTime t = 0; t < 100; ++t) {
      for (NodeId from = 0; from < 16; ++from) network.send(from, (from + t + 1) % 16, payload, t);
    }
    NullSink sink;
    benchmark::DoNotOptimize(network.run_until(10'000, sink));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 1600);
}
BENCHMARK(BM_NetworkDispatch);

void BM_Simulation(benchmark::State& state) {
  harness::Scenario s;
  s.knobs = {static_cast<std::uint32_t>(state.range(0)), static_cast<Protocol>(state.range(1)), 16};
  s.max_nodes = s.knobs.n;
  s.epoch_len = 20;
  s.epochs = 2;
  s.link = {.base_latency_ms = 10, .jitter_ms = 2, .bandwidth_bytes_per_ms = 10'000};
  s.load.mode = harness::LoadMode::kSaturated;
  std::uint64_t blocks = 0;
  for (auto _ : state) blocks += harness::run_scenario(s).chain.size() - 1;
  state.counters["blocks/s"] = benchmark::Counter(static_cast<double>(blocks), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Simulation)
    ->ArgsProduct({{4, 13},
                   {static_cast<int>(Protocol::kPbft), static_cast<int>(Protocol::kHotstuff),
                    static_cast<int>(Protocol::kHotstuff2)}})
    ->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
