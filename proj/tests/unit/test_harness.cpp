#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dcs/harness/commands.hpp"
#include "dcs/harness/scenario.hpp"
#include "dcs/harness/simulation.hpp"
#include "json.hpp"

namespace dcs::harness {
namespace {

namespace fs = std::filesystem;
using control::Knobs;

const fs::path kData = DCS_TEST_DATA_DIR;

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("dcs-test-" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "-" +
             std::to_string(counter++) + "-" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) {
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

Scenario base_scenario() {
  Scenario s;
  s.seed = 9;
  s.knobs = {4, Protocol::kPbft, 4};
  s.max_nodes = 7;
  s.epoch_len = 10;
  s.epochs = 3;
  s.run_limit_ms = 30000;
  s.link = {.base_latency_ms = 5, .jitter_ms = 2, .bandwidth_bytes_per_ms = 10000};
  s.load.mode = LoadMode::kSaturated;
  s.load.depth = 2;
  return s;
}

// --- scenario format ---------------------------------------------------------------

TEST(Scenario, MinimalDefaults) {
  auto s = parse_scenario(slurp(kData / "minimal.json"));
  EXPECT_EQ(s.seed, 7u);
  EXPECT_EQ(s.knobs, (Knobs{4, Protocol::kPbft, 1}));
  EXPECT_EQ(s.epochs, 1u);
  EXPECT_EQ(s.load.mode, LoadMode::kOpen);
  EXPECT_EQ(s.load.max_txs, 1u);
  EXPECT_NO_THROW(validate(s));
}

TEST(Scenario, CanonicalRoundTrip) {
  for (const char* name : {"minimal.json", "desk_grid.json", "small_run.json", "conflict_hook.json"}) {
    auto s = parse_scenario(slurp(kData / name));
    auto text = scenario_to_json(s);
    EXPECT_EQ(scenario_to_json(parse_scenario(text)), text) << name;
  }
}

TEST(Scenario, CommentsAllowed) {
  auto s = parse_scenario(slurp(kData / "desk_grid.json"));
  ASSERT_TRUE(s.controller.grid.has_value());
  EXPECT_EQ(s.controller.grid->size(), 12u);
  EXPECT_EQ(s.controller.policy, control::PolicyKind::kGreedy);
}

TEST(Scenario, UnknownKeyNamesPath) {
  try {
    parse_scenario(R"({"load": {"mode": "open", "rate": 5}})");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("load.rate"), std::string::npos) << e.what();
  }
}

TEST(Scenario, SyntaxErrorNamesLine) {
  try {
    parse_scenario("{\n  \"seed\": 1,\n  \"epochs\": ,\n}");
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Scenario, BadValues) {
  EXPECT_THROW(parse_scenario(R"({"knobs": {"protocol": "raft"}})"), ScenarioError);
  EXPECT_THROW(parse_scenario(R"({"seed": -1})"), ScenarioError);
  EXPECT_THROW(parse_scenario(R"({"epochs": "ten"})"), ScenarioError);
  EXPECT_THROW(parse_scenario(R"({"load": {"mode": "bursty"}})"), ScenarioError);
  EXPECT_THROW(parse_scenario(R"([1, 2])"), ScenarioError);
}

TEST(Scenario, ValidationRejectsTooManyFaults) {
  try {
    parse_scenario(slurp(kData / "too_many_faults.json"));
    FAIL();
  } catch (const ScenarioError& e) {
    EXPECT_NE(std::string(e.what()).find("fault bound"), std::string::npos) << e.what();
  }
  auto s = base_scenario();
  s.faults.crashes = {{1, 100}, {2, 200}};
  EXPECT_EQ(faulty_nodes(s), (std::vector<NodeId>{1, 2}));
  EXPECT_THROW(validate(s), ScenarioError);
}

TEST(Scenario, ValidationCases) {
  auto ok = base_scenario();
  EXPECT_NO_THROW(validate(ok));
  auto s = ok;
  s.knobs.n = 10;  // beyond max_nodes
  EXPECT_THROW(validate(s), ScenarioError);
  s = ok;
  s.faults.crashes = {{4, 10}};  // not a member
  EXPECT_THROW(validate(s), ScenarioError);
  s = ok;
  s.faults.partitions = {{{0, 1}, {1, 2}, 0, 10}};
  EXPECT_THROW(validate(s), ScenarioError);
  s = ok;
  s.faults.partitions = {{{0}, {1}, 20, 10}};
  EXPECT_THROW(validate(s), ScenarioError);
  s = ok;
  s.link.bandwidth_bytes_per_ms = 0;
  EXPECT_THROW(validate(s), ScenarioError);
  s = ok;
  s.faults.equivocations = {{1}};
  s.faults.crashes = {{1, 0}};  // the same node: one fault
  EXPECT_EQ(faulty_nodes(s), (std::vector<NodeId>{1}));
  EXPECT_NO_THROW(validate(s));
  s.faults.crashes = {{2, 0}};
  EXPECT_THROW(validate(s), ScenarioError);
}

TEST(Grid, ParseSpec) {
  Knobs base{4, Protocol::kHotstuff, 8};
  auto g = parse_grid("n=7,4;protocol=pbft,hotstuff;batch=1,16", base);
  EXPECT_EQ(g.n_values, (std::vector<std::uint32_t>{4, 7}));
  EXPECT_EQ(g.protocols, (std::vector<Protocol>{Protocol::kPbft, Protocol::kHotstuff}));
  EXPECT_EQ(g.size(), 8u);
  auto partial = parse_grid("protocols=pbft,hotstuff,hotstuff2", base);
  EXPECT_EQ(partial.n_values, (std::vector<std::uint32_t>{4}));
  EXPECT_EQ(partial.batch_values, (std::vector<std::uint32_t>{8}));
  EXPECT_EQ(partial.size(), 3u);
  EXPECT_THROW(parse_grid("n=3", base), ScenarioError);
  EXPECT_THROW(parse_grid("colour=red", base), ScenarioError);
  EXPECT_THROW(parse_grid("batch=0", base), ScenarioError);
  EXPECT_THROW(parse_grid("n", base), ScenarioError);
}

// --- safety oracle ------------------------------------------------------------------

TEST(Oracle, DetectsDisagreement) {
  SafetyOracle o;
  auto a = sha256("a"), b = sha256("b");
  o.observe(0, 1, a);
  o.observe(1, 1, a);
  EXPECT_EQ(*o.at(1), a);
  EXPECT_EQ(o.at(2), nullptr);
  try {
    o.observe(2, 1, b);
    FAIL();
  } catch (const SafetyViolation& e) {
    EXPECT_EQ(e.height(), 1u);
  }
  EXPECT_EQ(o.observations(), 3u);
}

// --- simulation -----------------------------------------------------------------------

TEST(Simulation, MinimalCommitsOneTransaction) {
  auto s = parse_scenario(slurp(kData / "minimal.json"));
  auto r = run_scenario(s);
  EXPECT_EQ(r.load_injected, 1u);
  EXPECT_EQ(r.load_committed, 1u);
  ASSERT_GE(r.chain.size(), 2u);
  EXPECT_EQ(r.chain[0]->hash, genesis_block()->hash);
  for (std::size_t h = 1; h < r.chain.size(); ++h) EXPECT_TRUE(extends(*r.chain[h], *r.chain[h - 1]));
  EXPECT_GT(r.oracle_observations, 0u);
}

TEST(Simulation, Deterministic) {
  auto s = base_scenario();
  auto a = run_scenario(s);
  auto b = run_scenario(s);
  EXPECT_EQ(a.report.trace_hash, b.report.trace_hash);
  EXPECT_EQ(a.report.to_json(), b.report.to_json());
  EXPECT_EQ(epochs_jsonl(a), epochs_jsonl(b));
  s.seed = 10;
  EXPECT_NE(run_scenario(s).report.trace_hash, a.report.trace_hash);
}

TEST(Simulation, StaticPolicyKeepsKnobs) {
  auto s = base_scenario();
  auto r = run_adaptive(s);
  ASSERT_EQ(r.epochs.size(), 3u);
  for (const auto& e : r.epochs) {
    EXPECT_EQ(e.knobs, s.knobs);
    EXPECT_FALSE(e.partial);
    EXPECT_FALSE(e.next.has_value());
    EXPECT_EQ(e.last_height - e.first_height + 1, s.epoch_len);
  }
  EXPECT_TRUE(r.switches.empty());
  EXPECT_EQ(r.final_knobs, s.knobs);
}

TEST(Simulation, EpochScoresFollowFormulas) {
  auto r = run_adaptive(base_scenario());
  for (const auto& e : r.epochs) {
    auto expect = metrics::scores(e.window, 10.0);
    EXPECT_DOUBLE_EQ(e.scores.d, expect.d);
    EXPECT_DOUBLE_EQ(e.scores.c, expect.c);
    EXPECT_DOUBLE_EQ(e.scores.s, expect.s);
    EXPECT_DOUBLE_EQ(e.scores.d, 0.75);
    EXPECT_GT(e.window.throughput_tps, 0.0);
    EXPECT_GT(e.window.messages, 0u);
  }
}

Scenario sweep_over(control::CandidateSpace grid) {
  auto s = base_scenario();
  s.controller.policy = control::PolicyKind::kSweep;
  s.controller.grid = std::move(grid);
  s.knobs = s.controller.grid->enumerate().front();
  s.epochs = static_cast<std::uint32_t>(s.controller.grid->size());
  return s;
}

TEST(Simulation, BatchSwitchTakesEffectAboveSwitchHeight) {
  auto s = sweep_over({{4}, {Protocol::kPbft}, {4, 8}});
  auto r = run_adaptive(s);
  ASSERT_EQ(r.switches.size(), 1u);
  const auto& sw = r.switches[0];
  EXPECT_EQ(sw.from.batch, 4u);
  EXPECT_EQ(sw.to.batch, 8u);
  EXPECT_EQ(sw.era, 0u);  // batch changes keep the engines
  std::size_t max_after = 0;
  for (Height h = 1; h < r.chain.size(); ++h) {
    auto load = std::count_if(r.chain[h]->txs.begin(), r.chain[h]->txs.end(),
                              [](const auto& t) { return t.client != kReconfigClient; });
    std::size_t size = r.chain[h]->txs.size();
    if (h <= sw.height) {
      EXPECT_LE(size, 4u) << h;
    } else {
      EXPECT_LE(size, 8u) << h;
      max_after = std::max<std::size_t>(max_after, static_cast<std::size_t>(load));
    }
  }
  EXPECT_GT(max_after, 4u);
  ASSERT_EQ(r.epochs.size(), 2u);
  EXPECT_EQ(r.epochs[1].knobs.batch, 8u);
}

TEST(Simulation, ProtocolSwitchPreservesPrefix) {
  auto s = sweep_over({{4}, {Protocol::kPbft, Protocol::kHotstuff, Protocol::kHotstuff2}, {4}});
  auto r = run_adaptive(s);
  ASSERT_EQ(r.switches.size(), 2u);
  EXPECT_EQ(r.switches[0].to.protocol, Protocol::kHotstuff);
  EXPECT_EQ(r.switches[1].to.protocol, Protocol::kHotstuff2);
  EXPECT_EQ(r.switches[1].era, 1u);
  ASSERT_EQ(r.epochs.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(r.epochs[i].knobs.protocol, s.controller.grid->protocols[i]);
  for (std::size_t h = 1; h < r.chain.size(); ++h) EXPECT_TRUE(extends(*r.chain[h], *r.chain[h - 1]));
  // Every load transaction is committed at most once across the switches.
  std::set<Digest> ids;
  for (const auto& b : r.chain) {
    for (const auto& t : b->txs) EXPECT_TRUE(ids.insert(t.id).second);
  }
}

TEST(Simulation, GrowingMembershipRaisesDecentralization) {
  auto s = sweep_over({{4, 7}, {Protocol::kHotstuff}, {4}});
  auto r = run_adaptive(s);
  ASSERT_EQ(r.switches.size(), 1u);
  EXPECT_EQ(r.switches[0].to.n, 7u);
  ASSERT_EQ(r.epochs.size(), 2u);
  EXPECT_DOUBLE_EQ(r.epochs[0].scores.d, 0.75);
  EXPECT_DOUBLE_EQ(r.epochs[1].scores.d, 1.0 - 1.0 / 7.0);
  EXPECT_EQ(r.epochs[1].window.n, 7u);
}

TEST(Simulation, ShrinkingMembership) {
  auto s = sweep_over({{4, 7}, {Protocol::kPbft}, {4}});
  s.knobs = {7, Protocol::kPbft, 4};
  s.controller.policy = control::PolicyKind::kGreedy;
  s.epochs = 4;
  auto r = run_adaptive(s);
  ASSERT_FALSE(r.switches.empty());
  EXPECT_EQ(r.switches[0].to.n, 4u);
  EXPECT_EQ(r.epochs[1].window.n, 4u);
}

TEST(Simulation, MoveBeyondProvisionedNodesRejected) {
  auto s = sweep_over({{4, 10}, {Protocol::kPbft}, {4}});
  s.max_nodes = 7;
  s.epochs = 2;
  auto r = run_adaptive(s);
  EXPECT_TRUE(r.switches.empty());
  ASSERT_FALSE(r.epochs.empty());
  ASSERT_EQ(r.epochs[0].rejected.size(), 1u);
  EXPECT_EQ(r.epochs[0].rejected[0].knobs.n, 10u);
  EXPECT_NE(r.epochs[0].rejected[0].reason.find("NoStandbyNodes"), std::string::npos);
}

TEST(Simulation, CrashFaultsKeepSafetyAndLiveness) {
  for (auto p : {Protocol::kPbft, Protocol::kHotstuff, Protocol::kHotstuff2}) {
    auto s = base_scenario();
    s.knobs = {7, p, 4};
    s.faults.crashes = {{0, 150}, {4, 700}};
    auto r = run_scenario(s);
    EXPECT_EQ(r.epochs.size(), 3u) << protocol_name(p);
    EXPECT_GT(r.engine_stats.view_changes, 0u) << protocol_name(p);
  }
}

TEST(Simulation, EquivocatingLeaderIsHarmless) {
  for (auto p : {Protocol::kPbft, Protocol::kHotstuff, Protocol::kHotstuff2}) {
    auto s = base_scenario();
    s.knobs = {4, p, 4};
    s.faults.equivocations = {{0}};
    s.epochs = 2;
    auto r = run_scenario(s);
    EXPECT_EQ(r.epochs.size(), 2u) << protocol_name(p);
  }
}

TEST(Simulation, PartitionHeals) {
  auto s = base_scenario();
  s.knobs = {4, Protocol::kHotstuff2, 4};
  s.faults.partitions = {{{0, 1}, {2, 3}, 100, 1500}};
  auto r = run_scenario(s);
  EXPECT_EQ(r.epochs.size(), 3u);
  EXPECT_GT(r.report.counters.dropped_partition, 0u);
}

TEST(Simulation, ForcedConflictIsCaught) {
  auto s = parse_scenario(slurp(kData / "conflict_hook.json"));
  EXPECT_THROW(run_scenario(s), SafetyViolation);
}

TEST(Simulation, EngineParamsDerivedFromTopology) {
  auto s = base_scenario();
  auto p = engine_params(s, 4);
  EXPECT_GT(p.base_timeout_ms, 4u * (5 + 2));
  EXPECT_EQ(p.max_timeout_ms, 8 * p.base_timeout_ms);
  EXPECT_EQ(p.wait_delta_ms, 10u);
  s.consensus.base_timeout_ms = 123;
  s.consensus.wait_delta_ms = 7;
  p = engine_params(s, 4);
  EXPECT_EQ(p.base_timeout_ms, 123u);
  EXPECT_EQ(p.wait_delta_ms, 7u);
}

// --- output documents ----------------------------------------------------------------

TEST(Outputs, EpochsJsonlSchema) {
  auto r = run_adaptive(base_scenario());
  auto ls = lines(epochs_jsonl(r));
  ASSERT_EQ(ls.size(), 3u);
  auto j = nlohmann::json::parse(ls[0]);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"batch", "bytes", "c", "d", "epoch", "msgs", "n",
                                            "protocol", "s", "t_sec", "theta_tps"}));
  EXPECT_EQ(j["n"], 4);
  EXPECT_EQ(j["protocol"], "pbft");
}

TEST(Outputs, SummaryOneRowPerKnobs) {
  auto s = sweep_over({{4}, {Protocol::kPbft, Protocol::kHotstuff}, {4}});
  auto r = run_adaptive(s);
  auto rows = summarize(r, s);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].knobs.protocol, Protocol::kPbft);
  EXPECT_EQ(rows[1].knobs.protocol, Protocol::kHotstuff);
  auto csv = lines(summary_csv(rows));
  EXPECT_EQ(csv.size(), 3u);
}

// --- commands -------------------------------------------------------------------------

struct Cli {
  int code = 0;
  std::string out;
  std::string err;
};

Cli run_cmd(const fs::path& config, const fs::path& out_dir, Overrides o = {}) {
  RunOptions opts{config, out_dir, o, 1};
  std::ostringstream out, err;
  int code = cmd_run(opts, out, err);
  return {code, out.str(), err.str()};
}

TEST(Commands, RunMinimal) {
  TempDir tmp;
  auto c = run_cmd(kData / "minimal.json", tmp.path());
  ASSERT_EQ(c.code, kExitOk) << c.err;
  auto ep = lines(slurp(tmp.path() / "epochs.jsonl"));
  ASSERT_EQ(ep.size(), 1u);
  auto history = lines(slurp(tmp.path() / "history.jsonl"));
  EXPECT_EQ(history.size(), 1u);
  EXPECT_TRUE(fs::exists(tmp.path() / "summary.csv"));
  EXPECT_TRUE(fs::exists(tmp.path() / "trace.json"));
  EXPECT_NE(c.out.find("trace hash"), std::string::npos);
}

TEST(Commands, RunRejectsTooManyFaults) {
  TempDir tmp;
  auto c = run_cmd(kData / "too_many_faults.json", tmp.path());
  EXPECT_EQ(c.code, kExitConfig);
  EXPECT_FALSE(c.err.empty());
}

TEST(Commands, RunMissingConfig) {
  TempDir tmp;
  EXPECT_EQ(run_cmd(kData / "nope.json", tmp.path()).code, kExitConfig);
}

TEST(Commands, RunSafetyHook) {
  TempDir tmp;
  auto c = run_cmd(kData / "conflict_hook.json", tmp.path());
  EXPECT_EQ(c.code, kExitSafety);
  EXPECT_NE(c.err.find("SAFETY"), std::string::npos);
}

TEST(Commands, SeedOverrideChangesTrace) {
  TempDir a, b;
  ASSERT_EQ(run_cmd(kData / "small_run.json", a.path()).code, 0);
  ASSERT_EQ(run_cmd(kData / "small_run.json", b.path(), Overrides{.seed = 99}).code, 0);
  auto ja = nlohmann::json::parse(slurp(a.path() / "trace.json"));
  auto jb = nlohmann::json::parse(slurp(b.path() / "trace.json"));
  EXPECT_NE(ja["trace_hash"], jb["trace_hash"]);
  EXPECT_EQ(jb["scenario"]["seed"], 99);
}

TEST(Commands, ReplayRoundTripAndTamper) {
  TempDir tmp;
  ASSERT_EQ(run_cmd(kData / "small_run.json", tmp.path()).code, 0);
  std::ostringstream out, err;
  auto trace = tmp.path() / "trace.json";
  EXPECT_EQ(cmd_replay(trace, out, err), kExitOk) << err.str();

  auto text = slurp(trace);
  auto pos = text.find("\"trace_hash\": \"") + 15;
  text[pos] = text[pos] == '0' ? '1' : '0';
  auto tampered = tmp.path() / "tampered.json";
  spit(tampered, text);
  EXPECT_EQ(cmd_replay(tampered, out, err), kExitReplayMismatch);

  spit(tampered, "{not json");
  EXPECT_EQ(cmd_replay(tampered, out, err), kExitReplayMismatch);
  EXPECT_EQ(cmd_replay(tmp.path() / "missing.json", out, err), kExitConfig);
}

TEST(Commands, ReportValidatesScores) {
  TempDir tmp;
  ASSERT_EQ(run_cmd(kData / "small_run.json", tmp.path()).code, 0);
  auto epochs = tmp.path() / "epochs.jsonl";
  std::ostringstream out, err;
  EXPECT_EQ(cmd_report(epochs, std::nullopt, out, err), kExitOk) << err.str();
  EXPECT_NE(out.str().find("theta"), std::string::npos);

  auto ls = lines(slurp(epochs));
  auto j = nlohmann::json::parse(ls[0]);
  j["d"] = j["d"].get<double>() + 0.001;
  ls[0] = j.dump();
  std::string edited;
  for (const auto& l : ls) edited += l + "\n";
  auto bad = tmp.path() / "bad.jsonl";
  spit(bad, edited);
  EXPECT_EQ(cmd_report(bad, std::nullopt, out, err), kExitReportMismatch);

  auto empty = tmp.path() / "empty.jsonl";
  spit(empty, "");
  std::ostringstream out2;
  EXPECT_EQ(cmd_report(empty, std::nullopt, out2, err), kExitOk);

  spit(bad, "{\"epoch\": 0\n");
  EXPECT_EQ(cmd_report(bad, std::nullopt, out, err), kExitConfig);
}

TEST(Commands, SweepCardinalityAndDeterminism) {
  TempDir a, b;
  auto opts = RunOptions{kData / "small_run.json", a.path(),
                         Overrides{.epochs = 1, .grid = "n=4,7;protocol=pbft,hotstuff,hotstuff2;batch=1,16"}, 2};
  std::ostringstream out, err;
  ASSERT_EQ(cmd_sweep(opts, out, err), kExitOk) << err.str();
  auto rows = lines(slurp(a.path() / "sweep.csv"));
  EXPECT_EQ(rows.size(), 13u);  // header + 12
  EXPECT_NE(out.str().find("argmax"), std::string::npos);
  opts.out_dir = b.path();
  opts.jobs = 1;
  ASSERT_EQ(cmd_sweep(opts, out, err), kExitOk);
  EXPECT_EQ(slurp(a.path() / "sweep.csv"), slurp(b.path() / "sweep.csv"));
}

TEST(Commands, SweepNeedsGrid) {
  TempDir tmp;
  std::ostringstream out, err;
  EXPECT_EQ(cmd_sweep(RunOptions{kData / "minimal.json", tmp.path(), {}, 1}, out, err), kExitConfig);
}

TEST(Cli, BinaryExitCodes) {
  TempDir tmp;
  auto run = [&](const std::string& args) {
    auto cmd = std::string(DCS_CLI_PATH) + " " + args + " > " + (tmp.path() / "log").string() + " 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };
  auto out = tmp.path() / "o";
  EXPECT_EQ(run("run --config " + (kData / "minimal.json").string() + " --out " + out.string()), 0);
  EXPECT_EQ(run("replay " + (out / "trace.json").string()), 0);
  EXPECT_EQ(run("report " + (out / "epochs.jsonl").string()), 0);
  EXPECT_EQ(run("run --config " + (kData / "too_many_faults.json").string() + " --out " + out.string()), 1);
  EXPECT_EQ(run("run --config " + (kData / "conflict_hook.json").string() + " --out " + out.string()), 2);
  EXPECT_EQ(run("run --config " + (kData / "minimal.json").string() + " --policy bogus"), 1);
  EXPECT_EQ(run("frobnicate"), 1);
}

}  // namespace
}  // namespace dcs::harness
