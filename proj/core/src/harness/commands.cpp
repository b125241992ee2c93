#include "dcs/harness/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace dcs::harness {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::optional<std::string> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ojson knobs_json(const control::Knobs& k) {
  ojson j;
  j["protocol"] = std::string(protocol_name(k.protocol));
  j["n"] = k.n;
  j["batch"] = k.batch;
  return j;
}

std::string fmt_double(double x) {
  std::ostringstream ss;
  ss << std::setprecision(17) << x;
  return ss.str();
}

std::string fixed(double x, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << x;
  return ss.str();
}

std::optional<std::uint64_t> env_seed(std::ostream& err) {
  const char* v = std::getenv("DCS_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    auto seed = std::stoull(v, &used);
    if (used == std::string_view(v).size()) return seed;
  } catch (const std::exception&) {
  }
  err << "warning: ignoring malformed DCS_SEED='" << v << "'\n";
  return std::nullopt;
}

}  // namespace

void apply_overrides(Scenario& s, const Overrides& o) {
  if (o.seed) s.seed = *o.seed;
  if (o.epochs) {
    if (*o.epochs == 0) throw ScenarioError("--epochs must be positive");
    s.epochs = *o.epochs;
  }
  if (o.policy) s.controller.policy = *o.policy;
  if (o.log_base) {
    if (!(*o.log_base > 1.0)) throw ScenarioError("--log-base must exceed 1");
    s.log_base = *o.log_base;
  }
  if (o.grid) s.controller.grid = parse_grid(*o.grid, s.knobs);
  validate(s);
}

Scenario load_scenario(const fs::path& path, const Overrides& overrides) {
  auto text = read_file(path);
  if (!text) throw ScenarioError("cannot read " + path.string());
  Scenario s;
  try {
    s = parse_scenario(*text);
  } catch (const ScenarioError& e) {
    throw ScenarioError(path.string() + ": " + e.what());
  }
  apply_overrides(s, overrides);
  return s;
}

// --- output formats ---------------------------------------------------------------

std::vector<SummaryRow> summarize(const RunResult& r, const Scenario& s) {
  bool any_full = std::ranges::any_of(r.epochs, [](const EpochRecord& e) { return !e.partial; });
  struct Acc {
    SummaryRow row;
    double theta_sum = 0;
    double t_sum = 0;
    std::uint64_t t_count = 0;
    std::uint64_t msgs = 0;
    std::uint64_t bytes = 0;
    std::uint64_t blocks = 0;
  };
  std::vector<Acc> acc;
  for (const auto& e : r.epochs) {
    if (any_full && e.partial) continue;
    auto it = std::ranges::find_if(acc, [&](const Acc& a) { return a.row.knobs == e.knobs; });
    if (it == acc.end()) {
      acc.push_back({});
      acc.back().row.knobs = e.knobs;
      it = acc.end() - 1;
    }
    ++it->row.epochs;
    it->theta_sum += e.window.throughput_tps;
    if (e.window.mean_latency_sec) {
      it->t_sum += *e.window.mean_latency_sec;
      ++it->t_count;
    }
    it->msgs += e.window.messages;
    it->bytes += e.window.bytes;
    it->blocks += e.window.blocks;
  }
  std::vector<SummaryRow> rows;
  for (auto& a : acc) {
    auto& row = a.row;
    row.mean_theta = a.theta_sum / static_cast<double>(row.epochs);
    if (a.t_count > 0) row.mean_t = a.t_sum / static_cast<double>(a.t_count);
    row.scores = metrics::scores(row.knobs.n, row.mean_t, row.mean_theta, s.log_base);
    row.score = control::score(row.scores, s.controller.objective);
    if (a.blocks > 0) {
      row.msgs_per_block = static_cast<double>(a.msgs) / static_cast<double>(a.blocks);
      row.bytes_per_block = static_cast<double>(a.bytes) / static_cast<double>(a.blocks);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string epochs_jsonl(const RunResult& r) {
  std::string out;
  for (const auto& e : r.epochs) {
    ojson j;
    j["epoch"] = e.window.epoch;
    j["n"] = e.knobs.n;
    j["t_sec"] = e.window.mean_latency_sec ? ojson(*e.window.mean_latency_sec) : ojson(nullptr);
    j["theta_tps"] = e.window.throughput_tps;
    j["d"] = e.scores.d;
    j["c"] = e.scores.c;
    j["s"] = e.scores.s;
    j["msgs"] = e.window.messages;
    j["bytes"] = e.window.bytes;
    j["protocol"] = std::string(protocol_name(e.knobs.protocol));
    j["batch"] = e.knobs.batch;
    out += j.dump() + "\n";
  }
  return out;
}

std::string history_jsonl(const RunResult& r) {
  std::string out;
  for (const auto& e : r.epochs) {
    ojson j;
    j["epoch"] = e.window.epoch;
    j["knobs"] = knobs_json(e.knobs);
    j["window"] = {{"start_ms", e.window.start},
                   {"end_ms", e.window.end},
                   {"first_height", e.first_height},
                   {"last_height", e.last_height},
                   {"blocks", e.window.blocks},
                   {"txs", e.window.committed_txs}};
    j["partial"] = e.partial;
    j["d"] = e.scores.d;
    j["c"] = e.scores.c;
    j["s"] = e.scores.s;
    j["score"] = e.score;
    j["decision"] = e.partial ? "partial" : std::string(control::decision_name(e.decision));
    j["next"] = e.next ? knobs_json(*e.next) : ojson(nullptr);
    j["accepted"] = knobs_json(e.accepted);
    j["accepted_score"] = e.accepted_score;
    ojson rejected = ojson::array();
    for (const auto& m : e.rejected) {
      rejected.push_back({{"knobs", knobs_json(m.knobs)}, {"reason", m.reason}});
    }
    j["rejected"] = std::move(rejected);
    out += j.dump() + "\n";
  }
  return out;
}

std::string summary_csv(const std::vector<SummaryRow>& rows, bool with_index) {
  std::string out = with_index ? "index," : "";
  out += "protocol,n,batch,epochs,mean_theta,mean_t,d,c,s,score,msgs_per_block,bytes_per_block\n";
  std::size_t i = 0;
  for (const auto& r : rows) {
    if (with_index) out += std::to_string(i++) + ",";
    out += std::string(protocol_name(r.knobs.protocol)) + "," + std::to_string(r.knobs.n) + "," +
           std::to_string(r.knobs.batch) + "," + std::to_string(r.epochs) + "," +
           fmt_double(r.mean_theta) + "," + (r.mean_t ? fmt_double(*r.mean_t) : "") + "," +
           fmt_double(r.scores.d) + "," + fmt_double(r.scores.c) + "," +
           fmt_double(r.scores.s) + "," + fmt_double(r.score) + "," +
           fmt_double(r.msgs_per_block) + "," + fmt_double(r.bytes_per_block) + "\n";
  }
  return out;
}

std::string trace_json(const Scenario& s, const RunResult& r) {
  ojson j;
  j["format"] = "dcs-trace/1";
  j["scenario"] = ojson::parse(scenario_to_json(s));
  j["trace_hash"] = to_hex(r.report.trace_hash);
  j["committed_height"] = r.chain.size() - 1;
  j["chain_head"] = to_hex(r.chain.back()->hash);
  j["epochs"] = r.epochs.size();
  j["report"] = ojson::parse(r.report.to_json());
  return j.dump(2) + "\n";
}

// --- commands --------------------------------------------------------------------

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  Scenario s;
  try {
    auto o = opts.overrides;
    if (!o.seed) o.seed = env_seed(err);
    s = load_scenario(opts.config, o);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  RunResult r;
  try {
    r = run_adaptive(s);
  } catch (const SafetyViolation& e) {
    err << "SAFETY VIOLATION: " << e.what() << "\n";
    return kExitSafety;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    fs::create_directories(opts.out_dir);
    write_file(opts.out_dir / "epochs.jsonl", epochs_jsonl(r));
    write_file(opts.out_dir / "history.jsonl", history_jsonl(r));
    write_file(opts.out_dir / "summary.csv", summary_csv(summarize(r, s)));
    write_file(opts.out_dir / "trace.json", trace_json(s, r));
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << "\n";
    return kExitConfig;
  }

  out << "committed height " << r.chain.size() - 1 << ", " << r.load_committed << "/"
      << r.load_injected << " load txs, " << r.epochs.size() << " epochs, final knobs "
      << control::to_string(r.final_knobs) << "\n";
  out << "trace hash " << to_hex(r.report.trace_hash) << "\n";
  return kExitOk;
}

int cmd_sweep(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  Scenario base;
  try {
    auto o = opts.overrides;
    if (!o.seed) o.seed = env_seed(err);
    base = load_scenario(opts.config, o);
    if (!base.controller.grid) throw ScenarioError("sweep needs --grid or controller.grid");
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  auto points = base.controller.grid->enumerate();

  struct Outcome {
    int code = kExitOk;
    std::string message;
    SummaryRow row;
  };
  std::vector<Outcome> results(points.size());
  auto run_point = [&](std::size_t i) {
    auto& o = results[i];
    Scenario s = base;
    s.knobs = points[i];
    s.max_nodes = std::max(s.max_nodes, s.knobs.n);
    s.controller.policy = control::PolicyKind::kStatic;
    try {
      validate(s);
      auto r = run_scenario(s);
      auto rows = summarize(r, s);
      if (rows.empty()) {
        o.row.knobs = s.knobs;
        o.row.scores = metrics::scores(s.knobs.n, std::nullopt, 0.0, s.log_base);
        o.row.score = control::score(o.row.scores, s.controller.objective);
      } else {
        o.row = rows.front();
      }
    } catch (const SafetyViolation& e) {
      o.code = kExitSafety;
      o.message = e.what();
    } catch (const std::exception& e) {
      o.code = kExitConfig;
      o.message = e.what();
    }
  };

  unsigned workers = opts.jobs != 0 ? opts.jobs : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, static_cast<unsigned>(points.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i = 0;
          {
            std::lock_guard lock(mu);
            if (next >= points.size()) return;
            i = next++;
          }
          run_point(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].code != kExitOk) {
      err << "grid point " << i << " (" << control::to_string(points[i])
          << "): " << results[i].message << "\n";
      return results[i].code;
    }
  }

  std::vector<SummaryRow> rows;
  for (const auto& o : results) rows.push_back(o.row);
  try {
    fs::create_directories(opts.out_dir);
    write_file(opts.out_dir / "sweep.csv", summary_csv(rows, true));
  } catch (const std::exception& e) {
    err << "output error: " << e.what() << "\n";
    return kExitConfig;
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].score > rows[best].score) best = i;
  }
  out << rows.size() << " grid points written to " << (opts.out_dir / "sweep.csv").string()
      << "\n";
  out << "argmax " << best << ": " << control::to_string(rows[best].knobs) << " score "
      << fixed(rows[best].score, 6) << " (d=" << fixed(rows[best].scores.d, 4)
      << " c=" << fixed(rows[best].scores.c, 4) << " s=" << fixed(rows[best].scores.s, 4)
      << ")\n";
  return kExitOk;
}

int cmd_replay(const fs::path& trace, std::ostream& out, std::ostream& err) {
  auto text = read_file(trace);
  if (!text) {
    err << "cannot read " << trace.string() << "\n";
    return kExitConfig;
  }
  Scenario s;
  std::string recorded_hash;
  try {
    auto doc = nlohmann::json::parse(*text);
    s = parse_scenario(doc.at("scenario").dump());
    recorded_hash = doc.at("trace_hash").get<std::string>();
  } catch (const std::exception& e) {
    err << "trace unreadable: " << e.what() << "\n";
    return kExitReplayMismatch;
  }
  RunResult r;
  try {
    r = run_adaptive(s);
  } catch (const SafetyViolation& e) {
    err << "SAFETY VIOLATION during replay: " << e.what() << "\n";
    return kExitSafety;
  } catch (const std::exception& e) {
    err << "replay failed: " << e.what() << "\n";
    return kExitReplayMismatch;
  }
  auto regenerated = trace_json(s, r);
  if (regenerated != *text) {
    err << "trace mismatch: recorded " << recorded_hash << ", replayed "
        << to_hex(r.report.trace_hash) << "\n";
    return kExitReplayMismatch;
  }
  out << "replay ok, trace hash " << recorded_hash << "\n";
  return kExitOk;
}

int cmd_report(const fs::path& epochs, std::optional<double> log_base, std::ostream& out,
               std::ostream& err) {
  auto text = read_file(epochs);
  if (!text) {
    err << "cannot read " << epochs.string() << "\n";
    return kExitConfig;
  }
  double base = log_base.value_or(10.0);
  if (!(base > 1.0)) {
    err << "--log-base must exceed 1\n";
    return kExitConfig;
  }
  constexpr double kTol = 1e-9;
  out << std::left << std::setw(6) << "epoch" << std::setw(11) << "protocol" << std::setw(5)
      << "n" << std::setw(7) << "batch" << std::setw(11) << "t_sec" << std::setw(12)
      << "theta_tps" << std::setw(9) << "d" << std::setw(9) << "c" << std::setw(9) << "s"
      << "check\n";
  std::istringstream lines(*text);
  std::string line;
  std::size_t lineno = 0;
  int mismatches = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      auto n = j.at("n").get<std::uint32_t>();
      std::optional<double> t;
      if (!j.at("t_sec").is_null()) t = j.at("t_sec").get<double>();
      auto theta = j.at("theta_tps").get<double>();
      auto expect = metrics::scores(n, t, theta, base);
      double d = j.at("d").get<double>();
      double c = j.at("c").get<double>();
      double s = j.at("s").get<double>();
      std::string status = "ok";
      if (std::abs(d - expect.d) > kTol) status = "d!=" + fixed(expect.d, 6);
      if (std::abs(c - expect.c) > kTol) status = "c!=" + fixed(expect.c, 6);
      if (std::abs(s - expect.s) > kTol) status = "s!=" + fixed(expect.s, 6);
      if (status != "ok") ++mismatches;
      out << std::setw(6) << j.at("epoch").dump() << std::setw(11)
          << j.at("protocol").get<std::string>() << std::setw(5) << n << std::setw(7)
          << j.at("batch").dump() << std::setw(11) << (t ? fixed(*t, 5) : "-") << std::setw(12)
          << fixed(theta, 2) << std::setw(9) << fixed(d, 4) << std::setw(9) << fixed(c, 4)
          << std::setw(9) << fixed(s, 4) << status << "\n";
    } catch (const std::exception& e) {
      err << epochs.string() << ":" << lineno << ": " << e.what() << "\n";
      return kExitConfig;
    }
  }
  if (mismatches > 0) {
    err << mismatches << " record(s) disagree with the recomputed scores\n";
    return kExitReportMismatch;
  }
  return kExitOk;
}

}  // namespace dcs::harness
