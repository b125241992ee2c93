#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dcs/harness/scenario.hpp"
#include "dcs/harness/simulation.hpp"

namespace dcs::harness {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitSafety = 2;
inline constexpr int kExitReplayMismatch = 3;
inline constexpr int kExitReportMismatch = 4;

struct Overrides {
  std::optional<std::uint64_t> seed;  // beats DCS_SEED, which beats the config seed
  std::optional<std::uint32_t> epochs;
  std::optional<std::string> grid;
  std::optional<control::PolicyKind> policy;
  std::optional<double> log_base;
};

struct RunOptions {
  std::filesystem::path config;
  std::filesystem::path out_dir = "out";
  Overrides overrides;
  unsigned jobs = 0;  // sweep workers; 0 = hardware concurrency
};

/// Reads, parses and overrides a scenario. Throws ScenarioError (including
/// for unreadable files).
Scenario load_scenario(const std::filesystem::path& path, const Overrides& overrides);
void apply_overrides(Scenario& s, const Overrides& overrides);

/// One row of summary.csv: aggregate over the full epochs run with `knobs`.
struct SummaryRow {
  control::Knobs knobs;
  std::uint64_t epochs = 0;
  double mean_theta = 0;
  std::optional<double> mean_t;
  metrics::DcsScores scores;
  double score = 0;
  double msgs_per_block = 0;
  double bytes_per_block = 0;
};

/// Rows in order of first appearance of each knob setting. Partial epochs
/// are used only when no full epoch exists.
std::vector<SummaryRow> summarize(const RunResult& r, const Scenario& s);

std::string epochs_jsonl(const RunResult& r);
std::string history_jsonl(const RunResult& r);
std::string summary_csv(const std::vector<SummaryRow>& rows, bool with_index = false);
/// Canonical trace document: scenario, trace hash, network report.
std::string trace_json(const Scenario& s, const RunResult& r);

int cmd_run(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_replay(const std::filesystem::path& trace, std::ostream& out, std::ostream& err);
int cmd_report(const std::filesystem::path& epochs, std::optional<double> log_base,
               std::ostream& out, std::ostream& err);

}  // namespace dcs::harness
