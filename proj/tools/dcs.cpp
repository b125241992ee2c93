#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dcs/harness/commands.hpp"

using namespace dcs;
using namespace dcs::harness;

int main(int argc, char** argv) {
  CLI::App app{"Decentralization/consistency/scalability consensus simulator"};
  app.require_subcommand(1);

  RunOptions opts;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> epochs;
  std::optional<std::string> grid;
  std::optional<std::string> policy;
  std::optional<double> log_base;
  std::string trace_path;
  std::string epochs_path;
  std::string config;
  std::string out_dir = "out";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Scenario file (JSON)")->required();
    cmd->add_option("--seed", seed, "Seed override (beats DCS_SEED)");
    cmd->add_option("--epochs", epochs, "Number of measurement epochs");
    cmd->add_option("--out", out_dir, "Output directory")->capture_default_str();
    cmd->add_option("--grid", grid, "Knob grid, e.g. n=4,7;protocol=pbft,hotstuff;batch=1,16");
    cmd->add_option("--policy", policy, "Controller policy")
        ->check(CLI::IsMember({"greedy", "sweep", "static"}));
    cmd->add_option("--log-base", log_base, "Logarithm base of the scalability score");
  };

  auto* run = app.add_subcommand("run", "Run one scenario");
  add_common(run);
  auto* sweep = app.add_subcommand("sweep", "Run one static world per grid point");
  add_common(sweep);
  sweep->add_option("--jobs", opts.jobs, "Parallel workers (0 = all cores)");
  auto* replay = app.add_subcommand("replay", "Re-execute a trace and compare");
  replay->add_option("trace", trace_path, "trace.json written by run")->required();
  auto* report = app.add_subcommand("report", "Recompute and check epoch scores");
  report->add_option("epochs", epochs_path, "epochs.jsonl written by run")->required();
  report->add_option("--log-base", log_base, "Logarithm base used by the run");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  opts.config = config;
  opts.out_dir = out_dir;
  opts.overrides.seed = seed;
  opts.overrides.epochs = epochs;
  opts.overrides.grid = grid;
  opts.overrides.log_base = log_base;
  if (policy) opts.overrides.policy = control::parse_policy(*policy);

  if (run->parsed()) return cmd_run(opts, std::cout, std::cerr);
  if (sweep->parsed()) return cmd_sweep(opts, std::cout, std::cerr);
  if (replay->parsed()) return cmd_replay(trace_path, std::cout, std::cerr);
  return cmd_report(epochs_path, log_base, std::cout, std::cerr);
}
