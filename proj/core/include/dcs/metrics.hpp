#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dcs/types.hpp"

namespace dcs::metrics {

/// 1 - 1/n. Throws std::domain_error for n = 0.
double d_rate(std::uint32_t n);
/// e^-t with t in seconds. Throws std::domain_error for negative or NaN t.
double c_rate(double t_sec);
/// 1 - 1/log_b(theta), clamped to 0 where log_b(theta) <= 1.
double s_rate(double theta_tps, double log_base = 10.0);

struct DcsScores {
  double d = 0;
  double c = 0;
  double s = 0;
};

/// One committed block as seen by the measuring observer.
struct CommitObservation {
  Height height = 0;
  SimTime commit_time = 0;
  std::vector<SimTime> latencies_ms;  // one per transaction
};

struct TrafficCount {
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
};

struct MetricsWindow {
  std::uint64_t epoch = 0;
  SimTime start = 0;
  SimTime end = 0;
  std::uint32_t n = 0;
  std::uint64_t blocks = 0;
  std::uint64_t committed_txs = 0;
  std::optional<double> mean_latency_sec;  // unset when no transaction committed
  double throughput_tps = 0;
  std::uint64_t messages = 0;
  std::uint64_t bytes = 0;
};

/// Aggregates the commits whose commit_time lies in [start, end).
/// Throws std::invalid_argument if end <= start.
MetricsWindow measure_epoch(std::uint64_t epoch, std::uint32_t n,
                            std::span<const CommitObservation> commits, TrafficCount traffic,
                            SimTime start, SimTime end);

/// An empty window (no latency sample) scores c = 0.
DcsScores scores(const MetricsWindow& window, double log_base = 10.0);
DcsScores scores(std::uint32_t n, std::optional<double> t_sec, double theta_tps,
                 double log_base = 10.0);

}  // namespace dcs::metrics
