#include "dcs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dcs::metrics {

namespace {

double clamp01(double x) { return std::clamp(x, 0.0, 1.0); }

}  // namespace

double d_rate(std::uint32_t n) {
  if (n == 0) throw std::domain_error("d_rate: node count must be positive");
  return 1.0 - 1.0 / static_cast<double>(n);
}

double c_rate(double t_sec) {
  if (!(t_sec >= 0.0)) throw std::domain_error("c_rate: latency must be non-negative");
  return std::exp(-t_sec);
}

double s_rate(double theta_tps, double log_base) {
  if (!(log_base > 1.0)) throw std::domain_error("s_rate: log base must exceed 1");
  if (!(theta_tps > log_base)) return 0.0;
  const double lg = log_base == 10.0  ? std::log10(theta_tps)
                    : log_base == 2.0 ? std::log2(theta_tps)
                                      : std::log(theta_tps) / std::log(log_base);
  if (lg <= 1.0) return 0.0;
  return clamp01(1.0 - 1.0 / lg);
}

MetricsWindow measure_epoch(std::uint64_t epoch, std::uint32_t n,
                            std::span<const CommitObservation> commits, TrafficCount traffic,
                            SimTime start, SimTime end) {
  if (end <= start) throw std::invalid_argument("measure_epoch: empty time window");
  MetricsWindow w;
  w.epoch = epoch;
  w.start = start;
  w.end = end;
  w.n = n;
  w.messages = traffic.messages;
  w.bytes = traffic.bytes;
  std::uint64_t latency_sum_ms = 0;
  for (const auto& c : commits) {
    if (c.commit_time < start || c.commit_time >= end) continue;
    ++w.blocks;
    w.committed_txs += c.latencies_ms.size();
    for (auto l : c.latencies_ms) latency_sum_ms += l;
  }
  if (w.committed_txs > 0) {
    w.mean_latency_sec = static_cast<double>(latency_sum_ms) /
                         static_cast<double>(w.committed_txs) / 1000.0;
  }
  w.throughput_tps =
      static_cast<double>(w.committed_txs) / (static_cast<double>(end - start) / 1000.0);
  return w;
}

DcsScores scores(std::uint32_t n, std::optional<double> t_sec, double theta_tps,
                 double log_base) {
  DcsScores s;
  s.d = clamp01(d_rate(n));
  s.c = t_sec ? clamp01(c_rate(*t_sec)) : 0.0;
  s.s = s_rate(theta_tps, log_base);
  return s;
}

DcsScores scores(const MetricsWindow& window, double log_base) {
  return scores(window.n, window.mean_latency_sec, window.throughput_tps, log_base);
}

}  // namespace dcs::metrics
