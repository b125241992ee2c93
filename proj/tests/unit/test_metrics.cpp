#include <gtest/gtest.h>

#include <cmath>

#include "dcs/metrics.hpp"

namespace dcs::metrics {
namespace {

TEST(DRate, Values) {
  EXPECT_NEAR(d_rate(1), 0.0, 1e-9);
  EXPECT_NEAR(d_rate(4), 0.75, 1e-9);
  EXPECT_NEAR(d_rate(100), 0.99, 1e-9);
  EXPECT_NEAR(d_rate(13), 12.0 / 13.0, 1e-12);
  EXPECT_THROW(d_rate(0), std::domain_error);
}

TEST(CRate, Values) {
  EXPECT_NEAR(c_rate(0), 1.0, 1e-9);
  EXPECT_NEAR(c_rate(std::log(2.0)), 0.5, 1e-9);
  EXPECT_NEAR(c_rate(1), 0.3679, 1e-4);
  EXPECT_THROW(c_rate(-0.1), std::domain_error);
  EXPECT_THROW(c_rate(std::nan("")), std::domain_error);
}

TEST(SRate, Values) {
  EXPECT_NEAR(s_rate(10), 0.0, 1e-9);
  EXPECT_NEAR(s_rate(100), 0.5, 1e-9);
  EXPECT_NEAR(s_rate(1000), 0.6667, 1e-4);
  EXPECT_EQ(s_rate(0), 0.0);
  EXPECT_EQ(s_rate(5), 0.0);
  EXPECT_NEAR(s_rate(8, 2.0), 1.0 - 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(s_rate(std::exp(4.0), std::exp(1.0)), 0.75, 1e-9);
  EXPECT_THROW(s_rate(100, 1.0), std::domain_error);
}

TEST(Rates, Monotone) {
  for (std::uint32_t n = 1; n < 200; ++n) EXPECT_LT(d_rate(n), d_rate(n + 1));
  for (double t = 0; t < 10; t += 0.25) EXPECT_GT(c_rate(t), c_rate(t + 0.25));
  double prev = -1;
  for (double th = 0; th < 1e5; th = th * 1.7 + 1) {
    double s = s_rate(th);
    if (th > 10) EXPECT_GT(s, prev);
    else EXPECT_GE(s, prev);
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    prev = s;
  }
}

TEST(MeasureEpoch, Throughput) {
  std::vector<CommitObservation> c;
  for (int i = 0; i < 5; ++i) c.push_back({static_cast<Height>(i + 1), 100u * static_cast<SimTime>(i), std::vector<SimTime>(100, 10)});
  auto w = measure_epoch(0, 4, c, {}, 0, 2000);
  EXPECT_EQ(w.committed_txs, 500u);
  EXPECT_NEAR(w.throughput_tps, 250.0, 1e-9);
  EXPECT_EQ(w.blocks, 5u);
}

TEST(MeasureEpoch, MeanLatency) {
  std::vector<CommitObservation> c{{1, 10, {200}}, {2, 20, {400}}};
  auto w = measure_epoch(0, 4, c, {7, 900}, 0, 1000);
  ASSERT_TRUE(w.mean_latency_sec.has_value());
  EXPECT_NEAR(*w.mean_latency_sec, 0.3, 1e-12);
  EXPECT_EQ(w.messages, 7u);
  EXPECT_EQ(w.bytes, 900u);
}

TEST(MeasureEpoch, HalfOpenWindow) {
  std::vector<CommitObservation> c{{1, 99, {1}}, {2, 100, {1}}, {3, 199, {1}}, {4, 200, {1}}};
  auto w = measure_epoch(1, 4, c, {}, 100, 200);
  EXPECT_EQ(w.blocks, 2u);
  EXPECT_THROW(measure_epoch(1, 4, c, {}, 200, 200), std::invalid_argument);
}

TEST(MeasureEpoch, EmptyWindow) {
  auto w = measure_epoch(0, 4, {}, {}, 0, 1000);
  EXPECT_EQ(w.throughput_tps, 0.0);
  EXPECT_FALSE(w.mean_latency_sec.has_value());
  auto s = scores(w);
  EXPECT_NEAR(s.d, 0.75, 1e-12);
  EXPECT_EQ(s.c, 0.0);
  EXPECT_EQ(s.s, 0.0);
}

TEST(Scores, Composition) {
  auto a = scores(4, 0.5, 100);
  EXPECT_NEAR(a.d, 0.75, 1e-9);
  EXPECT_NEAR(a.c, 0.6065, 1e-4);
  EXPECT_NEAR(a.s, 0.5, 1e-9);
  auto b = scores(4, 0.0, 10);
  EXPECT_NEAR(b.d, 0.75, 1e-9);
  EXPECT_NEAR(b.c, 1.0, 1e-9);
  EXPECT_NEAR(b.s, 0.0, 1e-9);
  auto c = scores(7, 0.1, 1000);
  EXPECT_NEAR(c.d, 0.8571, 1e-4);
  EXPECT_NEAR(c.c, 0.9048, 1e-4);
  EXPECT_NEAR(c.s, 0.6667, 1e-4);
}

}  // namespace
}  // namespace dcs::metrics
