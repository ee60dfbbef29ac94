#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include <json.hpp>

#include "nbpk/bench.hpp"
#include "oracles.hpp"

using namespace nbpk;
using namespace nbpk::bench;

namespace {

Scenario small_scenario(double duration_s, double loss) {
  Scenario s;
  s.duration_s = duration_s;
  s.width = 32;
  s.height = 16;
  s.frag_payload = 256;  // 1024 bytes -> 4 fragments, 5 packets per frame
  s.impairment.loss_p = loss;
  return s;
}

}  // namespace

TEST(Analytic, KnownValues) {
  EXPECT_DOUBLE_EQ(analytic_delivery(0.0, 111), 1.0);
  EXPECT_DOUBLE_EQ(analytic_delivery(0.5, 1), 0.5);
  EXPECT_DOUBLE_EQ(analytic_delivery(1.0, 3), 0.0);
  EXPECT_NEAR(analytic_delivery(0.01, 111), 0.3277, 1e-4);
}

TEST(Analytic, PacketsPerFrame) {
  EXPECT_EQ(packets_per_frame(320, 240, 1400), 111u);
  EXPECT_EQ(packets_per_frame(32, 16, 256), 5u);
  EXPECT_EQ(packets_per_frame(32, 16, 1000), 3u);
}

TEST(Scenario, Validation) {
  EXPECT_TRUE(validate(Scenario{}));
  Scenario s;
  s.impairment.loss_p = 1.5;
  EXPECT_FALSE(validate(s));
  s = Scenario{};
  s.duration_s = 0;
  EXPECT_FALSE(validate(s));
  s = Scenario{};
  s.frag_payload = 100;
  EXPECT_FALSE(validate(s));
}

TEST(RunScenario, LosslessDeliversEverything) {
  Scenario s;
  s.duration_s = 10;
  const auto r = run_scenario(s);
  EXPECT_EQ(r.mode, "sim");
  EXPECT_EQ(r.frames_sent, 300u);
  EXPECT_EQ(r.frames_delivered, 300u);
  EXPECT_DOUBLE_EQ(r.delivery_ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.expected_ratio, 1.0);
  EXPECT_GE(r.achieved_fps, 29.4);
  EXPECT_EQ(r.frames_corrupt, 0u);
  EXPECT_EQ(r.orphan_fragments, 0u);
  EXPECT_EQ(r.bytes_on_wire, 300u * (111u * 26u + 12u + 153600u));
}

TEST(RunScenario, TotalLossDeliversNothing) {
  auto s = small_scenario(2, 1.0);
  const auto r = run_scenario(s);
  EXPECT_EQ(r.frames_delivered, 0u);
  EXPECT_DOUBLE_EQ(r.delivery_ratio, 0.0);
  EXPECT_DOUBLE_EQ(r.expected_ratio, 0.0);
  EXPECT_EQ(r.latency_mean_us, 0.0);
}

TEST(RunScenario, DeterministicPerSeed) {
  auto s = small_scenario(20, 0.1);
  s.impairment.dup_p = 0.05;
  s.impairment.reorder_p = 0.05;
  s.impairment.jitter_us = 500;
  s.seed = 9;
  ScenarioTrace ta, tb, tc;
  const auto a = run_scenario(s, &ta);
  const auto b = run_scenario(s, &tb);
  EXPECT_EQ(a, b);
  EXPECT_EQ(ta.fates, tb.fates);
  EXPECT_EQ(ta.delivered_seqs, tb.delivered_seqs);
  s.seed = 10;
  const auto c = run_scenario(s, &tc);
  EXPECT_NE(a.trace_digest, c.trace_digest);
  EXPECT_NE(ta.fates, tc.fates);
}

TEST(RunScenario, LossOnlyMatchesDropPolicyOracle) {
  auto s = small_scenario(30, 0.08);
  ScenarioTrace trace;
  const auto r = run_scenario(s, &trace);
  const std::vector<std::size_t> counts(r.frames_sent, 4);
  std::vector<bool> delivered;
  for (const auto& f : trace.fates) delivered.push_back(!f.lost);
  ASSERT_EQ(delivered.size(), r.frames_sent * 5);
  const auto want = nbpk::testing::predict_drop_policy(counts, delivered);
  std::vector<std::size_t> got(trace.delivered_seqs.begin(), trace.delivered_seqs.end());
  EXPECT_EQ(got, want.completed);
  EXPECT_EQ(r.frames_dropped_preempted, want.dropped.size());
  EXPECT_EQ(r.orphan_fragments, want.orphans);
}

TEST(RunScenario, LossRatioTracksModel) {
  auto s = small_scenario(200, 0.05);  // 6000 frames of 5 packets
  const auto r = run_scenario(s);
  EXPECT_NEAR(r.expected_ratio, std::pow(0.95, 5), 1e-12);
  EXPECT_NEAR(r.delivery_ratio, r.expected_ratio, 0.02);
}

TEST(Report, JsonRoundTripWithSortedKeys) {
  auto s = small_scenario(5, 0.1);
  const auto r = run_scenario(s);
  const auto text = to_json(r);
  auto back = report_from_json(text);
  ASSERT_TRUE(back) << back.error();
  EXPECT_EQ(*back, r);

  const auto j = nlohmann::json::parse(text);
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_EQ(keys.size(), 16u);
  // Textual order matches too.
  std::size_t prev = 0;
  for (const auto& k : keys) {
    const auto pos = text.find("\"" + k + "\"");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_GE(pos, prev);
    prev = pos;
  }
}

TEST(Report, FileRoundTripAndBadInput) {
  const auto path = std::filesystem::temp_directory_path() / "nbpk_bench_report_test.json";
  const auto r = run_scenario(small_scenario(1, 0.0));
  ASSERT_TRUE(write_report(r, path));
  auto back = read_report(path);
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, r);
  std::filesystem::remove(path);
  EXPECT_FALSE(report_from_json("{not json"));
  EXPECT_FALSE(report_from_json("{\"mode\": 3}"));
  EXPECT_FALSE(read_report(path));
}
