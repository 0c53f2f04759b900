//*****************************************************************************
// Copyright 2026 The Hardless Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "hardless/bench.hpp"

namespace hardless {
namespace {

std::vector<TimeMs> times(const std::vector<Arrival>& arrivals) {
  std::vector<TimeMs> out;
  for (const auto& a : arrivals) out.push_back(a.t);
  return out;
}

TEST(ArrivalSchedule, OneTrpsForAMinute) {
  const auto a = arrival_schedule({{"P", 60'000, 1.0}}, 1);
  ASSERT_EQ(a.size(), 60u);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].t, static_cast<TimeMs>(k) * 1000);
}

TEST(ArrivalSchedule, WarmUpPhase) {
  EXPECT_EQ(arrival_schedule({{"P0", 120'000, 10.0}}, 1).size(), 1200u);
}

TEST(ArrivalSchedule, ZeroRateStillConsumesDuration) {
  const auto a = arrival_schedule({{"idle", 5000, 0.0}, {"P", 2000, 1.0}}, 1);
  EXPECT_EQ(times(a), (std::vector<TimeMs>{5000, 6000}));
  EXPECT_EQ(a[0].phase, 1u);
}

TEST(ArrivalSchedule, PaperPhasesAndFractionalRates) {
  const std::vector<WorkloadPhase> phases = {
      {"P0", 120'000, 10.0}, {"P1", 600'000, 20.0}, {"P2", 120'000, 20.0}};
  const auto a = arrival_schedule(phases, 42);
  EXPECT_EQ(a.size(), 1200u + 12000u + 2400u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end(), [](auto& x, auto& y) { return x.t < y.t; }));
  EXPECT_EQ(a[1200].t, 120'000);
  // floor(d * trps / 1000) +- 1 for awkward rates.
  for (double trps : {0.3, 1.7, 3.333, 7.0, 19.9}) {
    for (TimeMs d : {999, 1000, 12'345, 60'000}) {
      const auto n = static_cast<double>(arrival_schedule({{"x", d, trps}}, 1).size());
      EXPECT_NEAR(n, std::floor(static_cast<double>(d) * trps / 1000.0), 1.0);
      for (const auto& arr : arrival_schedule({{"x", d, trps}}, 1)) EXPECT_LT(arr.t, d);
    }
  }
}

TEST(ArrivalSchedule, PoissonIsSeededAndNearTarget) {
  const std::vector<WorkloadPhase> phases = {{"P", 600'000, 20.0}};
  const auto a = arrival_schedule(phases, 7, true);
  EXPECT_EQ(times(a), times(arrival_schedule(phases, 7, true)));
  EXPECT_NE(times(a), times(arrival_schedule(phases, 8, true)));
  EXPECT_NEAR(static_cast<double>(a.size()), 12000.0, 12000.0 * 0.05);
}

TEST(ScaleScenario, DividesDurationsAndMultipliesRates) {
  Scenario s;
  s.phases = {{"P0", 120'000, 10.0}};
  s.invocation_timeout_ms = 120'000;
  s.profiles = {BackendProfile{"sim-gpu", 5000, 1675, 0.0, 0.0, 1}};
  s.store_fetch = FetchLatencyModel{100.0, 5};
  const Scenario k = scale_scenario(s, 10.0);
  EXPECT_EQ(k.phases[0].duration_ms, 12'000);
  EXPECT_DOUBLE_EQ(k.phases[0].target_trps, 100.0);
  EXPECT_EQ(k.invocation_timeout_ms, 12'000);
  EXPECT_EQ(k.profiles[0].exec_median_ms, 168);
  EXPECT_EQ(k.profiles[0].cold_start_ms, 500);
  EXPECT_DOUBLE_EQ(k.store_fetch.bytes_per_ms, 1000.0);
  EXPECT_EQ(k.store_fetch.overhead_ms, 1);  // clamped, not rounded to zero
  EXPECT_EQ(arrival_schedule(k.phases, 1).size(), arrival_schedule(s.phases, 1).size());
  EXPECT_THROW(scale_scenario(s, 0.5), Error);
}

class ClientTest : public ::testing::Test {
 protected:
  ClientTest() : client("client/test", queue, router, clock, 60'000, &log) {}

  CompletionNotice notice_for(const Invocation& inv, CompletionStatus status, TimeMs n_start,
                              TimeMs e_start, TimeMs e_end, TimeMs n_end) {
    CompletionNotice n;
    n.invocation_id = inv.id;
    n.status = status;
    n.ledger = inv.ledger;
    if (!n.ledger.has(Stamp::kNStart)) n.ledger.stamp(Stamp::kNStart, n_start);
    n.ledger.stamp(Stamp::kEStart, e_start);
    n.ledger.stamp(Stamp::kEEnd, e_end);
    n.ledger.stamp(Stamp::kNEnd, n_end);
    n.node_id = "n1";
    n.accel_type = "sim-gpu";
    n.accel_id = "gpu0";
    if (status == CompletionStatus::kSuccess) n.result_ref = result_key(inv.id);
    return n;
  }

  VirtualClock clock;
  InvocationQueue queue;
  CompletionRouter router;
  EventLog log;
  BenchClient client;
};

TEST_F(ClientTest, CompletionStampsREnd) {
  const std::string id = client.publish("yolo", "ds/1", {}, 0);
  auto inv = queue.claim_matching({"yolo"}, 100);
  ASSERT_TRUE(inv);
  EXPECT_EQ(inv->id, id);
  EXPECT_EQ(inv->reply_to, "client/test");
  clock.advance_to(2500);
  router.deliver(inv->reply_to, notice_for(*inv, CompletionStatus::kSuccess, 100, 200, 2300, 2400));
  const auto out = client.outcomes();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].status, OutcomeStatus::kSuccess);
  EXPECT_EQ(*out[0].ledger.get(Stamp::kREnd) - *out[0].ledger.get(Stamp::kRStart), 2500);
  EXPECT_TRUE(out[0].ledger.complete());
  EXPECT_EQ(client.success_times(), (std::vector<TimeMs>{2500}));
  EXPECT_EQ(client.open_count(), 0u);
}

TEST_F(ClientTest, TimeoutBoundary) {
  const std::string id = client.publish("yolo", "ds/1", {}, 1000);
  EXPECT_FALSE(client.expire(id, 61'000));  // exactly at the deadline: still open
  EXPECT_TRUE(client.expire(id, 61'001));
  EXPECT_EQ(client.outcomes()[0].status, OutcomeStatus::kTimedOut);
  EXPECT_FALSE(client.expire(id, 70'000));
}

TEST_F(ClientTest, LateNoticeIsIgnored) {
  client.publish("yolo", "ds/1", {}, 0);
  auto inv = queue.claim_matching({"yolo"}, 1);
  clock.advance_to(60'001);
  router.deliver("client/test", notice_for(*inv, CompletionStatus::kSuccess, 1, 2, 3, 60'001));
  EXPECT_EQ(client.outcomes()[0].status, OutcomeStatus::kTimedOut);
  EXPECT_TRUE(client.success_times().empty());
}

TEST_F(ClientTest, FailureNotice) {
  client.publish("yolo", "ds/1", {}, 0);
  auto inv = queue.claim_matching({"yolo"}, 1);
  clock.advance_to(10);
  auto n = notice_for(*inv, CompletionStatus::kFailure, 1, 2, 3, 4);
  n.reason = "ExecutionFailure: injected fault";
  router.deliver("client/test", n);
  EXPECT_EQ(client.outcomes()[0].status, OutcomeStatus::kFailure);
  EXPECT_EQ(client.outcomes()[0].reason, n.reason);
}

TEST(BenchClientTest, QueueFullIsRejectedAndConservationHolds) {
  VirtualClock clock;
  InvocationQueue queue(3);
  CompletionRouter router;
  BenchClient client("c", queue, router, clock, 100);
  for (int i = 0; i < 5; ++i) client.publish("yolo", "ds/1", {}, i);
  auto inv = queue.claim_matching({"yolo"}, 5);
  clock.advance_to(50);
  CompletionNotice n{inv->id, CompletionStatus::kSuccess, {}, result_key(inv->id), inv->ledger, "", "", ""};
  n.ledger.stamp(Stamp::kEStart, 6);
  n.ledger.stamp(Stamp::kEEnd, 7);
  n.ledger.stamp(Stamp::kNEnd, 8);
  router.deliver("c", n);
  client.sweep(1000);
  std::map<OutcomeStatus, int> counts;
  for (const auto& o : client.outcomes()) ++counts[o.status];
  EXPECT_EQ(counts[OutcomeStatus::kRejected], 2);
  EXPECT_EQ(counts[OutcomeStatus::kSuccess], 1);
  EXPECT_EQ(counts[OutcomeStatus::kTimedOut], 2);
  EXPECT_EQ(client.published_count(), 5u);
  EXPECT_EQ(client.open_count(), 0u);
}

TEST(BenchClientTest, IdsAreSequentialAndOrdered) {
  VirtualClock clock;
  InvocationQueue queue;
  CompletionRouter router;
  BenchClient client("c", queue, router, clock, 100);
  EXPECT_EQ(client.publish("r", "d", {}, 0), "inv-0000001");
  EXPECT_EQ(client.publish("r", "d", {}, 0), "inv-0000002");
  EXPECT_THROW(BenchClient("d", queue, router, clock, 0), Error);
}

TEST(BenchClientTest, ClosesEndpointOnDestruction) {
  VirtualClock clock;
  InvocationQueue queue;
  CompletionRouter router;
  { BenchClient client("c", queue, router, clock, 100); }
  try {
    router.deliver("c", CompletionNotice{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kReplyChannelClosed);
  }
}

}  // namespace
}  // namespace hardless
