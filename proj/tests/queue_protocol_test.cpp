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

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include <json.hpp>

#include "hardless/queue_protocol.hpp"

namespace hardless {
namespace {

using nlohmann::json;

Invocation make(const std::string& id, const std::string& rt, RunConfig cfg = {}) {
  Invocation inv{id, rt, "ds/1", std::move(cfg), "client", {}};
  inv.ledger.stamp(Stamp::kRStart, 0);
  return inv;
}

std::filesystem::path socket_path(const std::string& tag) {
  return std::filesystem::temp_directory_path() /
         ("hardless-q-" + tag + "-" + std::to_string(::getpid()) + ".sock");
}

TEST(QueueProtocol, Verbs) {
  InvocationQueue q;
  QueueProtocolHandler h(q);
  auto call = [&](const json& req) { return json::parse(h.handle(req.dump())); };

  auto r = call({{"verb", "PUBLISH"}, {"invocation", invocation_to_json(make("e1", "rtA"))}, {"t", 0}});
  EXPECT_TRUE(r.at("ok").get<bool>());
  call({{"verb", "PUBLISH"}, {"invocation", invocation_to_json(make("e2", "rtB", {{"m", "1"}}))}, {"t", 1}});

  r = call({{"verb", "SCAN"}, {"filter", {"rtA"}}});
  ASSERT_EQ(r.at("entries").size(), 1u);
  EXPECT_EQ(r["entries"][0].at("invocation_id"), "e1");

  r = call({{"verb", "CLAIMCFG"}, {"key", warm_key("rtB", {{"m", "1"}})}, {"t", 2}});
  EXPECT_EQ(r.at("invocation").at("id"), "e2");
  EXPECT_EQ(invocation_from_json(r["invocation"]).ledger.get(Stamp::kNStart), 2);

  r = call({{"verb", "CLAIM"}, {"supported", {"rtB"}}, {"t", 3}});
  EXPECT_TRUE(r.at("invocation").is_null());

  r = call({{"verb", "STATS"}});
  EXPECT_EQ(r.at("stats").at("pending_count"), 1);
  EXPECT_EQ(r.at("stats").at("claimed_count"), 1);
  EXPECT_EQ(r.at("stats").at("published_total"), 2);
}

TEST(QueueProtocol, Errors) {
  InvocationQueue q;
  QueueProtocolHandler h(q);
  auto r = json::parse(h.handle("not json"));
  EXPECT_FALSE(r.at("ok").get<bool>());
  EXPECT_EQ(r.at("error"), "ProtocolError");
  r = json::parse(h.handle(R"({"verb":"FROB"})"));
  EXPECT_EQ(r.at("error"), "ProtocolError");
  r = json::parse(h.handle(R"({"verb":"CLAIM","supported":[]})"));
  EXPECT_EQ(r.at("error"), "InvalidArgument");
  const std::string pub =
      json{{"verb", "PUBLISH"}, {"invocation", invocation_to_json(make("e1", "rt"))}}.dump();
  h.handle(pub);
  r = json::parse(h.handle(pub));
  EXPECT_EQ(r.at("error"), "DuplicateInvocation");
}

TEST(QueueProtocol, InvocationJsonRoundTrip) {
  Invocation inv = make("e1", "rt", {{"a", "1"}, {"b&", "=x"}});
  inv.ledger.stamp(Stamp::kNStart, 4);
  const Invocation back = invocation_from_json(invocation_to_json(inv));
  EXPECT_EQ(back.id, inv.id);
  EXPECT_EQ(back.run_config, inv.run_config);
  EXPECT_EQ(back.ledger, inv.ledger);
  EXPECT_EQ(back.reply_to, inv.reply_to);
}

TEST(RemoteQueueTest, SameSemanticsOverSocket) {
  InvocationQueue q(3);
  QueueServer server(q, socket_path("sem"));
  RemoteQueue remote(server.path());
  remote.publish(make("e1", "rtA"), 0);
  remote.publish(make("e2", "rtA"), 1);
  remote.publish(make("e3", "rtB"), 2);
  try {
    remote.publish(make("e4", "rtB"), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kQueueFull);
    EXPECT_EQ(std::string(e.what()).find("QueueFull: QueueFull"), std::string::npos);
  }
  EXPECT_EQ(remote.scan(std::nullopt).size(), 3u);
  EXPECT_EQ(remote.claim_matching({"rtA"}, 5)->id, "e1");
  EXPECT_EQ(remote.claim_matching({"rtA"}, 5)->id, "e2");
  EXPECT_FALSE(remote.claim_matching({"rtA"}, 5));
  EXPECT_EQ(remote.stats(5), (QueueStats{1, 2, 3}));
  EXPECT_EQ(q.stats(5), (QueueStats{1, 2, 3}));
}

TEST(RemoteQueueTest, ConcurrentRemoteConsumersClaimExactlyOnce) {
  InvocationQueue q;
  QueueServer server(q, socket_path("conc"));
  constexpr int kCount = 400;
  for (int i = 0; i < kCount; ++i) q.publish(make("e" + std::to_string(i), "rt"), i);
  std::vector<std::vector<std::string>> got(4);
  std::vector<std::thread> threads;
  for (int c = 0; c < 4; ++c) {
    threads.emplace_back([&, c] {
      RemoteQueue remote(server.path());
      while (auto inv = remote.claim_matching({"rt"}, 0)) got[c].push_back(inv->id);
    });
  }
  for (auto& t : threads) t.join();
  std::set<std::string> all;
  std::size_t total = 0;
  for (const auto& v : got) {
    total += v.size();
    all.insert(v.begin(), v.end());
  }
  EXPECT_EQ(total, static_cast<std::size_t>(kCount));
  EXPECT_EQ(all.size(), static_cast<std::size_t>(kCount));
}

TEST(RemoteQueueTest, ServerStopClosesClients) {
  InvocationQueue q;
  auto server = std::make_unique<QueueServer>(q, socket_path("stop"));
  RemoteQueue remote(server->path());
  EXPECT_EQ(remote.stats(0).published_total, 0u);
  server->stop();
  try {
    remote.stats(0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoFailure);
  }
  EXPECT_THROW(RemoteQueue(socket_path("absent")), Error);
}

}  // namespace
}  // namespace hardless
