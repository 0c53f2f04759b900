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
#pragma once

// Append-only, totally ordered log of system events. Nodes and the
// benchmark client record every queue interaction and instance transition
// here; audits replay the log to check scheduling invariants.

#include <cstdint>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "hardless/core.hpp"

namespace hardless {

enum class EventKind {
  kPublish,         // client published an invocation
  kReject,          // client publish refused (QueueFull)
  kClaimAttempt,    // node asked the queue for any eligible invocation
  kClaim,           // ... and received one
  kClaimCfgAttempt, // node asked for a same-configuration invocation
  kClaimCfg,        // ... and received one
  kColdStart,       // instance entered Starting
  kReady,           // instance Starting -> Idle
  kDispatch,        // instance Idle -> Busy with an invocation
  kFinish,          // instance Busy -> Idle
  kEvict,           // instance stopped (idle timeout, replacement, shutdown)
  kComplete,        // node delivered a completion notice
  kReplyDropped,    // completion notice could not be delivered
  kNodeJoin,
  kNodeLeave,
  kOutcome,         // client recorded a final outcome
};

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kPublish: return "publish";
    case EventKind::kReject: return "reject";
    case EventKind::kClaimAttempt: return "claim_attempt";
    case EventKind::kClaim: return "claim";
    case EventKind::kClaimCfgAttempt: return "claimcfg_attempt";
    case EventKind::kClaimCfg: return "claimcfg";
    case EventKind::kColdStart: return "cold_start";
    case EventKind::kReady: return "ready";
    case EventKind::kDispatch: return "dispatch";
    case EventKind::kFinish: return "finish";
    case EventKind::kEvict: return "evict";
    case EventKind::kComplete: return "complete";
    case EventKind::kReplyDropped: return "reply_dropped";
    case EventKind::kNodeJoin: return "node_join";
    case EventKind::kNodeLeave: return "node_leave";
    case EventKind::kOutcome: return "outcome";
  }
  return "unknown";
}

struct Event {
  std::uint64_t seq = 0;
  TimeMs t = 0;
  EventKind kind = EventKind::kPublish;
  std::string source;         // node id or "client"
  std::string invocation_id;  // empty when not applicable
  std::string instance_id;
  std::string key;            // warm key
  std::string accel_id;
  std::string detail;
};

class EventLog {
 public:
  void append(Event e) {
    std::lock_guard lock(mu_);
    e.seq = events_.size();
    events_.push_back(std::move(e));
  }

  std::vector<Event> snapshot() const {
    std::lock_guard lock(mu_);
    return events_;
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return events_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<Event> events_;
};

}  // namespace hardless
