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

// The shared invocation queue. Nodes scan it, claim any invocation their
// accelerators can host, or claim one whose warm key matches an instance
// they already run. Claims are terminal: completion bypasses the queue.

#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "hardless/core.hpp"

namespace hardless {

enum class EntryState { kPending, kClaimed };

struct QueueEntry {
  Invocation invocation;
  TimeMs enqueued_at = 0;
  EntryState state = EntryState::kPending;
};

/// One row of a scan: what a node needs to decide before claiming.
struct ScanEntry {
  std::string invocation_id;
  std::string runtime_ref;
  std::string config_key;
  TimeMs enqueued_at = 0;

  friend bool operator==(const ScanEntry&, const ScanEntry&) = default;
};

struct QueueStats {
  std::uint64_t pending_count = 0;
  std::uint64_t claimed_count = 0;
  std::uint64_t published_total = 0;

  friend bool operator==(const QueueStats&, const QueueStats&) = default;
};

using RuntimeFilter = std::optional<std::set<std::string>>;

/// Transport-independent queue surface. Implemented in-process by
/// InvocationQueue and over a socket by RemoteQueue.
class QueueApi {
 public:
  virtual ~QueueApi() = default;

  virtual std::uint64_t publish(const Invocation& inv, TimeMs t) = 0;
  virtual std::vector<ScanEntry> scan(const RuntimeFilter& filter) const = 0;
  virtual std::optional<Invocation> claim_matching(const std::set<std::string>& supported,
                                                   TimeMs t) = 0;
  virtual std::optional<Invocation> claim_same_config(const std::string& key, TimeMs t) = 0;
  virtual QueueStats stats(TimeMs t) const = 0;
};

class InvocationQueue final : public QueueApi {
 public:
  /// capacity bounds the number of Pending entries; nullopt is unbounded.
  explicit InvocationQueue(std::optional<std::uint64_t> capacity = std::nullopt)
      : capacity_(capacity) {}

  std::uint64_t publish(const Invocation& inv, TimeMs t) override {
    inv.validate();
    std::lock_guard lock(mu_);
    if (ids_.count(inv.id)) {
      throw Error(ErrorCode::kDuplicateInvocation, "invocation " + inv.id + " already published");
    }
    if (capacity_ && pending_.size() >= *capacity_) {
      throw Error(ErrorCode::kQueueFull,
                  "queue holds " + std::to_string(pending_.size()) + " pending entries");
    }
    const std::uint64_t seq = entries_.size();
    const Order order{t, seq};
    Slot slot{QueueEntry{inv, t, EntryState::kPending}, inv.key()};
    by_runtime_[inv.runtime_ref].insert(order);
    by_key_[slot.key].insert(order);
    pending_.insert(order);
    ids_.insert(inv.id);
    entries_.push_back(std::move(slot));
    return seq;
  }

  std::vector<ScanEntry> scan(const RuntimeFilter& filter) const override {
    std::lock_guard lock(mu_);
    std::vector<ScanEntry> out;
    for (const auto& order : pending_) {
      const Slot& s = entries_[order.second];
      if (filter && !filter->count(s.entry.invocation.runtime_ref)) continue;
      out.push_back(ScanEntry{s.entry.invocation.id, s.entry.invocation.runtime_ref, s.key,
                              s.entry.enqueued_at});
    }
    return out;
  }

  std::optional<Invocation> claim_matching(const std::set<std::string>& supported,
                                           TimeMs t) override {
    if (supported.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "claim_matching needs a non-empty runtime set");
    }
    std::lock_guard lock(mu_);
    std::optional<Order> best;
    for (const auto& runtime : supported) {
      auto it = by_runtime_.find(runtime);
      if (it == by_runtime_.end() || it->second.empty()) continue;
      const Order& head = *it->second.begin();
      if (!best || head < *best) best = head;
    }
    if (!best) return std::nullopt;
    return claim_locked(*best, t);
  }

  std::optional<Invocation> claim_same_config(const std::string& key, TimeMs t) override {
    std::lock_guard lock(mu_);
    auto it = by_key_.find(key);
    if (it == by_key_.end() || it->second.empty()) return std::nullopt;
    return claim_locked(*it->second.begin(), t);
  }

  QueueStats stats(TimeMs /*t*/) const override {
    std::lock_guard lock(mu_);
    return QueueStats{pending_.size(), claimed_, entries_.size()};
  }

  /// Entry by the identifier returned from publish().
  QueueEntry entry(std::uint64_t entry_id) const {
    std::lock_guard lock(mu_);
    if (entry_id >= entries_.size()) {
      throw Error(ErrorCode::kNotFound, "no queue entry " + std::to_string(entry_id));
    }
    return entries_[entry_id].entry;
  }

 private:
  // (enqueued_at, publish sequence): oldest first, ties by publish order.
  using Order = std::pair<TimeMs, std::uint64_t>;

  struct Slot {
    QueueEntry entry;
    std::string key;
  };

  std::optional<Invocation> claim_locked(const Order& order, TimeMs t) {
    Slot& s = entries_[order.second];
    Invocation claimed = s.entry.invocation;
    // Stamp a copy first so a rejected stamp leaves the entry Pending.
    claimed.ledger.stamp(Stamp::kNStart, t);
    s.entry.state = EntryState::kClaimed;
    s.entry.invocation.ledger = claimed.ledger;
    by_runtime_[claimed.runtime_ref].erase(order);
    by_key_[s.key].erase(order);
    pending_.erase(order);
    ++claimed_;
    return claimed;
  }

  mutable std::mutex mu_;
  std::optional<std::uint64_t> capacity_;
  std::vector<Slot> entries_;
  std::unordered_set<std::string> ids_;
  std::set<Order> pending_;
  std::map<std::string, std::set<Order>> by_runtime_;
  std::map<std::string, std::set<Order>> by_key_;
  std::uint64_t claimed_ = 0;
};

}  // namespace hardless
