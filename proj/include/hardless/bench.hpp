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

// The experiment client: phased open-loop load generation, r_start/r_end
// stamping, completion listening and timeout accounting.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hardless/core.hpp"
#include "hardless/event_log.hpp"
#include "hardless/metrics.hpp"
#include "hardless/node.hpp"
#include "hardless/queue.hpp"
#include "hardless/runtime.hpp"
#include "hardless/store.hpp"

namespace hardless {

struct WorkloadPhase {
  std::string label;
  TimeMs duration_ms = 0;
  double target_trps = 0.0;
};

struct MembershipChange {
  enum class Action { kAdd, kRemove };

  TimeMs t_ms = 0;
  Action action = Action::kAdd;
  NodeConfig node;      // kAdd
  std::string node_id;  // kRemove
};

struct Scenario {
  std::vector<WorkloadPhase> phases;
  std::string runtime_ref;
  std::string dataset_ref;
  RunConfig run_config;
  TimeMs invocation_timeout_ms = 120'000;
  std::vector<NodeConfig> nodes;
  std::uint64_t seed = 1;

  // Environment the phases run against.
  std::vector<RuntimeSpec> runtimes;
  std::vector<BackendProfile> profiles;
  std::uint64_t dataset_size_bytes = 1024;
  FetchLatencyModel store_fetch;
  std::optional<std::uint64_t> queue_capacity;
  TimeMs sample_period_ms = 1000;
  TimeMs rfast_window_ms = kDefaultRFastWindowMs;
  bool poisson = false;
  std::vector<MembershipChange> membership;

  TimeMs total_duration_ms() const {
    TimeMs total = 0;
    for (const auto& p : phases) total += p.duration_ms;
    return total;
  }

  RuntimeCatalog catalog() const {
    RuntimeCatalog c;
    for (const auto& r : runtimes) c[r.id] = r;
    return c;
  }
};

struct Arrival {
  TimeMs t = 0;
  std::size_t phase = 0;
};

/// Number of arrivals a fixed-interval phase produces.
inline std::uint64_t phase_arrival_count(const WorkloadPhase& p) {
  if (p.target_trps <= 0.0) return 0;
  return static_cast<std::uint64_t>(
      std::floor(static_cast<double>(p.duration_ms) * p.target_trps / 1000.0 + 1e-9));
}

/// Open-loop arrival times: each phase starts where the previous ended;
/// inside a phase arrivals are spaced 1000/target_trps ms apart (or drawn
/// from a seeded Poisson process). Depends only on (phases, seed).
inline std::vector<Arrival> arrival_schedule(const std::vector<WorkloadPhase>& phases,
                                             std::uint64_t seed, bool poisson = false) {
  std::vector<Arrival> out;
  std::mt19937_64 rng(seed);
  TimeMs offset = 0;
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const WorkloadPhase& p = phases[i];
    if (p.target_trps > 0.0) {
      const double interval = 1000.0 / p.target_trps;
      if (!poisson) {
        const std::uint64_t n = phase_arrival_count(p);
        for (std::uint64_t k = 0; k < n; ++k) {
          const auto dt = static_cast<TimeMs>(std::floor(static_cast<double>(k) * interval + 1e-9));
          out.push_back(Arrival{offset + dt, i});
        }
      } else {
        double at = 0.0;
        for (;;) {
          const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
          at += -std::log1p(-u) * interval;
          const auto dt = static_cast<TimeMs>(std::floor(at));
          if (dt >= p.duration_ms) break;
          out.push_back(Arrival{offset + dt, i});
        }
      }
    }
    offset += p.duration_ms;
  }
  return out;
}

/// Durations divided by time_scale and rates multiplied by it, so a run
/// compresses uniformly in time. Positive durations stay at least 1 ms.
inline Scenario scale_scenario(Scenario s, double time_scale) {
  if (time_scale < 1.0) throw Error(ErrorCode::kConfigError, "time_scale must be >= 1");
  if (time_scale == 1.0) return s;
  auto div = [&](TimeMs v) -> TimeMs {
    if (v <= 0) return v;
    return std::max<TimeMs>(1, static_cast<TimeMs>(std::llround(static_cast<double>(v) / time_scale)));
  };
  for (auto& p : s.phases) {
    p.duration_ms = div(p.duration_ms);
    p.target_trps *= time_scale;
  }
  s.invocation_timeout_ms = div(s.invocation_timeout_ms);
  auto scale_node = [&](NodeConfig& n) {
    n.idle_timeout_ms = div(n.idle_timeout_ms);
    n.poll_interval_ms = div(n.poll_interval_ms);
  };
  for (auto& n : s.nodes) scale_node(n);
  for (auto& r : s.runtimes) {
    for (auto& [_, v] : r.cold_start_ms) v = div(v);
  }
  for (auto& p : s.profiles) {
    p.cold_start_ms = div(p.cold_start_ms);
    p.exec_median_ms = div(p.exec_median_ms);
  }
  s.store_fetch.bytes_per_ms *= time_scale;
  s.store_fetch.overhead_ms = div(s.store_fetch.overhead_ms);
  s.sample_period_ms = div(s.sample_period_ms);
  s.rfast_window_ms = div(s.rfast_window_ms);
  for (auto& m : s.membership) {
    m.t_ms = div(m.t_ms);
    scale_node(m.node);
  }
  return s;
}

/// Publishes invocations, listens on its reply endpoint and keeps one
/// outcome record per published invocation, in publish order.
class BenchClient {
 public:
  BenchClient(std::string address, QueueApi& queue, CompletionRouter& router, const Clock& clock,
              TimeMs timeout_ms, EventLog* log = nullptr)
      : address_(std::move(address)),
        queue_(queue),
        router_(router),
        clock_(clock),
        timeout_ms_(timeout_ms),
        log_(log) {
    if (timeout_ms_ <= 0) throw Error(ErrorCode::kInvalidArgument, "invocation timeout must be positive");
    router_.open(address_, [this](const CompletionNotice& n) { on_notice(n); });
  }

  BenchClient(const BenchClient&) = delete;
  BenchClient& operator=(const BenchClient&) = delete;

  ~BenchClient() { router_.close(address_); }

  const std::string& address() const { return address_; }

  /// Creates the next invocation, stamps r_start = t and publishes it. A
  /// full queue is recorded as a rejected outcome. Returns the id.
  std::string publish(const std::string& runtime_ref, const std::string& dataset_ref,
                      const RunConfig& run_config, TimeMs t) {
    Invocation inv;
    {
      std::lock_guard lock(mu_);
      char id[32];
      std::snprintf(id, sizeof(id), "inv-%07" PRIu64, ++next_id_);
      inv.id = id;
    }
    inv.runtime_ref = runtime_ref;
    inv.dataset_ref = dataset_ref;
    inv.run_config = run_config;
    inv.reply_to = address_;
    inv.ledger.stamp(Stamp::kRStart, t);

    OutcomeRecord rec;
    rec.invocation_id = inv.id;
    rec.runtime_ref = inv.runtime_ref;
    rec.config_key = inv.key();
    rec.ledger = inv.ledger;
    bool rejected = false;
    {
      // Registered before publishing so a fast completion finds its record.
      std::lock_guard lock(mu_);
      index_[inv.id] = records_.size();
      records_.push_back(Tracked{rec, false});
    }
    try {
      queue_.publish(inv, t);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kQueueFull) throw;
      rejected = true;
      std::lock_guard lock(mu_);
      Tracked& tr = records_[index_.at(inv.id)];
      tr.rec.status = OutcomeStatus::kRejected;
      tr.rec.reason = e.what();
      tr.done = true;
    }
    record(rejected ? EventKind::kReject : EventKind::kPublish, t, inv.id, inv.key());
    if (rejected) record(EventKind::kOutcome, t, inv.id, inv.key(), "rejected");
    return inv.id;
  }

  /// Marks the invocation TimedOut if it is still open at t and its deadline
  /// (r_start + timeout) has passed. Returns true if it changed.
  bool expire(const std::string& invocation_id, TimeMs t) {
    std::lock_guard lock(mu_);
    Tracked& tr = records_.at(index_.at(invocation_id));
    return expire_locked(tr, t);
  }

  /// expire() over every open invocation.
  std::size_t sweep(TimeMs t) {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (auto& tr : records_) n += expire_locked(tr, t) ? 1 : 0;
    return n;
  }

  std::vector<OutcomeRecord> outcomes() const {
    std::lock_guard lock(mu_);
    std::vector<OutcomeRecord> out;
    out.reserve(records_.size());
    for (const auto& tr : records_) out.push_back(tr.rec);
    return out;
  }

  /// r_end of successful invocations, ascending.
  std::vector<TimeMs> success_times() const {
    std::lock_guard lock(mu_);
    return success_times_;
  }

  std::size_t open_count() const {
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& tr : records_) n += tr.done ? 0 : 1;
    return n;
  }

  std::size_t published_count() const {
    std::lock_guard lock(mu_);
    return records_.size();
  }

  /// Notices for invocations that already timed out are ignored.
  void on_notice(const CompletionNotice& notice) {
    const TimeMs t = clock_.now();
    std::lock_guard lock(mu_);
    auto it = index_.find(notice.invocation_id);
    if (it == index_.end()) return;
    Tracked& tr = records_[it->second];
    if (tr.done) return;
    const TimeMs r_start = *tr.rec.ledger.get(Stamp::kRStart);
    if (t - r_start > timeout_ms_) {
      expire_locked(tr, t);
      return;
    }
    TimestampLedger ledger = notice.ledger;
    if (!ledger.has(Stamp::kRStart)) ledger.stamp(Stamp::kRStart, r_start);
    ledger.stamp(Stamp::kREnd, t);
    tr.rec.ledger = ledger;
    tr.rec.node_id = notice.node_id;
    tr.rec.accel_type = notice.accel_type;
    tr.rec.accel_id = notice.accel_id;
    tr.rec.reason = notice.reason;
    tr.rec.status = notice.status == CompletionStatus::kSuccess ? OutcomeStatus::kSuccess
                                                                : OutcomeStatus::kFailure;
    tr.done = true;
    if (tr.rec.status == OutcomeStatus::kSuccess) {
      success_times_.insert(std::upper_bound(success_times_.begin(), success_times_.end(), t), t);
    }
    record(EventKind::kOutcome, t, tr.rec.invocation_id, tr.rec.config_key,
                  std::string(to_string(tr.rec.status)));
  }

 private:
  struct Tracked {
    OutcomeRecord rec;
    bool done = false;
  };

  bool expire_locked(Tracked& tr, TimeMs t) {
    if (tr.done) return false;
    if (t - *tr.rec.ledger.get(Stamp::kRStart) <= timeout_ms_) return false;
    tr.rec.status = OutcomeStatus::kTimedOut;
    tr.done = true;
    record(EventKind::kOutcome, t, tr.rec.invocation_id, tr.rec.config_key, "timed_out");
    return true;
  }

  void record(EventKind kind, TimeMs t, const std::string& inv, const std::string& key,
              const std::string& detail = {}) {
    if (log_) log_->append(Event{0, t, kind, "client", inv, "", key, "", detail});
  }

  std::string address_;
  QueueApi& queue_;
  CompletionRouter& router_;
  const Clock& clock_;
  TimeMs timeout_ms_;
  EventLog* log_;
  mutable std::mutex mu_;
  std::uint64_t next_id_ = 0;
  std::vector<Tracked> records_;
  std::map<std::string, std::size_t> index_;
  std::vector<TimeMs> success_times_;
};

}  // namespace hardless
