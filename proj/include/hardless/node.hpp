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

// The node manager: owns one worker's accelerator list and runtime
// instances, pulls work from the shared queue and reports completions
// straight to the client's reply endpoint.
//
// NodeManager is a single-owner state machine. It makes every scheduling
// decision and performs every queue call, then hands back NodeActions that a
// driver carries out against a RuntimeBackend: the simulation driver turns
// them into future events, the real-time driver runs them on threads.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "hardless/core.hpp"
#include "hardless/event_log.hpp"
#include "hardless/queue.hpp"
#include "hardless/runtime.hpp"

namespace hardless {

using RuntimeCatalog = std::map<std::string, RuntimeSpec>;

struct NodeConfig {
  std::string node_id;
  std::vector<AcceleratorDescriptor> accelerators;
  std::vector<std::string> runtimes;
  TimeMs idle_timeout_ms = 30'000;
  TimeMs poll_interval_ms = 50;
};

/// Problems with a node configuration against a runtime catalog; empty when
/// the configuration is usable.
inline std::vector<std::string> check_node_config(const NodeConfig& cfg,
                                                  const RuntimeCatalog& catalog) {
  std::vector<std::string> findings;
  const std::string where = "node " + (cfg.node_id.empty() ? std::string("<unnamed>") : cfg.node_id);
  if (cfg.node_id.empty()) findings.push_back("node_id is empty");
  if (cfg.accelerators.empty()) findings.push_back(where + ": accelerators is empty");
  std::set<std::string> ids;
  std::set<std::string> types;
  for (const auto& a : cfg.accelerators) {
    if (a.local_id.empty()) findings.push_back(where + ": accelerator with empty local_id");
    if (!ids.insert(a.local_id).second) {
      findings.push_back(where + ": duplicate accelerator local_id " + a.local_id);
    }
    if (a.capacity < 1) findings.push_back(where + ": accelerator " + a.local_id + " capacity < 1");
    if (a.in_use < 0 || a.in_use > a.capacity) {
      findings.push_back(where + ": accelerator " + a.local_id + " in_use outside [0, capacity]");
    }
    types.insert(a.accel_type);
  }
  for (const auto& r : cfg.runtimes) {
    auto it = catalog.find(r);
    if (it == catalog.end()) {
      findings.push_back(where + ": runtime " + r + " is not defined");
      continue;
    }
    bool hosted = std::any_of(types.begin(), types.end(),
                              [&](const std::string& t) { return it->second.supports(t); });
    if (!hosted) {
      findings.push_back(where + ": runtime " + r +
                         " is not supported by any local accelerator (NodeConfig invariant)");
    }
  }
  if (cfg.idle_timeout_ms < 0) findings.push_back(where + ": idle_timeout_ms is negative");
  if (cfg.poll_interval_ms <= 0) findings.push_back(where + ": poll_interval_ms must be positive");
  return findings;
}

enum class CompletionStatus { kSuccess, kFailure };

struct CompletionNotice {
  std::string invocation_id;
  CompletionStatus status = CompletionStatus::kSuccess;
  std::string reason;      // set on failure
  std::string result_ref;  // set on success
  TimestampLedger ledger;  // through n_end
  std::string node_id;
  std::string accel_type;
  std::string accel_id;
};

/// Maps reply_to addresses to client endpoints. Completion notices travel
/// through here, never through the queue.
class CompletionRouter {
 public:
  using Handler = std::function<void(const CompletionNotice&)>;

  void open(const std::string& address, Handler handler) {
    std::lock_guard lock(mu_);
    endpoints_[address] = std::make_shared<Handler>(std::move(handler));
  }

  void close(const std::string& address) {
    std::lock_guard lock(mu_);
    endpoints_.erase(address);
  }

  void deliver(const std::string& address, const CompletionNotice& notice) const {
    std::shared_ptr<Handler> handler;
    {
      std::lock_guard lock(mu_);
      auto it = endpoints_.find(address);
      if (it == endpoints_.end()) {
        throw Error(ErrorCode::kReplyChannelClosed, "no endpoint at " + address);
      }
      handler = it->second;
    }
    (*handler)(notice);
  }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Handler>> endpoints_;
};

struct NodeAction {
  enum class Kind { kColdStart, kDispatch, kStop };

  Kind kind = Kind::kDispatch;
  RuntimeInstance instance;               // snapshot at decision time
  std::optional<Invocation> invocation;   // kDispatch only
};

class NodeManager {
 public:
  NodeManager(NodeConfig cfg, const RuntimeCatalog& catalog, QueueApi& queue,
              CompletionRouter& router, EventLog* log = nullptr)
      : cfg_(std::move(cfg)),
        catalog_(catalog),
        queue_(queue),
        router_(router),
        log_(log),
        instances_(cfg_.node_id, cfg_.accelerators) {
    auto findings = check_node_config(cfg_, catalog_);
    if (!findings.empty()) throw Error(ErrorCode::kInvalidConfig, findings.front());
  }

  const NodeConfig& config() const { return cfg_; }
  const std::string& id() const { return cfg_.node_id; }
  const InstanceManager& instances() const { return instances_; }

  /// One scheduling pass:
  ///  1. every warm Idle instance asks for work with its own key;
  ///  2. remaining capacity claims any locally runnable invocation and cold
  ///     starts an instance on the least-loaded supporting accelerator,
  ///     replacing a workless Idle instance when no slot is free;
  ///  3. Idle instances past idle_timeout_ms are stopped.
  std::vector<NodeAction> schedule_tick(TimeMs t) {
    std::vector<NodeAction> actions;
    if (!shutting_down_) {
      dispatch_warm(t, actions);
      start_cold(t, actions);
    }
    evict_idle(t, actions);
    return actions;
  }

  /// Starting -> Idle, then run the invocation the instance was started for.
  std::vector<NodeAction> on_ready(const std::string& instance_id, TimeMs t) {
    instances_.mark_ready(instance_id, t);
    record(EventKind::kReady, t, "", instance_id);
    std::vector<NodeAction> actions;
    auto held = held_.find(instance_id);
    if (held != held_.end()) {
      Invocation inv = std::move(held->second);
      held_.erase(held);
      dispatch(instance_id, std::move(inv), t, actions);
    }
    return actions;
  }

  /// The backend could not bring the instance up; its invocation fails.
  std::vector<NodeAction> on_start_failed(const std::string& instance_id, TimeMs t,
                                          const std::string& reason) {
    std::vector<NodeAction> actions;
    RuntimeInstance snapshot = instances_.instance(instance_id);
    instances_.stop_instance(instance_id, t);
    record(EventKind::kEvict, t, "", instance_id, snapshot.key, snapshot.accel_id, "start failed");
    auto held = held_.find(instance_id);
    if (held != held_.end()) {
      Invocation inv = std::move(held->second);
      held_.erase(held);
      ExecutionResult failed{ErrorCode::kSpawnFailure, reason, {}, t};
      complete(std::move(inv), failed, snapshot, t);
    }
    return actions;
  }

  /// Busy -> Idle, stamp n_end and notify the client. During shutdown the
  /// instance is stopped right away.
  std::vector<NodeAction> on_finished(const std::string& instance_id, Invocation inv,
                                      const ExecutionResult& result, TimeMs t) {
    std::vector<NodeAction> actions;
    instances_.finish(instance_id, t);
    const RuntimeInstance& inst = instances_.instance(instance_id);
    record(EventKind::kFinish, t, inv.id, instance_id, inst.key, inst.accel_id);
    RuntimeInstance snapshot = inst;
    complete(std::move(inv), result, snapshot, t);
    if (shutting_down_) stop(instance_id, t, "shutdown", actions);
    return actions;
  }

  /// Stamps n_end and delivers the completion notice to inv.reply_to.
  /// Performs no queue interaction. An unreachable endpoint is logged.
  void complete(Invocation inv, const ExecutionResult& result, const RuntimeInstance& inst,
                TimeMs t) {
    inv.ledger.stamp(Stamp::kNEnd, t);
    CompletionNotice notice;
    notice.invocation_id = inv.id;
    notice.status = result.ok() ? CompletionStatus::kSuccess : CompletionStatus::kFailure;
    if (!result.ok()) {
      notice.reason = std::string(to_string(*result.error));
      if (!result.message.empty()) notice.reason += ": " + result.message;
    }
    notice.result_ref = result.ok() ? result.result_ref : std::string();
    notice.ledger = inv.ledger;
    notice.node_id = cfg_.node_id;
    notice.accel_type = inst.accel_type;
    notice.accel_id = inst.accel_id;
    ++completed_;
    try {
      router_.deliver(inv.reply_to, notice);
      record(EventKind::kComplete, t, inv.id, inst.instance_id, inst.key, inst.accel_id,
             notice.status == CompletionStatus::kSuccess ? "success" : notice.reason);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kReplyChannelClosed) throw;
      record(EventKind::kReplyDropped, t, inv.id, inst.instance_id, inst.key, inst.accel_id,
             e.what());
    }
  }

  /// Stop claiming; in-flight work still runs to completion.
  void begin_shutdown() { shutting_down_ = true; }
  bool shutting_down() const { return shutting_down_; }

  /// True once shutdown was requested and every instance has stopped.
  bool drained() const { return shutting_down_ && instances_.instances().empty(); }

  /// Earliest time an Idle instance becomes eligible for eviction.
  std::optional<TimeMs> next_eviction_at() const {
    std::optional<TimeMs> next;
    for (const auto* inst : instances_.instances()) {
      if (inst->state != InstanceState::kIdle) continue;
      TimeMs due = inst->idle_since + cfg_.idle_timeout_ms;
      if (!next || due < *next) next = due;
    }
    return next;
  }

  std::uint64_t claimed() const { return claimed_; }
  std::uint64_t completed() const { return completed_; }
  std::uint64_t in_flight() const { return claimed_ - completed_; }

 private:
  void dispatch_warm(TimeMs t, std::vector<NodeAction>& actions) {
    for (const auto* inst : instances_.instances()) {
      if (inst->state != InstanceState::kIdle) continue;
      const std::string id = inst->instance_id;
      const std::string key = inst->key;
      record(EventKind::kClaimCfgAttempt, t, "", id, key, inst->accel_id);
      auto inv = queue_.claim_same_config(key, t);
      if (!inv) continue;
      ++claimed_;
      record(EventKind::kClaimCfg, t, inv->id, id, key, inst->accel_id);
      dispatch(id, std::move(*inv), t, actions);
    }
  }

  void start_cold(TimeMs t, std::vector<NodeAction>& actions) {
    for (;;) {
      const std::set<std::string> runnable = runnable_runtimes();
      if (runnable.empty()) return;
      record(EventKind::kClaimAttempt, t, "", "", "", "", join(runnable));
      auto inv = queue_.claim_matching(runnable, t);
      if (!inv) return;
      ++claimed_;
      record(EventKind::kClaim, t, inv->id, "", inv->key(), "");
      const std::string key = inv->key();
      // A same-key entry published after the warm pass still goes warm.
      if (auto idle = idle_instance_with_key(key)) {
        dispatch(*idle, std::move(*inv), t, actions);
        continue;
      }
      const RuntimeSpec& spec = catalog_.at(inv->runtime_ref);
      std::optional<std::string> accel = least_loaded_free(spec);
      if (!accel) {
        auto victim = replacement_victim(spec);
        if (!victim) {
          throw Error(ErrorCode::kInvalidState, "claimed " + inv->id + " without capacity");
        }
        const std::string accel_id = instances_.instance(*victim).accel_id;
        stop(*victim, t, "replaced", actions);
        accel = accel_id;
      }
      const RuntimeInstance& inst = instances_.start_instance(spec, key, *accel, t);
      record(EventKind::kColdStart, t, inv->id, inst.instance_id, key, inst.accel_id);
      actions.push_back(NodeAction{NodeAction::Kind::kColdStart, inst, std::nullopt});
      held_.emplace(inst.instance_id, std::move(*inv));
    }
  }

  void evict_idle(TimeMs t, std::vector<NodeAction>& actions) {
    std::vector<std::string> due;
    for (const auto* inst : instances_.instances()) {
      if (inst->state != InstanceState::kIdle) continue;
      if (shutting_down_ || t - inst->idle_since >= cfg_.idle_timeout_ms) {
        due.push_back(inst->instance_id);
      }
    }
    for (const auto& id : due) stop(id, t, shutting_down_ ? "shutdown" : "idle timeout", actions);
  }

  void dispatch(const std::string& instance_id, Invocation inv, TimeMs t,
                std::vector<NodeAction>& actions) {
    instances_.begin(instance_id, inv);
    const RuntimeInstance& inst = instances_.instance(instance_id);
    record(EventKind::kDispatch, t, inv.id, instance_id, inst.key, inst.accel_id);
    actions.push_back(NodeAction{NodeAction::Kind::kDispatch, inst, std::move(inv)});
  }

  void stop(const std::string& instance_id, TimeMs t, const char* why,
            std::vector<NodeAction>& actions) {
    RuntimeInstance stopped = instances_.stop_instance(instance_id, t);
    record(EventKind::kEvict, t, "", instance_id, stopped.key, stopped.accel_id, why);
    actions.push_back(NodeAction{NodeAction::Kind::kStop, std::move(stopped), std::nullopt});
  }

  // Runtimes this node can take on now: hosted by an accelerator that has a
  // free slot or an Idle instance that could be replaced.
  std::set<std::string> runnable_runtimes() const {
    std::set<std::string> usable_types;
    for (const auto& [id, a] : instances_.accelerators()) {
      if (a.free_slots() > 0) usable_types.insert(a.accel_type);
    }
    for (const auto* inst : instances_.instances()) {
      if (inst->state == InstanceState::kIdle) usable_types.insert(inst->accel_type);
    }
    std::set<std::string> out;
    for (const auto& r : cfg_.runtimes) {
      const RuntimeSpec& spec = catalog_.at(r);
      for (const auto& type : usable_types) {
        if (spec.supports(type)) {
          out.insert(r);
          break;
        }
      }
    }
    return out;
  }

  std::optional<std::string> idle_instance_with_key(const std::string& key) const {
    for (const auto* inst : instances_.instances()) {
      if (inst->state == InstanceState::kIdle && inst->key == key) return inst->instance_id;
    }
    return std::nullopt;
  }

  std::optional<std::string> least_loaded_free(const RuntimeSpec& spec) const {
    const AcceleratorDescriptor* best = nullptr;
    for (const auto& [id, a] : instances_.accelerators()) {  // ordered by local_id
      if (a.free_slots() <= 0 || !spec.supports(a.accel_type)) continue;
      if (!best || a.in_use < best->in_use) best = &a;
    }
    if (!best) return std::nullopt;
    return best->local_id;
  }

  // Longest-idle instance on an accelerator that can host the runtime.
  std::optional<std::string> replacement_victim(const RuntimeSpec& spec) const {
    const RuntimeInstance* victim = nullptr;
    for (const auto* inst : instances_.instances()) {
      if (inst->state != InstanceState::kIdle || !spec.supports(inst->accel_type)) continue;
      if (!victim || inst->idle_since < victim->idle_since) victim = inst;
    }
    if (!victim) return std::nullopt;
    return victim->instance_id;
  }

  void record(EventKind kind, TimeMs t, const std::string& invocation_id,
              const std::string& instance_id, const std::string& key = {},
              const std::string& accel_id = {}, const std::string& detail = {}) {
    if (!log_) return;
    log_->append(Event{0, t, kind, cfg_.node_id, invocation_id, instance_id, key, accel_id, detail});
  }

  static std::string join(const std::set<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
      if (!out.empty()) out.push_back(',');
      out += s;
    }
    return out;
  }

  NodeConfig cfg_;
  const RuntimeCatalog& catalog_;
  QueueApi& queue_;
  CompletionRouter& router_;
  EventLog* log_;
  InstanceManager instances_;
  std::unordered_map<std::string, Invocation> held_;  // Starting instance -> its invocation
  bool shutting_down_ = false;
  std::uint64_t claimed_ = 0;
  std::uint64_t completed_ = 0;
};

}  // namespace hardless
