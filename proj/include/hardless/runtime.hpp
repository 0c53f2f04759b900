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

// Runtime instances: warm-capable executors of one runtime bound to one
// accelerator slot. InstanceManager owns a node's accelerator slots and the
// instance state machine
//
//   Starting -> Idle -> (Busy <-> Idle)* -> Stopped
//
// while a RuntimeBackend performs the actual start/execute/stop work, either
// in simulated time (SimulatedBackend) or by driving child processes
// (ProcessBackend, see process_backend.hpp).

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hardless/core.hpp"
#include "hardless/store.hpp"

namespace hardless {

enum class InstanceState { kStarting, kIdle, kBusy, kStopped };

inline std::string_view to_string(InstanceState s) {
  switch (s) {
    case InstanceState::kStarting: return "Starting";
    case InstanceState::kIdle: return "Idle";
    case InstanceState::kBusy: return "Busy";
    case InstanceState::kStopped: return "Stopped";
  }
  return "Unknown";
}

struct RuntimeInstance {
  std::string instance_id;
  std::string runtime_ref;
  std::string artifact_ref;
  std::string key;
  std::string accel_type;
  std::string accel_id;
  InstanceState state = InstanceState::kStarting;
  TimeMs started_at = 0;
  TimeMs idle_since = 0;
  std::optional<std::string> bound_invocation;
  std::uint64_t executions = 0;
};

inline std::string result_key(std::string_view invocation_id) {
  return "results/" + std::string(invocation_id);
}

struct ExecutionResult {
  std::optional<ErrorCode> error;
  std::string message;
  std::string result_ref;  // set on success
  TimeMs finished_at = 0;

  bool ok() const { return !error.has_value(); }
};

class RuntimeBackend {
 public:
  virtual ~RuntimeBackend() = default;

  /// Brings the instance up. Returns the time at which it is ready; may
  /// block (process backend) or return a future virtual time (simulation).
  virtual TimeMs start(const RuntimeInstance& instance, const RuntimeSpec& spec, TimeMs t) = 0;

  /// Fetches the data set, runs the invocation, persists the result under
  /// results/<id> and stamps e_start/e_end on inv.ledger.
  virtual ExecutionResult execute(const RuntimeInstance& instance, Invocation& inv, TimeMs t) = 0;

  virtual void stop(const RuntimeInstance& instance) = 0;
};

// ---------------------------------------------------------------------------
// Simulated accelerators
// ---------------------------------------------------------------------------

struct BackendProfile {
  std::string accel_type;
  TimeMs cold_start_ms = 5000;
  TimeMs exec_median_ms = 1000;
  double jitter = 0.0;      // sigma of log(latency)
  double fault_rate = 0.0;  // probability an execution fails
  std::uint64_t seed = 1;
};

/// Log-normal execution-time sampler with the given median. The normal
/// variate is produced by Box-Muller over mt19937_64 so sequences are
/// identical across standard library implementations.
class LatencySampler {
 public:
  LatencySampler(TimeMs median_ms, double jitter, std::uint64_t seed)
      : median_(static_cast<double>(median_ms)), jitter_(jitter), rng_(seed) {}

  TimeMs sample() {
    if (jitter_ <= 0.0) return std::max<TimeMs>(1, static_cast<TimeMs>(std::llround(median_)));
    const double z = standard_normal();
    const double v = median_ * std::exp(jitter_ * z);
    return std::max<TimeMs>(1, static_cast<TimeMs>(std::llround(v)));
  }

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

 private:
  double standard_normal() {
    if (spare_) {
      double z = *spare_;
      spare_.reset();
      return z;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
  }

  double median_;
  double jitter_;
  std::mt19937_64 rng_;
  std::optional<double> spare_;
};

class SimulatedBackend final : public RuntimeBackend {
 public:
  SimulatedBackend(ObjectStore& store, const std::vector<BackendProfile>& profiles)
      : store_(store) {
    for (const auto& p : profiles) {
      if (p.exec_median_ms <= 0) {
        throw Error(ErrorCode::kInvalidConfig, "exec_median_ms must be positive for " + p.accel_type);
      }
      lanes_.emplace(p.accel_type, Lane{p, LatencySampler(p.exec_median_ms, p.jitter, p.seed),
                                        LatencySampler(1, 0.0, p.seed ^ 0x9E3779B97F4A7C15ULL)});
    }
  }

  TimeMs start(const RuntimeInstance& instance, const RuntimeSpec& spec, TimeMs t) override {
    auto it = spec.cold_start_ms.find(instance.accel_type);
    if (it != spec.cold_start_ms.end()) return t + it->second;
    std::lock_guard lock(mu_);
    return t + lane(instance.accel_type).profile.cold_start_ms;
  }

  ExecutionResult execute(const RuntimeInstance& instance, Invocation& inv, TimeMs t) override {
    Fetched data;
    try {
      data = store_.fetch(inv.dataset_ref, t);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotFound) throw;
      return ExecutionResult{ErrorCode::kDatasetNotFound, e.what(), {}, t};
    }
    TimeMs duration = 0;
    bool fault = false;
    {
      std::lock_guard lock(mu_);
      Lane& l = lane(instance.accel_type);
      duration = l.latency.sample();
      if (l.profile.fault_rate > 0.0) fault = l.faults.uniform() < l.profile.fault_rate;
    }
    const TimeMs e_start = data.completed_at;
    const TimeMs e_end = e_start + duration;
    inv.ledger.stamp(Stamp::kEStart, e_start);
    inv.ledger.stamp(Stamp::kEEnd, e_end);
    if (fault) {
      return ExecutionResult{ErrorCode::kExecutionFailure, "injected fault", {}, e_end};
    }
    const std::string ref = result_key(inv.id);
    store_.put(ref, "result of " + inv.id + " on " + instance.accel_id + " (" +
                        std::to_string(data.bytes.size()) + " bytes in)");
    return ExecutionResult{std::nullopt, {}, ref, e_end};
  }

  void stop(const RuntimeInstance&) override {}

  /// Draws one latency sample for the given accelerator type.
  TimeMs sample_latency(const std::string& accel_type) {
    std::lock_guard lock(mu_);
    return lane(accel_type).latency.sample();
  }

 private:
  struct Lane {
    BackendProfile profile;
    LatencySampler latency;
    LatencySampler faults;
  };

  Lane& lane(const std::string& accel_type) {
    auto it = lanes_.find(accel_type);
    if (it == lanes_.end()) {
      throw Error(ErrorCode::kUnsupportedAccelerator, "no simulated profile for " + accel_type);
    }
    return it->second;
  }

  ObjectStore& store_;
  std::mutex mu_;
  std::map<std::string, Lane> lanes_;
};

// ---------------------------------------------------------------------------
// Instance lifecycle and slot accounting
// ---------------------------------------------------------------------------

class InstanceManager {
 public:
  InstanceManager(std::string node_id, std::vector<AcceleratorDescriptor> accelerators)
      : node_id_(std::move(node_id)) {
    for (auto& a : accelerators) {
      if (a.capacity < 1) {
        throw Error(ErrorCode::kInvalidConfig, "accelerator " + a.local_id + " has capacity < 1");
      }
      a.in_use = 0;
      if (!accelerators_.emplace(a.local_id, a).second) {
        throw Error(ErrorCode::kInvalidConfig, "duplicate accelerator id " + a.local_id);
      }
    }
  }

  /// Acquires a slot and registers a Starting instance.
  const RuntimeInstance& start_instance(const RuntimeSpec& spec, const std::string& key,
                                        const std::string& accel_id, TimeMs t) {
    AcceleratorDescriptor& accel = accelerator_mut(accel_id);
    if (!spec.supports(accel.accel_type)) {
      throw Error(ErrorCode::kUnsupportedAccelerator,
                  "runtime " + spec.id + " cannot run on " + accel.accel_type);
    }
    if (accel.in_use >= accel.capacity) {
      throw Error(ErrorCode::kSlotOccupied, "accelerator " + accel_id + " has no free slot");
    }
    ++accel.in_use;
    RuntimeInstance inst;
    char suffix[24];
    std::snprintf(suffix, sizeof(suffix), "/i%05llu", static_cast<unsigned long long>(next_id_++));
    inst.instance_id = node_id_ + suffix;
    inst.runtime_ref = spec.id;
    inst.artifact_ref = spec.artifact_ref;
    inst.key = key;
    inst.accel_type = accel.accel_type;
    inst.accel_id = accel.local_id;
    inst.state = InstanceState::kStarting;
    inst.started_at = t;
    auto [it, _] = instances_.emplace(inst.instance_id, std::move(inst));
    return it->second;
  }

  void mark_ready(const std::string& id, TimeMs t) {
    RuntimeInstance& inst = instance_mut(id);
    expect_state(inst, InstanceState::kStarting, "mark_ready");
    inst.state = InstanceState::kIdle;
    inst.idle_since = t;
  }

  /// Idle -> Busy. A key mismatch leaves the instance Idle.
  void begin(const std::string& id, const Invocation& inv) {
    RuntimeInstance& inst = instance_mut(id);
    expect_state(inst, InstanceState::kIdle, "invoke");
    if (inv.key() != inst.key) {
      throw Error(ErrorCode::kConfigMismatch,
                  "invocation " + inv.id + " key " + inv.key() + " != instance key " + inst.key);
    }
    inst.state = InstanceState::kBusy;
    inst.bound_invocation = inv.id;
  }

  /// Busy -> Idle.
  void finish(const std::string& id, TimeMs t) {
    RuntimeInstance& inst = instance_mut(id);
    expect_state(inst, InstanceState::kBusy, "finish");
    inst.state = InstanceState::kIdle;
    inst.bound_invocation.reset();
    inst.idle_since = t;
    ++inst.executions;
  }

  /// Stops an Idle or Starting instance and releases its slot.
  RuntimeInstance stop_instance(const std::string& id, TimeMs /*t*/) {
    RuntimeInstance& inst = instance_mut(id);
    if (inst.state == InstanceState::kBusy) {
      throw Error(ErrorCode::kBusyInstance, "instance " + id + " is busy");
    }
    --accelerator_mut(inst.accel_id).in_use;
    RuntimeInstance stopped = std::move(inst);
    stopped.state = InstanceState::kStopped;
    instances_.erase(id);
    return stopped;
  }

  const AcceleratorDescriptor& accelerator(const std::string& id) const {
    auto it = accelerators_.find(id);
    if (it == accelerators_.end()) throw Error(ErrorCode::kNotFound, "no accelerator " + id);
    return it->second;
  }

  /// Accelerators ordered by local_id.
  const std::map<std::string, AcceleratorDescriptor>& accelerators() const { return accelerators_; }

  const RuntimeInstance& instance(const std::string& id) const {
    auto it = instances_.find(id);
    if (it == instances_.end()) throw Error(ErrorCode::kNotFound, "no instance " + id);
    return it->second;
  }

  bool has_instance(const std::string& id) const { return instances_.count(id) > 0; }

  /// Live (non-stopped) instances ordered by id.
  std::vector<const RuntimeInstance*> instances() const {
    std::vector<const RuntimeInstance*> out;
    for (const auto& [_, inst] : instances_) out.push_back(&inst);
    return out;
  }

  const std::string& node_id() const { return node_id_; }

 private:
  AcceleratorDescriptor& accelerator_mut(const std::string& id) {
    auto it = accelerators_.find(id);
    if (it == accelerators_.end()) throw Error(ErrorCode::kNotFound, "no accelerator " + id);
    return it->second;
  }

  RuntimeInstance& instance_mut(const std::string& id) {
    auto it = instances_.find(id);
    if (it == instances_.end()) throw Error(ErrorCode::kNotFound, "no instance " + id);
    return it->second;
  }

  static void expect_state(const RuntimeInstance& inst, InstanceState want, const char* op) {
    if (inst.state != want) {
      throw Error(ErrorCode::kInvalidState, std::string(op) + " on " + inst.instance_id + " in state " +
                                                std::string(to_string(inst.state)));
    }
  }

  std::string node_id_;
  std::map<std::string, AcceleratorDescriptor> accelerators_;
  std::map<std::string, RuntimeInstance> instances_;
  std::uint64_t next_id_ = 0;
};

/// Synchronous begin/execute/finish on one instance. Returns the backend's
/// result; on a ConfigMismatch nothing runs and the instance stays Idle.
inline ExecutionResult invoke(InstanceManager& manager, RuntimeBackend& backend,
                              const std::string& instance_id, Invocation& inv, TimeMs t) {
  manager.begin(instance_id, inv);
  ExecutionResult result;
  try {
    result = backend.execute(manager.instance(instance_id), inv, t);
  } catch (...) {
    manager.finish(instance_id, t);
    throw;
  }
  manager.finish(instance_id, result.finished_at);
  return result;
}

}  // namespace hardless
