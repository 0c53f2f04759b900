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

// Domain types shared by every Hardless component: the error type, the
// timestamp ledger, invocations, runtime and accelerator descriptors, and
// the clocks that drive a run.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace hardless {

/// Milliseconds on the run's single logical clock.
using TimeMs = std::int64_t;

/// Opaque per-invocation configuration. std::map keeps keys sorted, which
/// makes the canonical serialization independent of insertion order.
using RunConfig = std::map<std::string, std::string>;

enum class ErrorCode {
  kAlreadyStamped,
  kOrderViolation,
  kInvalidArgument,
  kDuplicateInvocation,
  kQueueFull,
  kKeyExists,
  kStorageFull,
  kNotFound,
  kUnsupportedAccelerator,
  kSlotOccupied,
  kSpawnFailure,
  kConfigMismatch,
  kExecutionFailure,
  kDatasetNotFound,
  kBusyInstance,
  kInvalidState,
  kInvalidConfig,
  kReplyChannelClosed,
  kIncompleteLedger,
  kIoFailure,
  kConfigError,
  kRuntimeError,
  kProtocolError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAlreadyStamped: return "AlreadyStamped";
    case ErrorCode::kOrderViolation: return "OrderViolation";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDuplicateInvocation: return "DuplicateInvocation";
    case ErrorCode::kQueueFull: return "QueueFull";
    case ErrorCode::kKeyExists: return "KeyExists";
    case ErrorCode::kStorageFull: return "StorageFull";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnsupportedAccelerator: return "UnsupportedAccelerator";
    case ErrorCode::kSlotOccupied: return "SlotOccupied";
    case ErrorCode::kSpawnFailure: return "SpawnFailure";
    case ErrorCode::kConfigMismatch: return "ConfigMismatch";
    case ErrorCode::kExecutionFailure: return "ExecutionFailure";
    case ErrorCode::kDatasetNotFound: return "DatasetNotFound";
    case ErrorCode::kBusyInstance: return "BusyInstance";
    case ErrorCode::kInvalidState: return "InvalidState";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kReplyChannelClosed: return "ReplyChannelClosed";
    case ErrorCode::kIncompleteLedger: return "IncompleteLedger";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kRuntimeError: return "RuntimeError";
    case ErrorCode::kProtocolError: return "ProtocolError";
  }
  return "Unknown";
}

inline std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kProtocolError); ++i) {
    auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

/// The single exception type thrown by the library. Callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// ---------------------------------------------------------------------------
// Configuration keys
// ---------------------------------------------------------------------------

namespace detail {

// Escapes the separator characters used by the canonical serialization so
// that distinct maps can never serialize to the same string.
inline std::string escape_component(std::string_view in) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  out.reserve(in.size());
  for (unsigned char c : in) {
    if (c == '%' || c == '=' || c == '&' || c == '#' || c < 0x20) {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    } else {
      out.push_back(static_cast<char>(c));
    }
  }
  return out;
}

}  // namespace detail

/// Canonical serialization of a run configuration: `k1=v1&k2=v2` over the
/// keys in sorted order, with separators percent-escaped. The empty map
/// yields the empty string.
inline std::string config_key(const RunConfig& run_config) {
  std::string out;
  bool first = true;
  for (const auto& [k, v] : run_config) {
    if (!first) out.push_back('&');
    first = false;
    out += detail::escape_component(k);
    out.push_back('=');
    out += detail::escape_component(v);
  }
  return out;
}

/// Warm-matching key: the runtime identity followed by the canonical
/// configuration. Two invocations may share a warm instance iff their
/// warm keys are byte-identical.
inline std::string warm_key(std::string_view runtime_ref, const RunConfig& run_config) {
  return detail::escape_component(runtime_ref) + "#" + config_key(run_config);
}

// ---------------------------------------------------------------------------
// Timestamp ledger
// ---------------------------------------------------------------------------

enum class Stamp : std::size_t { kRStart = 0, kNStart, kEStart, kEEnd, kNEnd, kREnd };

inline constexpr std::size_t kStampCount = 6;

inline std::string_view to_string(Stamp s) {
  static constexpr std::array<std::string_view, kStampCount> kNames = {
      "r_start", "n_start", "e_start", "e_end", "n_end", "r_end"};
  return kNames[static_cast<std::size_t>(s)];
}

/// Six lifecycle timestamps of one invocation. Fields are write-once and
/// the set fields always form a non-decreasing chain in lifecycle order.
class TimestampLedger {
 public:
  std::optional<TimeMs> get(Stamp s) const { return fields_[index(s)]; }
  bool has(Stamp s) const { return fields_[index(s)].has_value(); }

  /// Throws AlreadyStamped or OrderViolation; the ledger is unchanged on error.
  void stamp(Stamp s, TimeMs t) {
    const std::size_t i = index(s);
    if (fields_[i]) {
      throw Error(ErrorCode::kAlreadyStamped,
                  std::string(to_string(s)) + " already set to " + std::to_string(*fields_[i]));
    }
    for (std::size_t j = i; j-- > 0;) {
      if (fields_[j]) {
        if (*fields_[j] > t) {
          throw Error(ErrorCode::kOrderViolation,
                      std::string(to_string(s)) + "=" + std::to_string(t) + " precedes " +
                          std::string(to_string(static_cast<Stamp>(j))) + "=" +
                          std::to_string(*fields_[j]));
        }
        break;
      }
    }
    for (std::size_t j = i + 1; j < kStampCount; ++j) {
      if (fields_[j]) {
        if (*fields_[j] < t) {
          throw Error(ErrorCode::kOrderViolation,
                      std::string(to_string(s)) + "=" + std::to_string(t) + " follows " +
                          std::string(to_string(static_cast<Stamp>(j))) + "=" +
                          std::to_string(*fields_[j]));
        }
        break;
      }
    }
    fields_[i] = t;
  }

  /// True iff every pair of set fields is ordered.
  bool monotone() const {
    std::optional<TimeMs> prev;
    for (const auto& f : fields_) {
      if (!f) continue;
      if (prev && *prev > *f) return false;
      prev = f;
    }
    return true;
  }

  bool complete() const {
    for (const auto& f : fields_) {
      if (!f) return false;
    }
    return true;
  }

  friend bool operator==(const TimestampLedger&, const TimestampLedger&) = default;

 private:
  static std::size_t index(Stamp s) { return static_cast<std::size_t>(s); }

  std::array<std::optional<TimeMs>, kStampCount> fields_{};
};

/// Value-returning form of TimestampLedger::stamp.
inline TimestampLedger stamp(TimestampLedger ledger, Stamp field, TimeMs t) {
  ledger.stamp(field, t);
  return ledger;
}

// ---------------------------------------------------------------------------
// Invocation, RuntimeSpec, AcceleratorDescriptor
// ---------------------------------------------------------------------------

struct Invocation {
  std::string id;
  std::string runtime_ref;
  std::string dataset_ref;
  RunConfig run_config;
  std::string reply_to;
  TimestampLedger ledger;

  std::string key() const { return warm_key(runtime_ref, run_config); }

  void validate() const {
    if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "invocation id is empty");
    if (runtime_ref.empty()) throw Error(ErrorCode::kInvalidArgument, "runtime_ref is empty");
    if (dataset_ref.empty()) throw Error(ErrorCode::kInvalidArgument, "dataset_ref is empty");
  }

  friend bool operator==(const Invocation&, const Invocation&) = default;
};

struct RuntimeSpec {
  std::string id;
  std::string artifact_ref;
  std::set<std::string> supported_accelerator_types;
  std::map<std::string, TimeMs> cold_start_ms;

  bool supports(std::string_view accel_type) const {
    return supported_accelerator_types.count(std::string(accel_type)) > 0;
  }

  void validate() const {
    if (id.empty()) throw Error(ErrorCode::kInvalidConfig, "runtime id is empty");
    if (supported_accelerator_types.empty()) {
      throw Error(ErrorCode::kInvalidConfig,
                  "runtime " + id + ": supported_accelerator_types is empty");
    }
    for (const auto& type : supported_accelerator_types) {
      auto it = cold_start_ms.find(type);
      if (it == cold_start_ms.end()) {
        throw Error(ErrorCode::kInvalidConfig,
                    "runtime " + id + ": cold_start_ms missing for " + type);
      }
      if (it->second < 0) {
        throw Error(ErrorCode::kInvalidConfig,
                    "runtime " + id + ": negative cold_start_ms for " + type);
      }
    }
  }
};

struct AcceleratorDescriptor {
  std::string local_id;
  std::string accel_type;
  int capacity = 1;
  int in_use = 0;

  int free_slots() const { return capacity - in_use; }
};

// ---------------------------------------------------------------------------
// Clocks
// ---------------------------------------------------------------------------

class Clock {
 public:
  virtual ~Clock() = default;
  virtual TimeMs now() const = 0;
};

/// Time moves only when the event loop advances it.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(TimeMs start = 0) : now_(start) {}

  TimeMs now() const override { return now_.load(std::memory_order_acquire); }

  void advance_to(TimeMs t) {
    TimeMs cur = now_.load(std::memory_order_acquire);
    if (t < cur) {
      throw Error(ErrorCode::kInvalidArgument,
                  "virtual clock cannot move backwards: " + std::to_string(t) + " < " +
                      std::to_string(cur));
    }
    now_.store(t, std::memory_order_release);
  }

  void advance_by(TimeMs delta) {
    if (delta < 0) throw Error(ErrorCode::kInvalidArgument, "negative clock advance");
    advance_to(now() + delta);
  }

 private:
  std::atomic<TimeMs> now_;
};

/// Milliseconds since construction on the process-wide monotonic clock.
class SteadyClock final : public Clock {
 public:
  SteadyClock() : origin_(std::chrono::steady_clock::now()) {}

  TimeMs now() const override {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - origin_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point origin_;
};

}  // namespace hardless
