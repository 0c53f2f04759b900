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

// Derived per-invocation metrics, RFast, periodic samples and file export.
//
//   RLat = r_end - r_start     ELat = e_end - e_start     DLat = e_start - r_start
//
// RFast is the number of successful completions in the trailing window
// divided by the window length in seconds.

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardless/core.hpp"

namespace hardless {

enum class OutcomeStatus { kSuccess, kFailure, kTimedOut, kRejected };

inline std::string_view to_string(OutcomeStatus s) {
  switch (s) {
    case OutcomeStatus::kSuccess: return "success";
    case OutcomeStatus::kFailure: return "failure";
    case OutcomeStatus::kTimedOut: return "timed_out";
    case OutcomeStatus::kRejected: return "rejected";
  }
  return "unknown";
}

/// The client's final view of one invocation.
struct OutcomeRecord {
  std::string invocation_id;
  std::string runtime_ref;
  std::string config_key;
  std::string node_id;
  std::string accel_type;
  std::string accel_id;
  TimestampLedger ledger;
  OutcomeStatus status = OutcomeStatus::kSuccess;
  std::string reason;
};

struct MetricsRecord {
  std::string invocation_id;
  std::optional<TimeMs> r_lat_ms;
  std::optional<TimeMs> e_lat_ms;
  std::optional<TimeMs> d_lat_ms;
  OutcomeStatus status = OutcomeStatus::kSuccess;
  std::string accel_type;
  std::string accel_id;
  std::string node_id;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

inline MetricsRecord derive(const OutcomeRecord& rec) {
  const TimestampLedger& l = rec.ledger;
  if (!l.monotone()) {
    throw Error(ErrorCode::kOrderViolation, "ledger of " + rec.invocation_id + " is not monotone");
  }
  if (rec.status == OutcomeStatus::kSuccess && !l.complete()) {
    throw Error(ErrorCode::kIncompleteLedger,
                "successful invocation " + rec.invocation_id + " lacks timestamps");
  }
  MetricsRecord m;
  m.invocation_id = rec.invocation_id;
  m.status = rec.status;
  m.accel_type = rec.accel_type;
  m.accel_id = rec.accel_id;
  m.node_id = rec.node_id;
  if (rec.status == OutcomeStatus::kTimedOut || rec.status == OutcomeStatus::kRejected) return m;
  auto diff = [&](Stamp later, Stamp earlier) -> std::optional<TimeMs> {
    auto a = l.get(later);
    auto b = l.get(earlier);
    if (!a || !b) return std::nullopt;
    return *a - *b;
  };
  m.r_lat_ms = diff(Stamp::kREnd, Stamp::kRStart);
  m.e_lat_ms = diff(Stamp::kEEnd, Stamp::kEStart);
  m.d_lat_ms = diff(Stamp::kEStart, Stamp::kRStart);
  return m;
}

inline constexpr TimeMs kDefaultRFastWindowMs = 10'000;

/// Successes per second over (t - window_ms, t]. completion_times must be
/// sorted ascending.
inline double rfast(std::span<const TimeMs> completion_times, TimeMs t,
                    TimeMs window_ms = kDefaultRFastWindowMs) {
  if (window_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "rfast window must be positive");
  auto hi = std::upper_bound(completion_times.begin(), completion_times.end(), t);
  auto lo = std::upper_bound(completion_times.begin(), hi, t - window_ms);
  const auto count = static_cast<double>(hi - lo);
  return count / (static_cast<double>(window_ms) / 1000.0);
}

struct TimeseriesSample {
  TimeMs t_ms = 0;
  std::uint64_t queued_count = 0;
  double r_fast = 0.0;
  std::uint64_t in_flight_count = 0;

  friend bool operator==(const TimeseriesSample&, const TimeseriesSample&) = default;
};

/// Element at index (n-1)/2 of the sorted values.
inline std::optional<TimeMs> lower_median(std::vector<TimeMs> values) {
  if (values.empty()) return std::nullopt;
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

struct AccelTypeSummary {
  std::optional<TimeMs> median_e_lat_ms;
  std::uint64_t count = 0;
};

struct RunSummary {
  std::map<std::string, AccelTypeSummary> per_accel_type;
  double max_r_fast = 0.0;
  std::uint64_t published = 0;
  std::uint64_t success = 0;
  std::uint64_t failure = 0;
  std::uint64_t timed_out = 0;
  std::uint64_t rejected = 0;
  double time_scale = 1.0;

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [type, s] : per_accel_type) {
      per[type] = {{"median_e_lat_ms", s.median_e_lat_ms ? nlohmann::json(*s.median_e_lat_ms)
                                                         : nlohmann::json(nullptr)},
                   {"count", s.count}};
    }
    return {{"per_accel_type", per}, {"max_r_fast", max_r_fast}, {"published", published},
            {"success", success},    {"failure", failure},       {"timed_out", timed_out},
            {"rejected", rejected},  {"time_scale", time_scale}};
  }
};

/// Per-type ELat medians and counts are over successful invocations.
inline RunSummary summarize(const std::vector<OutcomeRecord>& outcomes,
                            const std::vector<TimeseriesSample>& samples, double time_scale = 1.0) {
  RunSummary s;
  s.time_scale = time_scale;
  std::map<std::string, std::vector<TimeMs>> e_lats;
  for (const auto& o : outcomes) {
    ++s.published;
    switch (o.status) {
      case OutcomeStatus::kSuccess: {
        ++s.success;
        MetricsRecord m = derive(o);
        e_lats[o.accel_type].push_back(*m.e_lat_ms);
        break;
      }
      case OutcomeStatus::kFailure: ++s.failure; break;
      case OutcomeStatus::kTimedOut: ++s.timed_out; break;
      case OutcomeStatus::kRejected: ++s.rejected; break;
    }
  }
  for (auto& [type, values] : e_lats) {
    s.per_accel_type[type] = AccelTypeSummary{lower_median(values), values.size()};
  }
  for (const auto& sample : samples) s.max_r_fast = std::max(s.max_r_fast, sample.r_fast);
  return s;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

inline constexpr const char* kInvocationsHeader =
    "invocation_id,runtime_ref,config_key,node_id,accel_type,accel_local_id,r_start,n_start,"
    "e_start,e_end,n_end,r_end,status,r_lat,e_lat,d_lat";
inline constexpr const char* kTimeseriesHeader = "t_ms,queued,in_flight,r_fast";

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

inline std::string opt_ms(std::optional<TimeMs> v) { return v ? std::to_string(*v) : std::string(); }

inline std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace detail

inline std::string invocations_csv(const std::vector<OutcomeRecord>& outcomes) {
  using detail::csv_field;
  using detail::opt_ms;
  std::string out = std::string(kInvocationsHeader) + "\n";
  for (const auto& o : outcomes) {
    const MetricsRecord m = derive(o);
    const auto& l = o.ledger;
    out += csv_field(o.invocation_id) + "," + csv_field(o.runtime_ref) + "," +
           csv_field(o.config_key) + "," + csv_field(o.node_id) + "," + csv_field(o.accel_type) +
           "," + csv_field(o.accel_id) + "," + opt_ms(l.get(Stamp::kRStart)) + "," +
           opt_ms(l.get(Stamp::kNStart)) + "," + opt_ms(l.get(Stamp::kEStart)) + "," +
           opt_ms(l.get(Stamp::kEEnd)) + "," + opt_ms(l.get(Stamp::kNEnd)) + "," +
           opt_ms(l.get(Stamp::kREnd)) + "," + std::string(to_string(o.status)) + "," +
           opt_ms(m.r_lat_ms) + "," + opt_ms(m.e_lat_ms) + "," + opt_ms(m.d_lat_ms) + "\n";
  }
  return out;
}

inline std::string timeseries_csv(const std::vector<TimeseriesSample>& samples) {
  std::string out = std::string(kTimeseriesHeader) + "\n";
  for (const auto& s : samples) {
    out += std::to_string(s.t_ms) + "," + std::to_string(s.queued_count) + "," +
           std::to_string(s.in_flight_count) + "," + detail::fixed4(s.r_fast) + "\n";
  }
  return out;
}

struct ExportedFiles {
  std::filesystem::path invocations;
  std::filesystem::path timeseries;
  std::filesystem::path summary;
};

inline ExportedFiles export_run(const std::vector<OutcomeRecord>& outcomes,
                                const std::vector<TimeseriesSample>& samples,
                                const std::filesystem::path& out_dir, double time_scale = 1.0) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  ExportedFiles files{out_dir / "invocations.csv", out_dir / "timeseries.csv",
                      out_dir / "summary.json"};
  auto write = [](const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + p.string());
  };
  write(files.invocations, invocations_csv(outcomes));
  write(files.timeseries, timeseries_csv(samples));
  write(files.summary, summarize(outcomes, samples, time_scale).to_json().dump(2) + "\n");
  return files;
}

}  // namespace hardless
