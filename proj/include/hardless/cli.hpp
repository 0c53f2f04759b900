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

// Scenario runner behind the `hardless` command line tool.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "hardless/experiment.hpp"
#include "hardless/metrics.hpp"
#include "hardless/scenario_io.hpp"

namespace hardless {

enum class RunMode { kSim, kRealtime };

struct RunOptions {
  std::filesystem::path scenario_path;
  RunMode mode = RunMode::kSim;
  std::optional<std::uint64_t> seed;
  double time_scale = 1.0;
  std::filesystem::path out_dir = "hardless-out";
  std::optional<std::filesystem::path> store_root;  // realtime: artifacts and data sets
};

struct RunReport {
  ExportedFiles files;
  RunSummary summary;
};

/// Exit codes of the tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

/// HARDLESS_OUT, when set and non-empty, replaces opts.out_dir.
inline std::filesystem::path effective_out_dir(const RunOptions& opts) {
  if (const char* env = std::getenv("HARDLESS_OUT"); env && *env) return env;
  return opts.out_dir;
}

/// Loads, scales and executes a scenario, then exports its outputs.
/// Throws ConfigError for bad input and RuntimeError/IoFailure otherwise.
inline RunReport run_scenario(const RunOptions& opts) {
  if (opts.time_scale < 1.0) throw Error(ErrorCode::kConfigError, "time_scale: must be >= 1");
  Scenario scenario = load_scenario(opts.scenario_path, opts.mode == RunMode::kSim);
  if (opts.seed) scenario.seed = *opts.seed;
  scenario = scale_scenario(std::move(scenario), opts.time_scale);
  RunOverrides overrides;
  overrides.time_scale = opts.time_scale;

  RunResult result;
  if (opts.mode == RunMode::kSim) {
    result = run_simulation(scenario, overrides);
  } else {
    for (const auto& r : scenario.runtimes) {
      if (r.artifact_ref.empty()) {
        throw Error(ErrorCode::kConfigError,
                    "runtimes: real-time mode needs an artifact_ref for runtime " + r.id);
      }
    }
    RealtimeOptions rt;
    rt.store_root = opts.store_root;
    result = run_realtime(scenario, rt, overrides);
  }
  RunReport report;
  report.files = export_run(result.outcomes, result.samples, effective_out_dir(opts), opts.time_scale);
  report.summary = result.summary;
  return report;
}

/// Findings for a scenario file without running it. Empty when valid.
inline std::vector<std::string> validate_scenario_file(const std::filesystem::path& path,
                                                       bool simulated = true) {
  try {
    return validate_scenario(read_json_file(path), simulated);
  } catch (const Error& e) {
    return {e.what()};
  }
}

/// `run` entry point: prints a short report and returns an exit code.
inline int run_command(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  try {
    RunReport report = run_scenario(opts);
    out << "wrote " << report.files.invocations.string() << "\n"
        << "wrote " << report.files.timeseries.string() << "\n"
        << "wrote " << report.files.summary.string() << "\n"
        << report.summary.to_json().dump(2) << "\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfigError ? kExitConfigError : kExitRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

inline int validate_command(const std::filesystem::path& path, bool simulated, std::ostream& out) {
  const auto findings = validate_scenario_file(path, simulated);
  for (const auto& f : findings) out << f << "\n";
  if (findings.empty()) out << path.string() << ": ok\n";
  return findings.empty() ? kExitOk : kExitFindings;
}

}  // namespace hardless
