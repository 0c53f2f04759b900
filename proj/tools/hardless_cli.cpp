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

#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "hardless/cli.hpp"
#include "hardless/queue.hpp"
#include "hardless/queue_protocol.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Hardless: serverless execution on heterogeneous accelerators"};
  app.require_subcommand(1);

  hardless::RunOptions run_opts;
  std::string mode = "sim";
  std::uint64_t seed = 0;
  std::string store_root;
  auto* run = app.add_subcommand("run", "Run a scenario and write invocations.csv, timeseries.csv, summary.json");
  run->add_option("--scenario", run_opts.scenario_path, "Scenario JSON file")->required();
  run->add_option("--mode", mode, "sim or realtime")->check(CLI::IsMember({"sim", "realtime"}));
  auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--time-scale", run_opts.time_scale, "Divide all durations by this factor (>= 1)");
  run->add_option("--out", run_opts.out_dir, "Output directory (HARDLESS_OUT overrides)");
  run->add_option("--store", store_root, "Object store directory (real-time mode)");

  std::string validate_path;
  std::string validate_mode = "sim";
  auto* validate = app.add_subcommand("validate", "Check a scenario file without running it");
  validate->add_option("--scenario", validate_path, "Scenario JSON file")->required();
  validate->add_option("--mode", validate_mode, "sim or realtime")->check(CLI::IsMember({"sim", "realtime"}));

  std::string socket_path;
  std::uint64_t capacity = 0;
  auto* serve = app.add_subcommand("serve-queue", "Serve an invocation queue on a Unix socket");
  serve->add_option("--socket", socket_path, "Socket path")->required();
  serve->add_option("--capacity", capacity, "Pending-entry bound (0 = unbounded)");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    run_opts.mode = mode == "realtime" ? hardless::RunMode::kRealtime : hardless::RunMode::kSim;
    if (*seed_opt) run_opts.seed = seed;
    if (!store_root.empty()) run_opts.store_root = store_root;
    return hardless::run_command(run_opts, std::cout, std::cerr);
  }
  if (*validate) {
    return hardless::validate_command(validate_path, validate_mode == "sim", std::cout);
  }
  if (*serve) {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
    hardless::InvocationQueue queue(capacity ? std::optional<std::uint64_t>(capacity) : std::nullopt);
    hardless::QueueServer server(queue, socket_path);
    std::cout << "serving queue on " << socket_path << std::endl;
    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
    return 0;
  }
  return 0;
}
