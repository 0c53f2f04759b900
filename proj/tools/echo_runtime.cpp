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

// Minimal external-process runtime used for real-time runs and tests.
//
// Speaks the node control protocol on stdin/stdout: prints READY once
// started, then answers each "RUN <dataset> <config> <out>" line by writing
// a small result file (input size, pid, config) and replying "DONE <status>".
// A run configuration containing "fail": "1" answers with status 1. The
// environment variables ECHO_RUNTIME_DELAY_MS and ECHO_RUNTIME_STARTUP_MS
// add artificial execution and startup delays.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

namespace {

long env_ms(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::strtol(v, nullptr, 10) : 0;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main() {
  std::ios::sync_with_stdio(false);
  if (long startup = env_ms("ECHO_RUNTIME_STARTUP_MS"); startup > 0) {
    std::this_thread::sleep_for(std::chrono::milliseconds(startup));
  }
  const long delay = env_ms("ECHO_RUNTIME_DELAY_MS");
  std::cout << "READY\n" << std::flush;

  std::string line;
  while (std::getline(std::cin, line)) {
    std::istringstream cmd(line);
    std::string verb, dataset, config, out;
    cmd >> verb >> dataset >> config >> out;
    if (verb != "RUN") {
      std::cout << "DONE 2\n" << std::flush;
      continue;
    }
    const std::string data = slurp(dataset);
    const std::string cfg = slurp(config);
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    if (cfg.find("\"fail\":\"1\"") != std::string::npos) {
      std::cout << "DONE 1\n" << std::flush;
      continue;
    }
    std::ofstream(out, std::ios::binary)
        << "bytes=" << data.size() << " pid=" << ::getpid() << " config=" << cfg << "\n";
    std::cout << "DONE 0\n" << std::flush;
  }
  return 0;
}
