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

// External-process runtime backend (POSIX). Each runtime instance is one
// long-lived child process, kept warm between invocations:
//
//   spawn:   <exe> --dataset <dir>/dataset --config <dir>/config.json --out <dir>/result
//   child -> "READY\n"                         once initialised
//   node  -> "RUN <dataset> <config> <out>\n"  per invocation
//   child -> "DONE <exit-status>\n"            after writing <out>
//
// The node writes on the child's stdin and reads the child's stdout. EOF on
// stdin asks the child to exit. An artifact_ref of the form "file:<path>"
// names a local executable; any other ref is fetched from the object store.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <stdlib.h>
#include <sys/stat.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <time.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hardless/core.hpp"
#include "hardless/runtime.hpp"
#include "hardless/store.hpp"

namespace hardless {

struct ProcessBackendOptions {
  std::chrono::milliseconds ready_timeout{10'000};
  std::chrono::milliseconds run_timeout{600'000};
  std::filesystem::path work_root = std::filesystem::temp_directory_path();
};

class ProcessBackend final : public RuntimeBackend {
 public:
  ProcessBackend(ObjectStore& store, const Clock& clock, ProcessBackendOptions options = {})
      : store_(store), clock_(clock), options_(std::move(options)) {
    // A child that dies mid-protocol must surface as EPIPE, not kill us.
    ::signal(SIGPIPE, SIG_IGN);
  }

  ProcessBackend(const ProcessBackend&) = delete;
  ProcessBackend& operator=(const ProcessBackend&) = delete;

  ~ProcessBackend() override {
    std::map<std::string, std::shared_ptr<Child>> children;
    {
      std::lock_guard lock(mu_);
      children.swap(children_);
    }
    for (auto& [_, child] : children) terminate(*child);
  }

  TimeMs start(const RuntimeInstance& instance, const RuntimeSpec& spec, TimeMs /*t*/) override {
    auto child = std::make_shared<Child>();
    child->dir = make_work_dir();
    const std::string exe = resolve_artifact(spec.artifact_ref, child->dir);
    spawn(*child, exe);
    std::string line;
    if (!read_line(*child, line, options_.ready_timeout) || line != "READY") {
      const std::string why = line.empty() ? "no READY before exit or timeout" : "got '" + line + "'";
      terminate(*child);
      throw Error(ErrorCode::kSpawnFailure, "runtime " + spec.id + " (" + exe + "): " + why);
    }
    {
      std::lock_guard lock(mu_);
      children_[instance.instance_id] = child;
    }
    return clock_.now();
  }

  ExecutionResult execute(const RuntimeInstance& instance, Invocation& inv, TimeMs /*t*/) override {
    std::shared_ptr<Child> child = find(instance.instance_id);
    std::string data;
    try {
      data = store_.get(inv.dataset_ref);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotFound) throw;
      return ExecutionResult{ErrorCode::kDatasetNotFound, e.what(), {}, clock_.now()};
    }
    std::lock_guard run_lock(child->run_mu);
    const auto dataset = child->dir / "dataset";
    const auto config = child->dir / "config.json";
    const auto out = child->dir / "result";
    write_file(dataset, data);
    write_file(config, nlohmann::json(inv.run_config).dump());
    std::filesystem::remove(out);

    inv.ledger.stamp(Stamp::kEStart, clock_.now());
    const std::string cmd =
        "RUN " + dataset.string() + " " + config.string() + " " + out.string() + "\n";
    std::string line;
    bool replied = write_all(child->to_child, cmd) && read_line(*child, line, options_.run_timeout);
    const TimeMs e_end = clock_.now();
    inv.ledger.stamp(Stamp::kEEnd, e_end);
    if (!replied) {
      return ExecutionResult{ErrorCode::kExecutionFailure, "runtime process did not reply", {}, e_end};
    }
    int status = -1;
    if (line.rfind("DONE ", 0) != 0 || !parse_int(line.substr(5), status)) {
      return ExecutionResult{ErrorCode::kExecutionFailure, "bad reply '" + line + "'", {}, e_end};
    }
    if (status != 0) {
      return ExecutionResult{ErrorCode::kExecutionFailure,
                             "runtime exited with status " + std::to_string(status), {}, e_end};
    }
    std::string result;
    if (std::filesystem::exists(out)) result = read_file(out);
    const std::string ref = result_key(inv.id);
    store_.put(ref, result);
    return ExecutionResult{std::nullopt, {}, ref, e_end};
  }

  void stop(const RuntimeInstance& instance) override {
    std::shared_ptr<Child> child;
    {
      std::lock_guard lock(mu_);
      auto it = children_.find(instance.instance_id);
      if (it == children_.end()) return;
      child = it->second;
      children_.erase(it);
    }
    terminate(*child);
  }

  std::size_t live_processes() const {
    std::lock_guard lock(mu_);
    return children_.size();
  }

 private:
  struct Child {
    pid_t pid = -1;
    int to_child = -1;
    int from_child = -1;
    std::string buffer;
    std::filesystem::path dir;
    std::mutex run_mu;
  };

  std::shared_ptr<Child> find(const std::string& instance_id) const {
    std::lock_guard lock(mu_);
    auto it = children_.find(instance_id);
    if (it == children_.end()) {
      throw Error(ErrorCode::kInvalidState, "no running process for " + instance_id);
    }
    return it->second;
  }

  std::filesystem::path make_work_dir() const {
    std::string tmpl = (options_.work_root / "hardless-rt-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
      throw Error(ErrorCode::kSpawnFailure, "mkdtemp failed: " + std::string(std::strerror(errno)));
    }
    return tmpl;
  }

  std::string resolve_artifact(const std::string& ref, const std::filesystem::path& dir) const {
    if (ref.rfind("file:", 0) == 0) return ref.substr(5);
    std::string bytes;
    try {
      bytes = store_.get(ref);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSpawnFailure, "artifact " + ref + ": " + e.what());
    }
    const auto exe = dir / "runtime";
    int fd = ::open(exe.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0755);
    if (fd < 0) throw Error(ErrorCode::kSpawnFailure, "cannot write " + exe.string());
    bool ok = write_all(fd, bytes);
    ::close(fd);
    if (!ok) throw Error(ErrorCode::kSpawnFailure, "cannot write " + exe.string());
    return exe.string();
  }

  void spawn(Child& child, const std::string& exe) const {
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw Error(ErrorCode::kSpawnFailure, "pipe failed");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw Error(ErrorCode::kSpawnFailure, "pipe failed");
    }
    const std::vector<std::string> args = {exe,
                                           "--dataset", (child.dir / "dataset").string(),
                                           "--config", (child.dir / "config.json").string(),
                                           "--out", (child.dir / "result").string()};
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::kSpawnFailure, "fork failed");
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      // ETXTBSY: another thread may briefly hold the freshly written artifact open.
      for (int attempt = 0; attempt < 50; ++attempt) {
        ::execv(argv[0], argv.data());
        if (errno != ETXTBSY) break;
        struct timespec ts{0, 10'000'000};
        ::nanosleep(&ts, nullptr);
      }
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    child.pid = pid;
    child.to_child = in_pipe[1];
    child.from_child = out_pipe[0];
  }

  // Reads one '\n'-terminated line (terminator stripped). False on EOF/timeout.
  static bool read_line(Child& child, std::string& line, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      auto nl = child.buffer.find('\n');
      if (nl != std::string::npos) {
        line = child.buffer.substr(0, nl);
        child.buffer.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return false;
      struct pollfd pfd{child.from_child, POLLIN, 0};
      int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc <= 0) return false;
      char buf[4096];
      ssize_t n = ::read(child.from_child, buf, sizeof(buf));
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      child.buffer.append(buf, static_cast<std::size_t>(n));
    }
  }

  static bool write_all(int fd, std::string_view bytes) {
    while (!bytes.empty()) {
      ssize_t n = ::write(fd, bytes.data(), bytes.size());
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      bytes.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
  }

  static void terminate(Child& child) {
    if (child.to_child >= 0) ::close(child.to_child);
    child.to_child = -1;
    if (child.pid > 0) {
      int status = 0;
      bool reaped = false;
      for (int i = 0; i < 200 && !reaped; ++i) {
        pid_t r = ::waitpid(child.pid, &status, WNOHANG);
        if (r == child.pid || r < 0) {
          reaped = true;
          break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      if (!reaped) {
        ::kill(child.pid, SIGKILL);
        ::waitpid(child.pid, &status, 0);
      }
      child.pid = -1;
    }
    if (child.from_child >= 0) ::close(child.from_child);
    child.from_child = -1;
    std::error_code ec;
    if (!child.dir.empty()) std::filesystem::remove_all(child.dir, ec);
  }

  static void write_file(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  }

  static std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
  }

  static bool parse_int(const std::string& s, int& out) {
    try {
      std::size_t pos = 0;
      out = std::stoi(s, &pos);
      return pos == s.size();
    } catch (...) {
      return false;
    }
  }

  ObjectStore& store_;
  const Clock& clock_;
  ProcessBackendOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Child>> children_;
};

}  // namespace hardless
