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

// Line-delimited JSON protocol for the invocation queue, so nodes can run
// out of process. One UTF-8 JSON document per '\n'-terminated line.
//
// Requests carry a "verb":
//   {"verb":"PUBLISH","invocation":{...},"t":0}      -> {"ok":true,"entry":0}
//   {"verb":"SCAN","filter":["rtA"]}                 -> {"ok":true,"entries":[...]}
//   {"verb":"CLAIM","supported":["rtA"],"t":5}       -> {"ok":true,"invocation":{...}|null}
//   {"verb":"CLAIMCFG","key":"rtA#","t":5}           -> {"ok":true,"invocation":{...}|null}
//   {"verb":"STATS","t":5}                           -> {"ok":true,"stats":{...}}
// Failures reply {"ok":false,"error":"<ErrorCode name>","message":"..."}.

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "hardless/core.hpp"
#include "hardless/queue.hpp"
#include "hardless/scenario_io.hpp"

namespace hardless {

inline nlohmann::json scan_entry_to_json(const ScanEntry& e) {
  return {{"invocation_id", e.invocation_id},
          {"runtime_ref", e.runtime_ref},
          {"config_key", e.config_key},
          {"enqueued_at", e.enqueued_at}};
}

inline nlohmann::json stats_to_json(const QueueStats& s) {
  return {{"pending_count", s.pending_count},
          {"claimed_count", s.claimed_count},
          {"published_total", s.published_total}};
}

/// Applies one request line to a queue and returns the reply line (without
/// the trailing newline).
class QueueProtocolHandler {
 public:
  explicit QueueProtocolHandler(QueueApi& queue) : queue_(queue) {}

  std::string handle(std::string_view line) const {
    using nlohmann::json;
    json req = json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object()) {
      return failure(ErrorCode::kProtocolError, "request is not a JSON object");
    }
    try {
      const std::string verb = req.at("verb").get<std::string>();
      const TimeMs t = req.value("t", TimeMs{0});
      if (verb == "PUBLISH") {
        Invocation inv = invocation_from_json(req.at("invocation"));
        return ok({{"entry", queue_.publish(inv, t)}});
      }
      if (verb == "SCAN") {
        RuntimeFilter filter;
        if (req.contains("filter") && !req["filter"].is_null()) {
          filter = req["filter"].get<std::set<std::string>>();
        }
        json entries = json::array();
        for (const auto& e : queue_.scan(filter)) entries.push_back(scan_entry_to_json(e));
        return ok({{"entries", entries}});
      }
      if (verb == "CLAIM") {
        auto inv = queue_.claim_matching(req.at("supported").get<std::set<std::string>>(), t);
        return ok({{"invocation", inv ? invocation_to_json(*inv) : json(nullptr)}});
      }
      if (verb == "CLAIMCFG") {
        auto inv = queue_.claim_same_config(req.at("key").get<std::string>(), t);
        return ok({{"invocation", inv ? invocation_to_json(*inv) : json(nullptr)}});
      }
      if (verb == "STATS") return ok({{"stats", stats_to_json(queue_.stats(t))}});
      return failure(ErrorCode::kProtocolError, "unknown verb " + verb);
    } catch (const Error& e) {
      return failure(e.code(), e.what());
    } catch (const nlohmann::json::exception& e) {
      return failure(ErrorCode::kProtocolError, e.what());
    }
  }

 private:
  static std::string ok(nlohmann::json body) {
    body["ok"] = true;
    return body.dump();
  }

  static std::string failure(ErrorCode code, const std::string& message) {
    return nlohmann::json{{"ok", false}, {"error", std::string(to_string(code))}, {"message", message}}
        .dump();
  }

  QueueApi& queue_;
};

namespace detail {

inline bool send_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

// Reads up to the next '\n'; `buffer` carries leftovers between calls.
inline bool recv_line(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    auto nl = buffer.find('\n');
    if (nl != std::string::npos) {
      line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      return true;
    }
    char chunk[4096];
    ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

inline sockaddr_un unix_address(const std::filesystem::path& path) {
  sockaddr_un addr{};
  addr.sun_family = AF_UNIX;
  const std::string s = path.string();
  if (s.size() >= sizeof(addr.sun_path)) {
    throw Error(ErrorCode::kInvalidArgument, "socket path too long: " + s);
  }
  std::memcpy(addr.sun_path, s.c_str(), s.size() + 1);
  return addr;
}

}  // namespace detail

/// Serves a queue on a Unix domain socket, one thread per connection.
class QueueServer {
 public:
  QueueServer(QueueApi& queue, std::filesystem::path socket_path)
      : handler_(queue), path_(std::move(socket_path)) {
    std::filesystem::remove(path_);
    listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0) throw Error(ErrorCode::kIoFailure, "socket: " + std::string(std::strerror(errno)));
    sockaddr_un addr = detail::unix_address(path_);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 64) != 0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd_);
      throw Error(ErrorCode::kIoFailure, "cannot listen on " + path_.string() + ": " + why);
    }
    acceptor_ = std::thread([this] { accept_loop(); });
  }

  QueueServer(const QueueServer&) = delete;
  QueueServer& operator=(const QueueServer&) = delete;

  ~QueueServer() { stop(); }

  void stop() {
    if (stopped_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    {
      std::lock_guard lock(mu_);
      for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : connections_) {
      if (t.joinable()) t.join();
    }
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  void accept_loop() {
    while (!stopped_) {
      int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;
      }
      std::lock_guard lock(mu_);
      if (stopped_) {
        ::close(fd);
        return;
      }
      client_fds_.push_back(fd);
      connections_.emplace_back([this, fd] { serve(fd); });
    }
  }

  void serve(int fd) {
    std::string buffer;
    std::string line;
    while (detail::recv_line(fd, buffer, line)) {
      if (!detail::send_all(fd, handler_.handle(line) + "\n")) break;
    }
    std::lock_guard lock(mu_);
    client_fds_.remove(fd);
    ::close(fd);
  }

  QueueProtocolHandler handler_;
  std::filesystem::path path_;
  int listen_fd_ = -1;
  std::atomic<bool> stopped_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<int> client_fds_;
  std::vector<std::thread> connections_;
};

/// QueueApi over a QueueServer connection. Calls are serialized per client.
class RemoteQueue final : public QueueApi {
 public:
  explicit RemoteQueue(const std::filesystem::path& socket_path) {
    fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd_ < 0) throw Error(ErrorCode::kIoFailure, "socket: " + std::string(std::strerror(errno)));
    sockaddr_un addr = detail::unix_address(socket_path);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      const std::string why = std::strerror(errno);
      ::close(fd_);
      throw Error(ErrorCode::kIoFailure, "cannot connect to " + socket_path.string() + ": " + why);
    }
  }

  RemoteQueue(const RemoteQueue&) = delete;
  RemoteQueue& operator=(const RemoteQueue&) = delete;

  ~RemoteQueue() override {
    if (fd_ >= 0) ::close(fd_);
  }

  std::uint64_t publish(const Invocation& inv, TimeMs t) override {
    return call({{"verb", "PUBLISH"}, {"invocation", invocation_to_json(inv)}, {"t", t}})
        .at("entry")
        .get<std::uint64_t>();
  }

  std::vector<ScanEntry> scan(const RuntimeFilter& filter) const override {
    nlohmann::json req = {{"verb", "SCAN"}, {"filter", nullptr}};
    if (filter) req["filter"] = *filter;
    const nlohmann::json reply = call(req);
    std::vector<ScanEntry> out;
    for (const auto& e : reply.at("entries")) {
      out.push_back(ScanEntry{e.at("invocation_id"), e.at("runtime_ref"), e.at("config_key"),
                              e.at("enqueued_at")});
    }
    return out;
  }

  std::optional<Invocation> claim_matching(const std::set<std::string>& supported,
                                           TimeMs t) override {
    return claimed(call({{"verb", "CLAIM"}, {"supported", supported}, {"t", t}}));
  }

  std::optional<Invocation> claim_same_config(const std::string& key, TimeMs t) override {
    return claimed(call({{"verb", "CLAIMCFG"}, {"key", key}, {"t", t}}));
  }

  QueueStats stats(TimeMs t) const override {
    const auto s = call({{"verb", "STATS"}, {"t", t}}).at("stats");
    return QueueStats{s.at("pending_count"), s.at("claimed_count"), s.at("published_total")};
  }

 private:
  static std::optional<Invocation> claimed(const nlohmann::json& reply) {
    const auto& inv = reply.at("invocation");
    if (inv.is_null()) return std::nullopt;
    return invocation_from_json(inv);
  }

  nlohmann::json call(const nlohmann::json& request) const {
    std::lock_guard lock(mu_);
    std::string line;
    if (!detail::send_all(fd_, request.dump() + "\n") || !detail::recv_line(fd_, buffer_, line)) {
      throw Error(ErrorCode::kIoFailure, "queue connection closed");
    }
    auto reply = nlohmann::json::parse(line, nullptr, false);
    if (reply.is_discarded()) throw Error(ErrorCode::kProtocolError, "reply is not JSON");
    if (!reply.value("ok", false)) {
      auto code = error_code_from_string(reply.value("error", std::string()));
      std::string msg = reply.value("message", std::string());
      const std::string prefix = reply.value("error", std::string()) + ": ";
      if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
      throw Error(code.value_or(ErrorCode::kProtocolError), msg);
    }
    return reply;
  }

  int fd_ = -1;
  mutable std::mutex mu_;
  mutable std::string buffer_;
};

}  // namespace hardless
