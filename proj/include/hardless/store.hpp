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

// Immutable object storage for runtime artifacts, data sets and results.
//
// Objects live in memory; when a root directory is configured every put is
// also written through to disk:
//   <root>/<percent-encoded key>        raw bytes
//   <root>/<percent-encoded key>.meta   {"size": N, "content_hash": "<hex>"}
// Every byte outside [A-Za-z0-9_~-] is encoded as %XX, so encoded names
// never contain '.' and cannot collide with a sidecar. Files dropped into
// the root by external tools are picked up on open; a missing sidecar is
// recomputed.

#include <openssl/evp.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hardless/core.hpp"

namespace hardless {

/// Lower-case hex SHA-256 of the given bytes.
inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kRuntimeError, "sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

inline std::string percent_encode_key(std::string_view key) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : key) {
    const bool plain = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                       (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '~';
    if (plain) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  return out;
}

inline std::optional<std::string> percent_decode_key(std::string_view name) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
  };
  std::string out;
  for (std::size_t i = 0; i < name.size(); ++i) {
    if (name[i] != '%') {
      out.push_back(name[i]);
      continue;
    }
    if (i + 2 >= name.size()) return std::nullopt;
    int hi = nibble(name[i + 1]);
    int lo = nibble(name[i + 2]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(static_cast<char>(hi * 16 + lo));
    i += 2;
  }
  return out;
}

/// Simulated data-fetch delay: size / bandwidth + fixed overhead, rounded
/// to the nearest millisecond. A bandwidth of 0 means transfer is free.
struct FetchLatencyModel {
  double bytes_per_ms = 0.0;
  TimeMs overhead_ms = 0;

  TimeMs latency(std::uint64_t size) const {
    const double transfer =
        bytes_per_ms > 0.0 ? static_cast<double>(size) / bytes_per_ms : 0.0;
    return overhead_ms + static_cast<TimeMs>(std::llround(transfer));
  }
};

struct StoredObject {
  std::string key;
  std::string bytes;
  std::uint64_t size = 0;
  std::string content_hash;
};

struct ObjectStoreOptions {
  std::optional<std::filesystem::path> root;
  std::optional<std::uint64_t> capacity_bytes;
  FetchLatencyModel fetch;
};

/// Result of a timed read: the bytes plus when the read completes.
struct Fetched {
  std::string bytes;
  TimeMs completed_at = 0;
};

class ObjectStore {
 public:
  explicit ObjectStore(ObjectStoreOptions options = {}) : options_(std::move(options)) {
    if (options_.root) load_root();
  }

  std::string put(const std::string& key, std::string_view bytes) {
    std::lock_guard lock(mu_);
    if (objects_.count(key)) throw Error(ErrorCode::kKeyExists, "object " + key + " exists");
    if (options_.capacity_bytes && used_bytes_ + bytes.size() > *options_.capacity_bytes) {
      throw Error(ErrorCode::kStorageFull,
                  "storing " + std::to_string(bytes.size()) + " bytes exceeds capacity");
    }
    StoredObject obj{key, std::string(bytes), bytes.size(), sha256_hex(bytes)};
    if (options_.root) write_through(obj);
    used_bytes_ += obj.size;
    std::string hash = obj.content_hash;
    objects_.emplace(key, std::move(obj));
    return hash;
  }

  std::string get(const std::string& key) const {
    std::lock_guard lock(mu_);
    return find_locked(key).bytes;
  }

  /// get() with the configured fetch-latency model applied.
  Fetched fetch(const std::string& key, TimeMs requested_at) const {
    std::lock_guard lock(mu_);
    const StoredObject& obj = find_locked(key);
    return Fetched{obj.bytes, requested_at + options_.fetch.latency(obj.size)};
  }

  StoredObject info(const std::string& key) const {
    std::lock_guard lock(mu_);
    return find_locked(key);
  }

  bool contains(const std::string& key) const {
    std::lock_guard lock(mu_);
    return objects_.count(key) > 0;
  }

  std::vector<std::string> list(std::string_view prefix) const {
    std::lock_guard lock(mu_);
    std::vector<std::string> keys;
    for (auto it = objects_.lower_bound(std::string(prefix)); it != objects_.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      keys.push_back(it->first);
    }
    return keys;
  }

  const FetchLatencyModel& fetch_model() const { return options_.fetch; }

 private:
  const StoredObject& find_locked(const std::string& key) const {
    auto it = objects_.find(key);
    if (it == objects_.end()) throw Error(ErrorCode::kNotFound, "no object " + key);
    return it->second;
  }

  void write_through(const StoredObject& obj) const {
    namespace fs = std::filesystem;
    const fs::path data = *options_.root / percent_encode_key(obj.key);
    const fs::path meta = fs::path(data.string() + ".meta");
    nlohmann::json m = {{"size", obj.size}, {"content_hash", obj.content_hash}};
    write_file_atomic(data, obj.bytes);
    write_file_atomic(meta, m.dump());
  }

  static void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
      if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::kIoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
  }

  void load_root() {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(*options_.root, ec);
    if (ec) {
      throw Error(ErrorCode::kIoFailure,
                  "cannot create store root " + options_.root->string() + ": " + ec.message());
    }
    for (const auto& dirent : fs::directory_iterator(*options_.root)) {
      if (!dirent.is_regular_file()) continue;
      const std::string name = dirent.path().filename().string();
      if (name.find('.') != std::string::npos) continue;  // sidecars and temp files
      auto key = percent_decode_key(name);
      if (!key) continue;
      std::ifstream in(dirent.path(), std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      StoredObject obj{*key, buf.str(), 0, ""};
      obj.size = obj.bytes.size();
      obj.content_hash = sha256_hex(obj.bytes);
      const fs::path meta = dirent.path().string() + ".meta";
      if (fs::exists(meta)) {
        std::ifstream min(meta);
        auto m = nlohmann::json::parse(min, nullptr, false);
        if (m.is_discarded() || m.value("content_hash", std::string()) != obj.content_hash) {
          throw Error(ErrorCode::kIoFailure, "sidecar for " + *key + " does not match contents");
        }
      } else {
        write_file_atomic(meta, nlohmann::json{{"size", obj.size},
                                               {"content_hash", obj.content_hash}}
                                    .dump());
      }
      used_bytes_ += obj.size;
      objects_.emplace(obj.key, std::move(obj));
    }
  }

  ObjectStoreOptions options_;
  mutable std::mutex mu_;
  std::map<std::string, StoredObject> objects_;
  std::uint64_t used_bytes_ = 0;
};

}  // namespace hardless
