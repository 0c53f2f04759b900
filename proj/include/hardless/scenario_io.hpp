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

// JSON forms of the externally visible documents: scenario files, node
// configuration files and invocations (as carried by the queue protocol).
//
// Scenario files are checked field by field before anything is built;
// validate_scenario() returns every finding, parse_scenario() throws a
// ConfigError naming the first one.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardless/bench.hpp"
#include "hardless/core.hpp"
#include "hardless/node.hpp"
#include "hardless/runtime.hpp"

namespace hardless {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Invocation
// ---------------------------------------------------------------------------

inline json ledger_to_json(const TimestampLedger& l) {
  json j = json::object();
  for (std::size_t i = 0; i < kStampCount; ++i) {
    const auto s = static_cast<Stamp>(i);
    if (auto v = l.get(s)) j[std::string(to_string(s))] = *v;
  }
  return j;
}

inline TimestampLedger ledger_from_json(const json& j) {
  TimestampLedger l;
  for (std::size_t i = 0; i < kStampCount; ++i) {
    const auto s = static_cast<Stamp>(i);
    const std::string name(to_string(s));
    if (j.contains(name) && !j[name].is_null()) l.stamp(s, j[name].get<TimeMs>());
  }
  return l;
}

inline json invocation_to_json(const Invocation& inv) {
  return {{"id", inv.id},
          {"runtime_ref", inv.runtime_ref},
          {"dataset_ref", inv.dataset_ref},
          {"run_config", inv.run_config},
          {"reply_to", inv.reply_to},
          {"ledger", ledger_to_json(inv.ledger)}};
}

inline Invocation invocation_from_json(const json& j) {
  try {
    Invocation inv;
    inv.id = j.at("id").get<std::string>();
    inv.runtime_ref = j.at("runtime_ref").get<std::string>();
    inv.dataset_ref = j.at("dataset_ref").get<std::string>();
    inv.run_config = j.value("run_config", RunConfig{});
    inv.reply_to = j.value("reply_to", std::string());
    if (j.contains("ledger")) inv.ledger = ledger_from_json(j.at("ledger"));
    return inv;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocolError, std::string("bad invocation: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Field-checked reading
// ---------------------------------------------------------------------------

namespace detail {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& findings) : findings_(findings) {}

  void add(const std::string& path, const std::string& what) {
    findings_.push_back(path + ": " + what);
  }

  const json* field(const json& obj, const std::string& name, const std::string& path,
                    bool required) {
    if (!obj.is_object()) {
      add(path, "expected an object");
      return nullptr;
    }
    auto it = obj.find(name);
    if (it == obj.end() || it->is_null()) {
      if (required) add(join(path, name), "missing");
      return nullptr;
    }
    return &*it;
  }

  std::optional<std::string> str(const json& obj, const std::string& name, const std::string& path,
                                 bool required = true, bool non_empty = true) {
    const json* v = field(obj, name, path, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      add(join(path, name), "expected a string");
      return std::nullopt;
    }
    auto s = v->get<std::string>();
    if (non_empty && s.empty()) {
      add(join(path, name), "must not be empty");
      return std::nullopt;
    }
    return s;
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& name,
                                      const std::string& path, bool required, std::int64_t min) {
    const json* v = field(obj, name, path, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      add(join(path, name), "expected an integer");
      return std::nullopt;
    }
    auto x = v->get<std::int64_t>();
    if (x < min) {
      add(join(path, name), (min == 0 ? "must not be negative" : "must be >= " + std::to_string(min)));
      return std::nullopt;
    }
    return x;
  }

  std::optional<double> number(const json& obj, const std::string& name, const std::string& path,
                               bool required, double min) {
    const json* v = field(obj, name, path, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      add(join(path, name), "expected a number");
      return std::nullopt;
    }
    auto x = v->get<double>();
    if (x < min) {
      add(join(path, name), (min == 0.0 ? "must not be negative" : "must be >= " + std::to_string(min)));
      return std::nullopt;
    }
    return x;
  }

  const json* array(const json& obj, const std::string& name, const std::string& path,
                    bool required, bool non_empty) {
    const json* v = field(obj, name, path, required);
    if (!v) return nullptr;
    if (!v->is_array()) {
      add(join(path, name), "expected an array");
      return nullptr;
    }
    if (non_empty && v->empty()) {
      add(join(path, name), "must not be empty");
      return nullptr;
    }
    return v;
  }

  std::optional<RunConfig> run_config(const json& obj, const std::string& name,
                                      const std::string& path) {
    const json* v = field(obj, name, path, false);
    if (!v) return RunConfig{};
    if (!v->is_object()) {
      add(join(path, name), "expected an object of strings");
      return std::nullopt;
    }
    RunConfig cfg;
    for (auto it = v->begin(); it != v->end(); ++it) {
      if (!it.value().is_string()) {
        add(join(join(path, name), it.key()), "expected a string");
        return std::nullopt;
      }
      cfg[it.key()] = it.value().get<std::string>();
    }
    return cfg;
  }

  static std::string join(const std::string& path, const std::string& name) {
    return path.empty() ? name : path + "." + name;
  }

  static std::string at(const std::string& path, std::size_t i) {
    return path + "[" + std::to_string(i) + "]";
  }

 private:
  std::vector<std::string>& findings_;
};

inline NodeConfig read_node(Reader& r, const json& j, const std::string& path) {
  NodeConfig cfg;
  cfg.node_id = r.str(j, "node_id", path).value_or("");
  if (const json* accels = r.array(j, "accelerators", path, true, true)) {
    for (std::size_t i = 0; i < accels->size(); ++i) {
      const std::string p = Reader::at(Reader::join(path, "accelerators"), i);
      const json& a = (*accels)[i];
      AcceleratorDescriptor d;
      d.local_id = r.str(a, "local_id", p).value_or("");
      d.accel_type = r.str(a, "accel_type", p).value_or("");
      d.capacity = static_cast<int>(r.integer(a, "capacity", p, false, 1).value_or(1));
      cfg.accelerators.push_back(d);
    }
  }
  if (const json* rts = r.array(j, "runtimes", path, true, false)) {
    for (std::size_t i = 0; i < rts->size(); ++i) {
      if (!(*rts)[i].is_string()) {
        r.add(Reader::at(Reader::join(path, "runtimes"), i), "expected a string");
        continue;
      }
      cfg.runtimes.push_back((*rts)[i].get<std::string>());
    }
  }
  cfg.idle_timeout_ms = r.integer(j, "idle_timeout_ms", path, false, 0).value_or(30'000);
  cfg.poll_interval_ms = r.integer(j, "poll_interval_ms", path, false, 1).value_or(50);
  return cfg;
}

struct ScenarioParse {
  Scenario scenario;
  std::vector<std::string> findings;
};

inline ScenarioParse read_scenario(const json& j) {
  ScenarioParse out;
  Reader r(out.findings);
  Scenario& s = out.scenario;
  if (!j.is_object()) {
    r.add("scenario", "expected a JSON object");
    return out;
  }

  if (const json* phases = r.array(j, "phases", "", true, true)) {
    for (std::size_t i = 0; i < phases->size(); ++i) {
      const std::string p = Reader::at("phases", i);
      const json& ph = (*phases)[i];
      WorkloadPhase w;
      w.label = r.str(ph, "label", p, false, false).value_or("P" + std::to_string(i));
      w.duration_ms = r.integer(ph, "duration_ms", p, true, 1).value_or(1);
      w.target_trps = r.number(ph, "target_trps", p, true, 0.0).value_or(0.0);
      s.phases.push_back(w);
    }
  }
  s.runtime_ref = r.str(j, "runtime_ref", "").value_or("");
  s.dataset_ref = r.str(j, "dataset_ref", "").value_or("");
  s.run_config = r.run_config(j, "run_config", "").value_or(RunConfig{});
  s.invocation_timeout_ms = r.integer(j, "invocation_timeout_ms", "", false, 1).value_or(120'000);
  if (auto seed = r.integer(j, "seed", "", false, 0)) s.seed = static_cast<std::uint64_t>(*seed);

  std::map<std::string, BackendProfile> profiles;
  if (const json* ps = r.array(j, "profiles", "", false, false)) {
    for (std::size_t i = 0; i < ps->size(); ++i) {
      const std::string p = Reader::at("profiles", i);
      const json& pj = (*ps)[i];
      BackendProfile b;
      b.accel_type = r.str(pj, "accel_type", p).value_or("");
      b.cold_start_ms = r.integer(pj, "cold_start_ms", p, false, 0).value_or(5000);
      b.exec_median_ms = r.integer(pj, "exec_median_ms", p, true, 1).value_or(1);
      b.jitter = r.number(pj, "jitter", p, false, 0.0).value_or(0.0);
      b.fault_rate = r.number(pj, "fault_rate", p, false, 0.0).value_or(0.0);
      if (b.fault_rate > 1.0) r.add(Reader::join(p, "fault_rate"), "must be <= 1");
      b.seed = static_cast<std::uint64_t>(r.integer(pj, "seed", p, false, 0).value_or(i + 1));
      if (!profiles.emplace(b.accel_type, b).second) {
        r.add(Reader::join(p, "accel_type"), "duplicate profile for " + b.accel_type);
      }
      s.profiles.push_back(b);
    }
  }

  if (const json* rts = r.array(j, "runtimes", "", true, true)) {
    for (std::size_t i = 0; i < rts->size(); ++i) {
      const std::string p = Reader::at("runtimes", i);
      const json& rj = (*rts)[i];
      RuntimeSpec spec;
      spec.id = r.str(rj, "id", p).value_or("");
      spec.artifact_ref = r.str(rj, "artifact_ref", p, false).value_or("");
      if (const json* types = r.array(rj, "supported_accelerator_types", p, true, true)) {
        for (const auto& t : *types) {
          if (t.is_string()) spec.supported_accelerator_types.insert(t.get<std::string>());
          else r.add(Reader::join(p, "supported_accelerator_types"), "expected strings");
        }
      }
      if (const json* cs = r.field(rj, "cold_start_ms", p, false)) {
        if (!cs->is_object()) {
          r.add(Reader::join(p, "cold_start_ms"), "expected an object");
        } else {
          for (auto it = cs->begin(); it != cs->end(); ++it) {
            if (!it.value().is_number_integer() || it.value().get<TimeMs>() < 0) {
              r.add(Reader::join(Reader::join(p, "cold_start_ms"), it.key()),
                    "expected a non-negative integer");
              continue;
            }
            spec.cold_start_ms[it.key()] = it.value().get<TimeMs>();
          }
        }
      }
      for (const auto& type : spec.supported_accelerator_types) {
        if (spec.cold_start_ms.count(type)) continue;
        auto prof = profiles.find(type);
        if (prof != profiles.end()) {
          spec.cold_start_ms[type] = prof->second.cold_start_ms;
        } else {
          r.add(Reader::join(p, "cold_start_ms"), "no cold start for " + type);
        }
      }
      s.runtimes.push_back(spec);
    }
  }

  if (const json* nodes = r.array(j, "nodes", "", true, true)) {
    for (std::size_t i = 0; i < nodes->size(); ++i) {
      s.nodes.push_back(read_node(r, (*nodes)[i], Reader::at("nodes", i)));
    }
  }

  s.dataset_size_bytes =
      static_cast<std::uint64_t>(r.integer(j, "dataset_size_bytes", "", false, 0).value_or(1024));
  if (const json* st = r.field(j, "store", "", false)) {
    s.store_fetch.bytes_per_ms = r.number(*st, "bandwidth_bytes_per_ms", "store", false, 0.0).value_or(0.0);
    s.store_fetch.overhead_ms = r.integer(*st, "overhead_ms", "store", false, 0).value_or(0);
  }
  if (auto cap = r.integer(j, "queue_capacity", "", false, 1)) {
    s.queue_capacity = static_cast<std::uint64_t>(*cap);
  }
  s.sample_period_ms = r.integer(j, "sample_period_ms", "", false, 1).value_or(1000);
  s.rfast_window_ms = r.integer(j, "rfast_window_ms", "", false, 1).value_or(kDefaultRFastWindowMs);
  if (const json* p = r.field(j, "poisson", "", false)) {
    if (p->is_boolean()) s.poisson = p->get<bool>();
    else r.add("poisson", "expected a boolean");
  }

  if (const json* ms = r.array(j, "membership", "", false, false)) {
    for (std::size_t i = 0; i < ms->size(); ++i) {
      const std::string p = Reader::at("membership", i);
      const json& mj = (*ms)[i];
      MembershipChange c;
      c.t_ms = r.integer(mj, "t_ms", p, true, 0).value_or(0);
      const std::string action = r.str(mj, "action", p).value_or("");
      if (action == "add") {
        c.action = MembershipChange::Action::kAdd;
        if (const json* n = r.field(mj, "node", p, true)) c.node = read_node(r, *n, Reader::join(p, "node"));
      } else if (action == "remove") {
        c.action = MembershipChange::Action::kRemove;
        c.node_id = r.str(mj, "node_id", p).value_or("");
      } else if (!action.empty()) {
        r.add(Reader::join(p, "action"), "expected \"add\" or \"remove\"");
      }
      s.membership.push_back(c);
    }
  }
  return out;
}

// Checks that need the whole document: references between sections.
inline void cross_check(ScenarioParse& parsed) {
  const Scenario& s = parsed.scenario;
  auto& f = parsed.findings;
  const RuntimeCatalog catalog = s.catalog();
  if (!s.runtime_ref.empty() && !catalog.count(s.runtime_ref)) {
    f.push_back("runtime_ref: runtime " + s.runtime_ref + " is not defined in runtimes");
  }
  std::vector<NodeConfig> all_nodes = s.nodes;
  std::set<std::string> ids;
  for (const auto& m : s.membership) {
    if (m.action == MembershipChange::Action::kAdd) all_nodes.push_back(m.node);
  }
  bool runnable = false;
  for (std::size_t i = 0; i < all_nodes.size(); ++i) {
    const NodeConfig& n = all_nodes[i];
    if (!n.node_id.empty() && !ids.insert(n.node_id).second) {
      f.push_back("nodes: duplicate node_id " + n.node_id);
    }
    for (const auto& finding : check_node_config(n, catalog)) f.push_back("nodes: " + finding);
    const bool lists = std::find(n.runtimes.begin(), n.runtimes.end(), s.runtime_ref) != n.runtimes.end();
    if (lists && catalog.count(s.runtime_ref)) {
      for (const auto& a : n.accelerators) {
        if (catalog.at(s.runtime_ref).supports(a.accel_type)) runnable = true;
      }
    }
  }
  if (!s.runtime_ref.empty() && catalog.count(s.runtime_ref) && !runnable) {
    f.push_back("runtime_ref: runtime " + s.runtime_ref + " is not runnable on any node");
  }
  for (const auto& m : s.membership) {
    if (m.action == MembershipChange::Action::kRemove && !m.node_id.empty() && !ids.count(m.node_id)) {
      f.push_back("membership: removes unknown node " + m.node_id);
    }
  }
}

}  // namespace detail

/// Every schema and cross-field problem in a scenario document. When
/// `simulated` is set, each accelerator type used by a node must also have
/// a simulation profile.
inline std::vector<std::string> validate_scenario(const json& j, bool simulated = true) {
  detail::ScenarioParse parsed = detail::read_scenario(j);
  if (parsed.findings.empty()) {
    detail::cross_check(parsed);
    if (simulated) {
      std::set<std::string> have;
      for (const auto& p : parsed.scenario.profiles) have.insert(p.accel_type);
      std::set<std::string> need;
      for (const auto& n : parsed.scenario.nodes) {
        for (const auto& a : n.accelerators) need.insert(a.accel_type);
      }
      for (const auto& m : parsed.scenario.membership) {
        for (const auto& a : m.node.accelerators) need.insert(a.accel_type);
      }
      for (const auto& t : need) {
        if (!t.empty() && !have.count(t)) {
          parsed.findings.push_back("profiles: no simulation profile for accelerator type " + t);
        }
      }
    }
  }
  return parsed.findings;
}

inline Scenario parse_scenario(const json& j, bool simulated = true) {
  auto findings = validate_scenario(j, simulated);
  if (!findings.empty()) throw Error(ErrorCode::kConfigError, findings.front());
  return detail::read_scenario(j).scenario;
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot open " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::kConfigError, path.string() + ": not valid JSON");
  return j;
}

inline Scenario load_scenario(const std::filesystem::path& path, bool simulated = true) {
  return parse_scenario(read_json_file(path), simulated);
}

/// Reads a standalone node configuration file.
inline NodeConfig parse_node_config(const json& j) {
  std::vector<std::string> findings;
  detail::Reader r(findings);
  NodeConfig cfg = detail::read_node(r, j, "node");
  if (!findings.empty()) throw Error(ErrorCode::kConfigError, findings.front());
  return cfg;
}

inline json node_config_to_json(const NodeConfig& cfg) {
  json accels = json::array();
  for (const auto& a : cfg.accelerators) {
    accels.push_back({{"local_id", a.local_id}, {"accel_type", a.accel_type}, {"capacity", a.capacity}});
  }
  return {{"node_id", cfg.node_id},
          {"accelerators", accels},
          {"runtimes", cfg.runtimes},
          {"idle_timeout_ms", cfg.idle_timeout_ms},
          {"poll_interval_ms", cfg.poll_interval_ms}};
}

}  // namespace hardless
