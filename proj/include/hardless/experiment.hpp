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

// Composition of queue, store, nodes, client and sampler into one run.
//
// run_simulation() drives everything from a discrete-event loop on a
// VirtualClock: the run is a pure function of (scenario, arrival plan).
// run_realtime() uses the steady clock, one scheduling thread per node
// and the external-process runtime backend.

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <set>
#include <stop_token>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "hardless/bench.hpp"
#include "hardless/core.hpp"
#include "hardless/event_log.hpp"
#include "hardless/metrics.hpp"
#include "hardless/node.hpp"
#include "hardless/process_backend.hpp"
#include "hardless/queue.hpp"
#include "hardless/runtime.hpp"
#include "hardless/store.hpp"

namespace hardless {

struct PlannedArrival {
  TimeMs t = 0;
  std::string runtime_ref;
  std::string dataset_ref;
  RunConfig run_config;
};

inline std::vector<PlannedArrival> plan_arrivals(const Scenario& s) {
  std::vector<PlannedArrival> plan;
  for (const auto& a : arrival_schedule(s.phases, s.seed, s.poisson)) {
    plan.push_back(PlannedArrival{a.t, s.runtime_ref, s.dataset_ref, s.run_config});
  }
  return plan;
}

struct NodeStats {
  std::uint64_t claimed = 0;
  std::uint64_t completed = 0;
};

struct RunResult {
  std::vector<OutcomeRecord> outcomes;
  std::vector<TimeseriesSample> samples;
  std::vector<Event> events;
  RunSummary summary;
  TimeMs end_ms = 0;
  std::map<std::string, NodeStats> nodes;
  QueueStats queue_at_end;
};

struct RunOverrides {
  std::optional<std::vector<PlannedArrival>> arrivals;
  double time_scale = 1.0;  // recorded in the summary only
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::vector<BackendProfile> seeded_profiles(const Scenario& s) {
  std::vector<BackendProfile> out = s.profiles;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].seed = splitmix64(s.seed ^ splitmix64(out[i].seed + i));
  }
  return out;
}

inline std::string dataset_bytes(const std::string& ref, std::uint64_t size) {
  std::string bytes(size, '\0');
  std::uint64_t x = std::hash<std::string>{}(ref);
  for (auto& b : bytes) {
    x = splitmix64(x);
    b = static_cast<char>(x & 0xFF);
  }
  return bytes;
}

inline void seed_datasets(ObjectStore& store, const std::vector<PlannedArrival>& plan,
                          std::uint64_t size) {
  std::set<std::string> refs;
  for (const auto& a : plan) refs.insert(a.dataset_ref);
  for (const auto& ref : refs) {
    if (!store.contains(ref)) store.put(ref, dataset_bytes(ref, size));
  }
}

inline TimeMs run_end(const Scenario& s, const std::vector<PlannedArrival>& plan) {
  TimeMs end = s.total_duration_ms();
  for (const auto& a : plan) end = std::max(end, a.t + s.invocation_timeout_ms + 1);
  return end;
}

}  // namespace detail

/// Discrete-event loop. Events at equal times run in scheduling order.
class EventLoop {
 public:
  using Handler = std::function<void()>;

  void at(TimeMs t, Handler fn) {
    if (t < clock_.now()) t = clock_.now();
    events_.push(Item{t, seq_++, std::move(fn)});
  }

  void run() {
    while (!events_.empty()) {
      Item item = events_.top();
      events_.pop();
      clock_.advance_to(item.t);
      item.fn();
    }
  }

  const VirtualClock& clock() const { return clock_; }
  TimeMs now() const { return clock_.now(); }

 private:
  struct Item {
    TimeMs t;
    std::uint64_t seq;
    Handler fn;
    bool operator>(const Item& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
  };

  VirtualClock clock_;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
};

/// Runs a scenario in virtual time with simulated accelerators.
class SimulatedRun {
 public:
  explicit SimulatedRun(Scenario scenario, RunOverrides overrides = {})
      : scenario_(std::move(scenario)),
        overrides_(std::move(overrides)),
        catalog_(scenario_.catalog()),
        store_(ObjectStoreOptions{std::nullopt, std::nullopt, scenario_.store_fetch}),
        queue_(scenario_.queue_capacity),
        backend_(store_, detail::seeded_profiles(scenario_)),
        client_("client/bench", queue_, router_, loop_.clock(), scenario_.invocation_timeout_ms,
                &log_) {
    for (const auto& r : scenario_.runtimes) r.validate();
  }

  RunResult run() {
    const std::vector<PlannedArrival> plan =
        overrides_.arrivals ? *overrides_.arrivals : plan_arrivals(scenario_);
    detail::seed_datasets(store_, plan, scenario_.dataset_size_bytes);
    const TimeMs end = detail::run_end(scenario_, plan);

    for (const auto& cfg : scenario_.nodes) add_node(cfg, 0);
    for (const auto& change : scenario_.membership) {
      loop_.at(change.t_ms, [this, change] {
        if (change.action == MembershipChange::Action::kAdd) {
          add_node(change.node, loop_.now());
        } else {
          remove_node(change.node_id, loop_.now());
        }
      });
    }
    for (const auto& a : plan) {
      loop_.at(a.t, [this, a] {
        const std::string id = client_.publish(a.runtime_ref, a.dataset_ref, a.run_config, a.t);
        loop_.at(a.t + scenario_.invocation_timeout_ms + 1,
                 [this, id] { client_.expire(id, loop_.now()); });
        for (const auto& name : order_) {
          if (!nodes_.at(name)->shutting_down()) tick(name);
        }
      });
    }
    for (TimeMs t = 0; t <= end; t += scenario_.sample_period_ms) {
      loop_.at(t, [this] { sample(); });
    }
    loop_.at(end, [this] {
      for (const auto& name : order_) {
        if (!nodes_.at(name)->shutting_down()) remove_node(name, loop_.now());
      }
    });
    loop_.run();

    RunResult result;
    result.outcomes = client_.outcomes();
    result.samples = samples_;
    result.events = log_.snapshot();
    result.summary = summarize(result.outcomes, result.samples, overrides_.time_scale);
    result.end_ms = end;
    for (const auto& [name, node] : nodes_) {
      result.nodes[name] = NodeStats{node->claimed(), node->completed()};
    }
    result.queue_at_end = queue_.stats(end);
    return result;
  }

 private:
  void add_node(const NodeConfig& cfg, TimeMs t) {
    if (nodes_.count(cfg.node_id)) {
      throw Error(ErrorCode::kInvalidConfig, "node " + cfg.node_id + " joined twice");
    }
    nodes_.emplace(cfg.node_id,
                   std::make_unique<NodeManager>(cfg, catalog_, queue_, router_, &log_));
    order_.push_back(cfg.node_id);
    log_.append(Event{0, t, EventKind::kNodeJoin, cfg.node_id, "", "", "", "", ""});
    tick(cfg.node_id);
  }

  void remove_node(const std::string& name, TimeMs t) {
    auto it = nodes_.find(name);
    if (it == nodes_.end()) throw Error(ErrorCode::kInvalidConfig, "no node " + name + " to remove");
    it->second->begin_shutdown();
    tick(name);
    (void)t;
  }

  void tick(const std::string& name) {
    NodeManager& node = *nodes_.at(name);
    apply(name, node.schedule_tick(loop_.now()));
  }

  void apply(const std::string& name, std::vector<NodeAction> actions) {
    NodeManager& node = *nodes_.at(name);
    for (auto& action : actions) {
      switch (action.kind) {
        case NodeAction::Kind::kColdStart: {
          const RuntimeSpec& spec = catalog_.at(action.instance.runtime_ref);
          const TimeMs ready = backend_.start(action.instance, spec, loop_.now());
          const std::string id = action.instance.instance_id;
          loop_.at(ready, [this, name, id] {
            apply(name, nodes_.at(name)->on_ready(id, loop_.now()));
            tick(name);
          });
          break;
        }
        case NodeAction::Kind::kDispatch: {
          Invocation inv = std::move(*action.invocation);
          ExecutionResult result = backend_.execute(action.instance, inv, loop_.now());
          const std::string id = action.instance.instance_id;
          loop_.at(result.finished_at, [this, name, id, inv = std::move(inv), result]() mutable {
            apply(name, nodes_.at(name)->on_finished(id, std::move(inv), result, loop_.now()));
            tick(name);
          });
          break;
        }
        case NodeAction::Kind::kStop:
          backend_.stop(action.instance);
          break;
      }
    }
    if (node.drained()) {
      if (left_.insert(name).second) {
        log_.append(Event{0, loop_.now(), EventKind::kNodeLeave, name, "", "", "", "", ""});
      }
      return;
    }
    if (auto due = node.next_eviction_at(); due && scheduled_evictions_.insert({name, *due}).second) {
      loop_.at(*due, [this, name] { tick(name); });
    }
  }

  void sample() {
    const TimeMs t = loop_.now();
    const std::vector<TimeMs> done = client_.success_times();
    std::uint64_t in_flight = 0;
    for (const auto& [_, node] : nodes_) in_flight += node->in_flight();
    samples_.push_back(TimeseriesSample{t, queue_.stats(t).pending_count,
                                        rfast(done, t, scenario_.rfast_window_ms), in_flight});
  }

  Scenario scenario_;
  RunOverrides overrides_;
  RuntimeCatalog catalog_;
  EventLoop loop_;
  EventLog log_;
  ObjectStore store_;
  InvocationQueue queue_;
  CompletionRouter router_;
  SimulatedBackend backend_;
  BenchClient client_;
  std::map<std::string, std::unique_ptr<NodeManager>> nodes_;
  std::vector<std::string> order_;
  std::set<std::string> left_;
  std::set<std::pair<std::string, TimeMs>> scheduled_evictions_;
  std::vector<TimeseriesSample> samples_;
};

inline RunResult run_simulation(const Scenario& scenario, RunOverrides overrides = {}) {
  SimulatedRun run(scenario, std::move(overrides));
  return run.run();
}

// ---------------------------------------------------------------------------
// Real time
// ---------------------------------------------------------------------------

/// One node manager on its own polling thread. Backend calls run on worker
/// threads and report back through the node mutex.
class RealtimeNode {
 public:
  RealtimeNode(NodeConfig cfg, const RuntimeCatalog& catalog, QueueApi& queue,
               CompletionRouter& router, EventLog* log, RuntimeBackend& backend,
               const Clock& clock)
      : catalog_(catalog),
        backend_(backend),
        clock_(clock),
        node_(std::move(cfg), catalog, queue, router, log) {}

  RealtimeNode(const RealtimeNode&) = delete;
  RealtimeNode& operator=(const RealtimeNode&) = delete;

  ~RealtimeNode() {
    thread_.request_stop();
    if (thread_.joinable()) thread_.join();
    std::unique_lock lock(mu_);
    workers_done_.wait(lock, [this] { return workers_ == 0; });
  }

  void start() {
    thread_ = std::jthread([this](std::stop_token st) { loop(st); });
  }

  void shutdown() {
    std::lock_guard lock(mu_);
    node_.begin_shutdown();
  }

  /// Blocks until the node has drained or the timeout passes.
  bool wait_drained(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    return drained_cv_.wait_for(lock, timeout,
                                [this] { return node_.drained() && workers_ == 0; });
  }

  std::uint64_t in_flight() const {
    std::lock_guard lock(mu_);
    return node_.in_flight();
  }

  NodeStats stats() const {
    std::lock_guard lock(mu_);
    return NodeStats{node_.claimed(), node_.completed()};
  }

  const std::string& id() const { return node_.id(); }

 private:
  void loop(std::stop_token st) {
    const auto period = std::chrono::milliseconds(node_.config().poll_interval_ms);
    while (!st.stop_requested()) {
      {
        std::lock_guard lock(mu_);
        apply(node_.schedule_tick(clock_.now()));
        if (node_.drained() && workers_ == 0) {
          drained_cv_.notify_all();
        }
      }
      std::this_thread::sleep_for(period);
    }
  }

  // Requires mu_.
  void apply(std::vector<NodeAction> actions) {
    for (auto& action : actions) {
      ++workers_;
      std::thread([this, action = std::move(action)]() mutable { run_action(std::move(action)); })
          .detach();
    }
  }

  void run_action(NodeAction action) {
    const std::string id = action.instance.instance_id;
    switch (action.kind) {
      case NodeAction::Kind::kColdStart: {
        try {
          backend_.start(action.instance, catalog_.at(action.instance.runtime_ref), clock_.now());
          std::lock_guard lock(mu_);
          apply(node_.on_ready(id, clock_.now()));
        } catch (const Error& e) {
          std::lock_guard lock(mu_);
          apply(node_.on_start_failed(id, clock_.now(), e.what()));
        }
        break;
      }
      case NodeAction::Kind::kDispatch: {
        Invocation inv = std::move(*action.invocation);
        ExecutionResult result;
        try {
          result = backend_.execute(action.instance, inv, clock_.now());
        } catch (const Error& e) {
          result = ExecutionResult{e.code(), e.what(), {}, clock_.now()};
        }
        std::lock_guard lock(mu_);
        apply(node_.on_finished(id, std::move(inv), result, clock_.now()));
        break;
      }
      case NodeAction::Kind::kStop:
        backend_.stop(action.instance);
        break;
    }
    std::lock_guard lock(mu_);
    --workers_;
    workers_done_.notify_all();
    if (node_.drained() && workers_ == 0) drained_cv_.notify_all();
  }

  const RuntimeCatalog& catalog_;
  RuntimeBackend& backend_;
  const Clock& clock_;
  mutable std::mutex mu_;
  std::condition_variable workers_done_;
  std::condition_variable drained_cv_;
  std::size_t workers_ = 0;
  NodeManager node_;
  std::jthread thread_;
};

struct RealtimeOptions {
  ProcessBackendOptions process;
  std::optional<std::filesystem::path> store_root;
  std::chrono::milliseconds drain_timeout{60'000};
};

/// Runs a scenario against real child processes on the steady clock.
inline RunResult run_realtime(const Scenario& scenario, RealtimeOptions options = {},
                              RunOverrides overrides = {}) {
  for (const auto& r : scenario.runtimes) r.validate();
  const RuntimeCatalog catalog = scenario.catalog();
  SteadyClock clock;
  EventLog log;
  ObjectStore store(ObjectStoreOptions{options.store_root, std::nullopt, scenario.store_fetch});
  InvocationQueue queue(scenario.queue_capacity);
  CompletionRouter router;
  ProcessBackend backend(store, clock, options.process);
  const std::vector<PlannedArrival> plan =
      overrides.arrivals ? *overrides.arrivals : plan_arrivals(scenario);
  detail::seed_datasets(store, plan, scenario.dataset_size_bytes);
  const TimeMs end = detail::run_end(scenario, plan);

  BenchClient client("client/bench", queue, router, clock, scenario.invocation_timeout_ms, &log);
  std::map<std::string, std::unique_ptr<RealtimeNode>> nodes;
  std::vector<std::unique_ptr<RealtimeNode>> retired;
  auto add = [&](const NodeConfig& cfg) {
    auto node = std::make_unique<RealtimeNode>(cfg, catalog, queue, router, &log, backend, clock);
    log.append(Event{0, clock.now(), EventKind::kNodeJoin, cfg.node_id, "", "", "", "", ""});
    node->start();
    nodes.emplace(cfg.node_id, std::move(node));
  };
  auto remove = [&](const std::string& id) {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw Error(ErrorCode::kInvalidConfig, "no node " + id + " to remove");
    it->second->shutdown();
    retired.push_back(std::move(it->second));
    nodes.erase(it);
  };
  for (const auto& cfg : scenario.nodes) add(cfg);

  std::vector<MembershipChange> changes = scenario.membership;
  std::sort(changes.begin(), changes.end(),
            [](const auto& a, const auto& b) { return a.t_ms < b.t_ms; });
  std::size_t next_arrival = 0;
  std::size_t next_change = 0;
  TimeMs next_sample = 0;
  std::vector<TimeseriesSample> samples;
  for (;;) {
    const TimeMs now = clock.now();
    while (next_change < changes.size() && changes[next_change].t_ms <= now) {
      const auto& c = changes[next_change++];
      if (c.action == MembershipChange::Action::kAdd) {
        add(c.node);
      } else {
        remove(c.node_id);
      }
    }
    while (next_arrival < plan.size() && plan[next_arrival].t <= now) {
      const auto& a = plan[next_arrival++];
      client.publish(a.runtime_ref, a.dataset_ref, a.run_config, clock.now());
    }
    client.sweep(clock.now());
    if (now >= next_sample) {
      std::uint64_t in_flight = 0;
      for (const auto& [_, n] : nodes) in_flight += n->in_flight();
      for (const auto& n : retired) in_flight += n->in_flight();
      samples.push_back(TimeseriesSample{now, queue.stats(now).pending_count,
                                         rfast(client.success_times(), now, scenario.rfast_window_ms),
                                         in_flight});
      next_sample += scenario.sample_period_ms;
    }
    const bool all_published = next_arrival == plan.size();
    if (now >= end || (all_published && now >= scenario.total_duration_ms() &&
                       client.open_count() == 0)) {
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  const TimeMs finished_at = clock.now();
  std::vector<std::string> ids;
  for (const auto& [id, _] : nodes) ids.push_back(id);
  for (const auto& id : ids) remove(id);

  RunResult result;
  for (const auto& n : retired) {
    n->wait_drained(options.drain_timeout);
    result.nodes[n->id()] = n->stats();
  }
  client.sweep(clock.now() + scenario.invocation_timeout_ms + 1);
  result.outcomes = client.outcomes();
  result.samples = std::move(samples);
  result.events = log.snapshot();
  result.summary = summarize(result.outcomes, result.samples, overrides.time_scale);
  result.end_ms = finished_at;
  result.queue_at_end = queue.stats(finished_at);
  retired.clear();
  return result;
}

}  // namespace hardless
