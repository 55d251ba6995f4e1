// Copyright 2026 The qmat Authors.
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

#include "qmat/runtime.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <deque>
#include <list>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <thread>
#include <utility>

namespace qmat {

// ---------------------------------------------------------------------------
// Registry

TaskType TaskRegistry::add(std::string name, TaskExecutor executor) {
  if (by_name_.contains(name)) throw std::invalid_argument("task type already registered: " + name);
  if (entries_.size() >= 0xffff) throw std::length_error("too many task types");
  auto index = static_cast<std::uint16_t>(entries_.size());
  by_name_.emplace(name, index);
  entries_.push_back({std::move(name), std::move(executor)});
  return TaskType{index};
}

bool TaskRegistry::contains(std::string_view name) const { return by_name_.contains(std::string(name)); }

TaskType TaskRegistry::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) throw std::invalid_argument("unknown task type: " + std::string(name));
  return TaskType{it->second};
}

TaskFault::TaskFault(std::string task_type, int level, int worker, const std::string& what)
    : std::runtime_error("task '" + task_type + "' at level " + std::to_string(level) + " on worker " +
                         std::to_string(worker) + " failed: " + what),
      task_type_(std::move(task_type)),
      level_(level),
      worker_(worker) {}

// ---------------------------------------------------------------------------
// Internal state

struct Runtime::Task {
  std::uint16_t type = 0;
  std::uint8_t n_inputs = 0;
  std::int32_t level = 0;
  std::uint32_t home = 0;
  std::array<ChunkId, kMaxInputs> inputs{};
  ChunkId output;
  ChunkId result;
  // Unresolved inputs plus one token held until the parent finishes.
  std::atomic<int> pending{0};
  std::vector<Task*> spawned;
  Task* next_free = nullptr;
};

namespace {

// Per executing thread counters, merged into RunStats after a run.
struct ThreadState {
  int worker = 0;
  std::vector<std::uint64_t> counts;    // type * kMaxLevels + level
  std::vector<std::uint64_t> sublevel;  // by absolute level
  std::uint64_t tasks = 0;
  std::uint64_t leaf_fma = 0;
  std::uint64_t device_fma = 0;
  std::uint64_t cpu_batches = 0;
  std::uint64_t device_batches = 0;
  double busy = 0;
};

}  // namespace

struct Runtime::Impl {
  struct Waiter {
    Task* task;       // task waiting for an input, or
    ChunkId forward;  // promise that adopts the same final id
  };

  struct Slot {
    enum class Kind : std::uint8_t { data, pending, resolved };
    Kind kind = Kind::data;
    ChunkData data;
    ChunkId target;  // final id once resolved (a data id or NIL)
    std::vector<Waiter> waiters;
  };

  struct CacheEntry {
    ChunkId id;
    ChunkData data;
  };

  struct Worker {
    mutable std::mutex store_mu;
    std::deque<Slot> slots;

    std::mutex cache_mu;
    std::list<CacheEntry> lru;  // front = most recently used
    std::unordered_map<ChunkId, std::list<CacheEntry>::iterator, ChunkIdHash> cache_index;
    std::size_t cache_bytes = 0;

    std::mutex deque_mu;
    std::deque<Task*> ready;

    std::atomic<std::uint64_t> bytes_received{0};
    std::atomic<std::uint64_t> remote_fetches{0};
    std::atomic<std::uint64_t> cache_hits{0};

    std::unique_ptr<leaf::DeviceManager> devices;
  };

  Runtime& rt;
  std::vector<std::unique_ptr<Worker>> workers;

  std::mutex pool_mu;
  std::vector<std::unique_ptr<Task[]>> pool_blocks;
  Task* free_list = nullptr;

  std::atomic<std::int64_t> outstanding{0};
  std::atomic<std::int64_t> queued{0};
  std::vector<Task*> driver_tasks;

  std::mutex fault_mu;
  std::optional<TaskFault> fault;
  std::atomic<bool> abort{false};
  bool poisoned = false;

  explicit Impl(Runtime& r) : rt(r) {
    for (int w = 0; w < r.config_.workers; ++w) {
      auto worker = std::make_unique<Worker>();
      worker->devices = std::make_unique<leaf::DeviceManager>(r.config_.devices);
      workers.push_back(std::move(worker));
    }
  }

  Worker& worker(std::uint32_t w) const {
    if (w >= workers.size()) throw std::logic_error("chunk id names an unknown worker");
    return *workers[w];
  }

  static Slot& slot_locked(Worker& w, ChunkId id) {
    if (id.serial() >= w.slots.size()) throw std::logic_error("fetch of unregistered chunk id");
    return w.slots[id.serial()];
  }

  // -- chunks --------------------------------------------------------------

  ChunkId add_slot(int w, Slot slot) {
    Worker& wk = worker(static_cast<std::uint32_t>(w));
    std::lock_guard lock(wk.store_mu);
    auto serial = static_cast<std::uint32_t>(wk.slots.size());
    wk.slots.push_back(std::move(slot));
    return make_id(static_cast<std::uint32_t>(w), serial);
  }

  // Follows a resolved promise to its final id. Throws for pending promises.
  ChunkId final_id(ChunkId id) const {
    if (id.is_nil()) return id;
    Worker& wk = worker(id.owner());
    std::lock_guard lock(wk.store_mu);
    Slot& s = slot_locked(wk, id);
    switch (s.kind) {
      case Slot::Kind::data: return id;
      case Slot::Kind::resolved: return s.target;
      case Slot::Kind::pending: break;
    }
    throw std::logic_error("chunk id is an unresolved promise");
  }

  ChunkData data_of(ChunkId final) const {
    Worker& wk = worker(final.owner());
    std::lock_guard lock(wk.store_mu);
    return slot_locked(wk, final).data;
  }

  ChunkData fetch(int requester, ChunkId id, TaskContext::Accum* accum) {
    if (id.is_nil()) throw std::logic_error("fetch of NIL chunk id");
    ChunkId fin = final_id(id);
    if (fin.is_nil()) throw std::logic_error("fetch of NIL chunk id");
    if (static_cast<int>(fin.owner()) == requester) return data_of(fin);

    Worker& me = worker(static_cast<std::uint32_t>(requester));
    {
      std::lock_guard lock(me.cache_mu);
      auto it = me.cache_index.find(fin);
      if (it != me.cache_index.end()) {
        me.lru.splice(me.lru.begin(), me.lru, it->second);
        me.cache_hits.fetch_add(1, std::memory_order_relaxed);
        return it->second->data;
      }
    }
    ChunkData data = data_of(fin);
    me.bytes_received.fetch_add(data.size(), std::memory_order_relaxed);
    me.remote_fetches.fetch_add(1, std::memory_order_relaxed);
    if (accum) {
      accum->remote_bytes += data.size();
      accum->remote_fetches += 1;
    }
    const std::size_t budget = rt.config_.cache_budget;
    if (data.size() <= budget) {
      std::lock_guard lock(me.cache_mu);
      if (!me.cache_index.contains(fin)) {
        while (me.cache_bytes + data.size() > budget) {
          const CacheEntry& victim = me.lru.back();
          me.cache_bytes -= victim.data.size();
          me.cache_index.erase(victim.id);
          me.lru.pop_back();
        }
        me.lru.push_front({fin, data});
        me.cache_index.emplace(fin, me.lru.begin());
        me.cache_bytes += data.size();
      }
    }
    return data;
  }

  // -- task records --------------------------------------------------------

  Task* alloc_task() {
    std::lock_guard lock(pool_mu);
    if (!free_list) {
      constexpr std::size_t kBlock = 1024;
      auto block = std::make_unique<Task[]>(kBlock);
      for (std::size_t i = 0; i < kBlock; ++i) {
        block[i].next_free = free_list;
        free_list = &block[i];
      }
      pool_blocks.push_back(std::move(block));
    }
    Task* t = free_list;
    free_list = t->next_free;
    t->next_free = nullptr;
    return t;
  }

  void free_task(Task* t) {
    t->spawned.clear();
    t->inputs = {};
    t->output = ChunkId();
    t->result = ChunkId();
    std::lock_guard lock(pool_mu);
    t->next_free = free_list;
    free_list = t;
  }

  Task* create_task(TaskType type, std::span<const ChunkId> inputs, int level, int home) {
    if (inputs.size() > static_cast<std::size_t>(kMaxInputs))
      throw std::invalid_argument("task has too many inputs");
    if (type.index >= rt.registry_.size()) throw std::invalid_argument("unknown task type index");
    if (level >= kMaxLevels) throw std::length_error("task tree deeper than supported");

    Task* t = alloc_task();
    t->type = type.index;
    t->n_inputs = static_cast<std::uint8_t>(inputs.size());
    t->level = level;
    t->home = static_cast<std::uint32_t>(home);
    std::copy(inputs.begin(), inputs.end(), t->inputs.begin());
    t->pending.store(1, std::memory_order_relaxed);

    Slot promise;
    promise.kind = Slot::Kind::pending;
    t->output = add_slot(home, std::move(promise));

    for (ChunkId in : inputs) {
      if (in.is_nil()) continue;
      Worker& wk = worker(in.owner());
      std::lock_guard lock(wk.store_mu);
      Slot& s = slot_locked(wk, in);
      if (s.kind == Slot::Kind::pending) {
        t->pending.fetch_add(1, std::memory_order_relaxed);
        s.waiters.push_back({t, ChunkId()});
      }
    }
    outstanding.fetch_add(1, std::memory_order_acq_rel);
    return t;
  }

  void make_ready(Task* t) {
    Worker& wk = *workers[t->home];
    std::lock_guard lock(wk.deque_mu);
    wk.ready.push_back(t);
    queued.fetch_add(1, std::memory_order_acq_rel);
  }

  void release_token(Task* t) {
    if (t->pending.fetch_sub(1, std::memory_order_acq_rel) == 1) make_ready(t);
  }

  void resolve_promise(ChunkId promise, ChunkId final) {
    std::vector<Waiter> waiters;
    {
      Worker& wk = worker(promise.owner());
      std::lock_guard lock(wk.store_mu);
      Slot& s = slot_locked(wk, promise);
      s.kind = Slot::Kind::resolved;
      s.target = final;
      waiters.swap(s.waiters);
    }
    for (const Waiter& w : waiters) {
      if (w.task)
        release_token(w.task);
      else
        resolve_promise(w.forward, final);
    }
  }

  // Makes `promise` resolve to whatever `value` is or will become.
  void forward(ChunkId promise, ChunkId value) {
    if (value.is_nil()) return resolve_promise(promise, value);
    ChunkId target;
    {
      Worker& wk = worker(value.owner());
      std::lock_guard lock(wk.store_mu);
      Slot& s = slot_locked(wk, value);
      switch (s.kind) {
        case Slot::Kind::data: target = value; break;
        case Slot::Kind::resolved: target = s.target; break;
        case Slot::Kind::pending: s.waiters.push_back({nullptr, promise}); return;
      }
    }
    resolve_promise(promise, target);
  }

  Task* take(int w, std::mt19937_64& rng) {
    {
      Worker& own = *workers[w];
      std::lock_guard lock(own.deque_mu);
      if (!own.ready.empty()) {
        Task* t = own.ready.back();
        own.ready.pop_back();
        queued.fetch_sub(1, std::memory_order_acq_rel);
        return t;
      }
    }
    const int p = static_cast<int>(workers.size());
    if (p < 2) return nullptr;
    int victim = static_cast<int>(rng() % static_cast<std::uint64_t>(p - 1));
    if (victim >= w) ++victim;
    Worker& v = *workers[victim];
    std::lock_guard lock(v.deque_mu);
    if (v.ready.empty()) return nullptr;
    Task* t = v.ready.front();
    v.ready.pop_front();
    queued.fetch_sub(1, std::memory_order_acq_rel);
    return t;
  }

  void record_fault(const std::string& type, int level, int w, const std::string& what) {
    std::lock_guard lock(fault_mu);
    if (!fault) fault.emplace(type, level, w, what);
    abort.store(true);
  }

  // Runs the executor; returns the modelled cost of the task.
  double execute(Task* t, ThreadState& ts) {
    std::array<ChunkId, kMaxInputs> in{};
    for (int i = 0; i < t->n_inputs; ++i) in[i] = final_id(t->inputs[i]);
    TaskType type{t->type};
    TaskContext ctx(rt, *t, ts.worker, t->level, &ts);
    try {
      t->result = rt.registry_.executor(type)(ctx, std::span<const ChunkId>(in.data(), t->n_inputs));
    } catch (const std::exception& e) {
      record_fault(rt.registry_.name(type), t->level, ts.worker, e.what());
      t->result = ChunkId();
    }
    ts.counts[static_cast<std::size_t>(t->type) * kMaxLevels + t->level] += 1;
    ts.tasks += 1;
    const CostModel& cm = rt.config_.cost;
    return cm.task_overhead + static_cast<double>(ctx.accum_.cpu_fma) * cm.seconds_per_fma +
           static_cast<double>(ctx.accum_.remote_bytes) * cm.seconds_per_byte +
           static_cast<double>(ctx.accum_.remote_fetches) * cm.fetch_latency + ctx.accum_.device_seconds;
  }

  void finish(Task* t) {
    for (Task* child : t->spawned) release_token(child);
    forward(t->output, t->result);
    free_task(t);
    outstanding.fetch_sub(1, std::memory_order_acq_rel);
  }

  // -- schedules -------------------------------------------------------------

  double run_simulated(std::vector<ThreadState>& states) {
    struct Event {
      double time;
      int kind;  // 0 = task completion, 1 = look for work
      int thread;
      bool operator>(const Event& o) const {
        if (time != o.time) return time > o.time;
        if (kind != o.kind) return kind > o.kind;
        return thread > o.thread;
      }
    };
    const int n = static_cast<int>(states.size());
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    std::vector<Task*> current(n, nullptr);
    std::vector<char> idle(n, 0);
    std::mt19937_64 rng(rt.config_.seed);
    for (int i = 0; i < n; ++i) events.push({0.0, 1, i});

    double makespan = 0;
    while (outstanding.load() > 0 && !abort.load()) {
      if (events.empty()) throw std::logic_error("task graph stalled: unresolved inputs remain");
      Event e = events.top();
      events.pop();
      const double now = e.time;
      const int i = e.thread;
      if (e.kind == 0) {
        finish(current[i]);
        current[i] = nullptr;
        makespan = now;
        if (queued.load() > 0) {
          for (int j = 0; j < n; ++j) {
            if (idle[j]) {
              idle[j] = 0;
              events.push({now, 1, j});
            }
          }
        }
        if (outstanding.load() == 0) break;
      }
      Task* t = take(states[i].worker, rng);
      if (t) {
        double cost = execute(t, states[i]);
        states[i].busy += cost;
        current[i] = t;
        events.push({now + cost, 0, i});
      } else if (queued.load() > 0) {
        events.push({now + rt.config_.cost.steal_latency, 1, i});
      } else {
        idle[i] = 1;
      }
    }
    return makespan;
  }

  double run_threaded(std::vector<ThreadState>& states) {
    using clock = std::chrono::steady_clock;
    const auto start = clock::now();
    auto body = [&](int i) {
      std::mt19937_64 rng(rt.config_.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(i + 1)));
      ThreadState& ts = states[i];
      int misses = 0;
      while (!abort.load(std::memory_order_relaxed)) {
        Task* t = take(ts.worker, rng);
        if (t) {
          auto t0 = clock::now();
          execute(t, ts);
          finish(t);
          ts.busy += std::chrono::duration<double>(clock::now() - t0).count();
          misses = 0;
          continue;
        }
        if (outstanding.load(std::memory_order_acquire) == 0) break;
        if (++misses < 64)
          std::this_thread::yield();
        else
          std::this_thread::sleep_for(std::chrono::microseconds(50));
      }
    };
    std::vector<std::thread> threads;
    threads.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) threads.emplace_back(body, static_cast<int>(i));
    for (auto& th : threads) th.join();
    return std::chrono::duration<double>(clock::now() - start).count();
  }
};

// ---------------------------------------------------------------------------
// Runtime

Runtime::Runtime(RuntimeConfig config) : config_(std::move(config)) {
  if (config_.workers < 1) throw std::invalid_argument("runtime needs at least one worker");
  if (config_.threads_per_worker < 1) throw std::invalid_argument("threads_per_worker must be >= 1");
  impl_ = std::make_unique<Impl>(*this);
}

Runtime::~Runtime() = default;

ChunkId Runtime::register_chunk(int worker, std::vector<std::byte> payload) {
  if (worker < 0 || worker >= config_.workers) throw std::out_of_range("worker index out of range");
  Impl::Slot slot;
  slot.data = ChunkData(std::move(payload));
  return impl_->add_slot(worker, std::move(slot));
}

ChunkData Runtime::fetch_chunk(int requesting_worker, ChunkId id) {
  if (requesting_worker < 0 || requesting_worker >= config_.workers)
    throw std::out_of_range("worker index out of range");
  return impl_->fetch(requesting_worker, id, nullptr);
}

ChunkData Runtime::peek(ChunkId id) const {
  ChunkId fin = impl_->final_id(id);
  if (fin.is_nil()) throw std::logic_error("peek of NIL chunk id");
  return impl_->data_of(fin);
}

ChunkId Runtime::register_task(std::string_view type, std::span<const ChunkId> inputs) {
  TaskType t = registry_.find(type);
  Task* task = impl_->create_task(t, inputs, 0, 0);
  impl_->driver_tasks.push_back(task);
  return task->output;
}

ChunkId Runtime::resolve(ChunkId id) const { return impl_->final_id(id); }

leaf::DeviceManager& Runtime::device_manager(int worker) {
  return *impl_->worker(static_cast<std::uint32_t>(worker)).devices;
}

std::uint64_t Runtime::bytes_received(int worker) const {
  return impl_->worker(static_cast<std::uint32_t>(worker)).bytes_received.load();
}

std::size_t Runtime::cache_occupancy(int worker) const {
  auto& wk = impl_->worker(static_cast<std::uint32_t>(worker));
  std::lock_guard lock(wk.cache_mu);
  return wk.cache_bytes;
}

std::size_t Runtime::chunk_count(int worker) const {
  auto& wk = impl_->worker(static_cast<std::uint32_t>(worker));
  std::lock_guard lock(wk.store_mu);
  return static_cast<std::size_t>(std::count_if(wk.slots.begin(), wk.slots.end(),
                                                [](const Impl::Slot& s) { return s.kind == Impl::Slot::Kind::data; }));
}

RunResult Runtime::run(std::string_view type, std::span<const ChunkId> inputs) {
  ChunkId promise = register_task(type, inputs);
  RunResult result = run();
  result.output = resolve(promise);
  return result;
}

RunResult Runtime::run() {
  Impl& im = *impl_;
  if (im.poisoned) throw std::logic_error("runtime is unusable after a task fault");

  const int p = config_.workers;
  const int tpw = config_.threads_per_worker;
  const std::size_t ntypes = registry_.size();

  struct Snapshot {
    std::uint64_t bytes, fetches, hits;
  };
  std::vector<Snapshot> before(p);
  for (int w = 0; w < p; ++w) {
    auto& wk = *im.workers[w];
    before[w] = {wk.bytes_received.load(), wk.remote_fetches.load(), wk.cache_hits.load()};
  }

  std::vector<ThreadState> states(static_cast<std::size_t>(p) * tpw);
  for (std::size_t i = 0; i < states.size(); ++i) {
    states[i].worker = static_cast<int>(i) / tpw;
    states[i].counts.assign(ntypes * kMaxLevels, 0);
    states[i].sublevel.assign(kMaxLevels, 0);
  }

  std::vector<Task*> roots;
  roots.swap(im.driver_tasks);
  for (Task* t : roots) im.release_token(t);

  double elapsed = 0;
  if (im.outstanding.load() > 0) {
    try {
      elapsed = config_.schedule == Schedule::simulated ? im.run_simulated(states) : im.run_threaded(states);
    } catch (...) {
      im.poisoned = true;
      throw;
    }
  }
  if (im.fault) {
    im.poisoned = true;
    TaskFault f = *im.fault;
    throw f;
  }

  RunStats stats;
  stats.elapsed = elapsed;
  for (std::size_t t = 0; t < ntypes; ++t) stats.task_types.push_back(registry_.name(TaskType{static_cast<std::uint16_t>(t)}));
  stats.counts.assign(ntypes, {});
  int max_level = -1;
  int max_sub = -1;
  std::vector<std::uint64_t> counts(ntypes * kMaxLevels, 0);
  std::vector<std::uint64_t> sublevel(kMaxLevels, 0);
  stats.workers.resize(p);
  for (int w = 0; w < p; ++w) {
    auto& wk = *im.workers[w];
    WorkerStats& ws = stats.workers[w];
    ws.worker = w;
    ws.bytes_received = wk.bytes_received.load() - before[w].bytes;
    ws.remote_fetches = wk.remote_fetches.load() - before[w].fetches;
    ws.cache_hits = wk.cache_hits.load() - before[w].hits;
  }
  for (const ThreadState& ts : states) {
    WorkerStats& ws = stats.workers[ts.worker];
    ws.tasks_executed += ts.tasks;
    ws.busy_time += ts.busy;
    stats.leaf_fma_count += ts.leaf_fma;
    stats.device_fma_count += ts.device_fma;
    stats.cpu_batches += ts.cpu_batches;
    stats.device_batches += ts.device_batches;
    for (std::size_t i = 0; i < counts.size(); ++i) {
      counts[i] += ts.counts[i];
      if (ts.counts[i]) max_level = std::max(max_level, static_cast<int>(i % kMaxLevels));
    }
    for (int l = 0; l < kMaxLevels; ++l) {
      sublevel[l] += ts.sublevel[l];
      if (ts.sublevel[l]) max_sub = std::max(max_sub, l);
    }
  }
  for (std::size_t t = 0; t < ntypes; ++t)
    stats.counts[t].assign(counts.begin() + static_cast<std::ptrdiff_t>(t * kMaxLevels),
                           counts.begin() + static_cast<std::ptrdiff_t>(t * kMaxLevels + max_level + 1));
  stats.sublevel_multiply_counts.assign(sublevel.begin(), sublevel.begin() + (max_sub + 1));
  for (WorkerStats& ws : stats.workers)
    ws.active_fraction = elapsed > 0 ? ws.busy_time / (static_cast<double>(tpw) * elapsed) : 0.0;

  return RunResult{ChunkId(), std::move(stats)};
}

// ---------------------------------------------------------------------------
// TaskContext

const RuntimeConfig& TaskContext::config() const { return rt_.config_; }

ChunkData TaskContext::fetch(ChunkId id) { return rt_.impl_->fetch(worker_, id, &accum_); }

ChunkData TaskContext::peek(ChunkId id) const { return rt_.peek(id); }

ChunkId TaskContext::register_chunk(std::vector<std::byte> payload) {
  return rt_.register_chunk(worker_, std::move(payload));
}

ChunkId TaskContext::register_task(TaskType type, std::span<const ChunkId> inputs) {
  Runtime::Task* child = rt_.impl_->create_task(type, inputs, level_ + 1, worker_);
  task_.spawned.push_back(child);
  return child->output;
}

leaf::DeviceManager* TaskContext::device_manager() {
  auto& dm = *rt_.impl_->workers[worker_]->devices;
  return dm.num_devices() > 0 ? &dm : nullptr;
}

void TaskContext::record_leaf_work(const leaf::LeafOpStats& stats) {
  auto& ts = *static_cast<ThreadState*>(thread_state_);
  ts.leaf_fma += stats.fma;
  ts.device_fma += stats.device_fma;
  ts.cpu_batches += stats.cpu_batches;
  ts.device_batches += stats.device_batches;
  accum_.cpu_fma += stats.fma - stats.device_fma;
  accum_.device_seconds += stats.device_seconds;
}

void TaskContext::record_sublevel_counts(std::span<const std::uint64_t> counts) {
  auto& ts = *static_cast<ThreadState*>(thread_state_);
  for (std::size_t s = 0; s < counts.size(); ++s) {
    std::size_t level = static_cast<std::size_t>(level_) + 1 + s;
    if (level >= ts.sublevel.size()) throw std::length_error("sublevel count beyond supported depth");
    ts.sublevel[level] += counts[s];
  }
}

}  // namespace qmat
