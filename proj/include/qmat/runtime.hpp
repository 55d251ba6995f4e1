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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qmat/chunk_id.hpp"
#include "qmat/leaf/batches.hpp"
#include "qmat/leaf/device_manager.hpp"

namespace qmat {

/// Immutable chunk payload. Copies share the same bytes.
class ChunkData {
 public:
  ChunkData() = default;
  explicit ChunkData(std::vector<std::byte> bytes)
      : bytes_(std::make_shared<const std::vector<std::byte>>(std::move(bytes))) {}

  std::span<const std::byte> bytes() const {
    return bytes_ ? std::span<const std::byte>(*bytes_) : std::span<const std::byte>{};
  }
  std::size_t size() const { return bytes_ ? bytes_->size() : 0; }
  bool valid() const { return bytes_ != nullptr; }

 private:
  std::shared_ptr<const std::vector<std::byte>> bytes_;
};

enum class Schedule {
  /// Discrete-event simulation of the workers on the calling thread. Fully
  /// reproducible for a given seed, including steal decisions.
  simulated,
  /// One OS thread per worker thread with real work stealing.
  threaded,
};

/// Modelled durations (seconds) used by the simulated schedule.
struct CostModel {
  double task_overhead = 2e-6;
  double seconds_per_fma = 1e-9;
  double seconds_per_byte = 1e-9;
  double fetch_latency = 5e-6;
  double steal_latency = 5e-6;
};

struct RuntimeConfig {
  int workers = 1;
  int threads_per_worker = 1;
  /// Per-worker budget for cached remote chunks.
  std::size_t cache_budget = std::size_t{1} << 30;
  std::uint64_t seed = 1;
  Schedule schedule = Schedule::simulated;
  /// Accelerators attached to every worker.
  leaf::DeviceConfig devices{};
  /// Ask leaf multiplies to report unit-blocksize-equivalent task counts
  /// for the levels folded into each leaf.
  bool count_sublevel_tasks = false;
  /// Assembly tasks check child dimensions (header-only reads, not charged).
  bool check_assembly = true;
  CostModel cost{};
};

struct WorkerStats {
  int worker = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t remote_fetches = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t tasks_executed = 0;
  double busy_time = 0;
  double active_fraction = 0;
};

/// Counters for one Runtime::run.
struct RunStats {
  std::vector<WorkerStats> workers;
  std::vector<std::string> task_types;
  /// counts[type][level] = executed tasks.
  std::vector<std::vector<std::uint64_t>> counts;
  /// Multiply tasks a unit-blocksize quadtree would run at levels folded into
  /// leaves, indexed by absolute level. Filled only with count_sublevel_tasks.
  std::vector<std::uint64_t> sublevel_multiply_counts;
  std::uint64_t leaf_fma_count = 0;
  std::uint64_t device_fma_count = 0;
  std::uint64_t cpu_batches = 0;
  std::uint64_t device_batches = 0;
  /// Simulated makespan, or wall seconds for the threaded schedule.
  double elapsed = 0;

  std::uint64_t count(std::string_view type, int level) const;
  std::uint64_t total(std::string_view type) const;
  std::vector<std::uint64_t> by_level(std::string_view type) const;
  /// Real task counts of `type` per level followed by sublevel counts.
  std::vector<std::uint64_t> unit_multiply_counts(std::string_view type) const;

  std::uint64_t t1_proxy() const;
  /// Depth of the task tree (levels 0..max populated).
  int tinf_proxy() const;
  std::uint64_t total_bytes_received() const;

  /// worker,bytes_received,tasks_executed,active_fraction
  void write_worker_csv(std::ostream& os) const;
  /// task_type,level,count
  void write_level_csv(std::ostream& os) const;
};

/// Raised by Runtime::run when a task executor throws.
class TaskFault : public std::runtime_error {
 public:
  TaskFault(std::string task_type, int level, int worker, const std::string& what);
  const std::string& task_type() const { return task_type_; }
  int level() const { return level_; }
  int worker() const { return worker_; }

 private:
  std::string task_type_;
  int level_;
  int worker_;
};

class TaskContext;

/// Handle to a registered task type.
struct TaskType {
  std::uint16_t index = 0;
};

using TaskExecutor = std::function<ChunkId(TaskContext&, std::span<const ChunkId>)>;

class TaskRegistry {
 public:
  TaskType add(std::string name, TaskExecutor executor);
  bool contains(std::string_view name) const;
  /// Throws std::invalid_argument for unknown names.
  TaskType find(std::string_view name) const;
  const std::string& name(TaskType type) const { return entries_[type.index].name; }
  const TaskExecutor& executor(TaskType type) const { return entries_[type.index].executor; }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string name;
    TaskExecutor executor;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::uint16_t> by_name_;
};

struct RunResult {
  ChunkId output;
  RunStats stats;
};

/// A chunk-and-task runtime over simulated worker processes.
///
/// Chunks are single-assignment byte payloads owned by the worker that
/// registered them. Tasks consume chunk ids and yield one output id; while
/// executing they may register chunks and child tasks. A worker executes
/// from its own deque (newest first) and, when empty, steals the oldest task
/// of a uniformly chosen other worker. A task reading a chunk owned by
/// another worker pays for the bytes unless its worker has the chunk cached.
///
/// Task types are registered between runs; chunk registration and fetches
/// are safe from any thread.
class Runtime {
 public:
  static constexpr int kMaxInputs = 6;
  static constexpr int kMaxLevels = 64;

  explicit Runtime(RuntimeConfig config = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  const RuntimeConfig& config() const { return config_; }
  int workers() const { return config_.workers; }
  TaskRegistry& registry() { return registry_; }
  const TaskRegistry& registry() const { return registry_; }

  ChunkId register_chunk(int worker, std::vector<std::byte> payload);

  /// Returns the payload of a registered chunk, charging the requester for
  /// remote cache misses. NIL or unknown ids are runtime bugs and throw
  /// std::logic_error.
  ChunkData fetch_chunk(int requesting_worker, ChunkId id);

  /// Driver-side read without accounting (inspection, conversions, tests).
  ChunkData peek(ChunkId id) const;

  /// Registers a root task on worker 0. Its output id is a promise that
  /// resolves during the next run. Unknown tags throw std::invalid_argument.
  ChunkId register_task(std::string_view type, std::span<const ChunkId> inputs);
  ChunkId register_task(std::string_view type, std::initializer_list<ChunkId> inputs) {
    return register_task(type, std::span<const ChunkId>(inputs.begin(), inputs.size()));
  }

  /// Executes every registered task to quiescence. `output` in the result is
  /// NIL; use resolve() for promises obtained from register_task.
  RunResult run();
  /// Registers one root task and runs; output is the resolved root id.
  RunResult run(std::string_view type, std::span<const ChunkId> inputs);
  RunResult run(std::string_view type, std::initializer_list<ChunkId> inputs) {
    return run(type, std::span<const ChunkId>(inputs.begin(), inputs.size()));
  }

  /// Final id behind a resolved promise (data ids and NIL map to themselves).
  ChunkId resolve(ChunkId id) const;

  leaf::DeviceManager& device_manager(int worker);

  /// Cumulative counters (not reset between runs).
  std::uint64_t bytes_received(int worker) const;
  std::size_t cache_occupancy(int worker) const;
  std::size_t chunk_count(int worker) const;

 private:
  friend class TaskContext;
  struct Impl;
  struct Task;

  static ChunkId make_id(std::uint32_t owner, std::uint32_t serial) { return ChunkId(owner, serial); }

  RuntimeConfig config_;
  TaskRegistry registry_;
  std::unique_ptr<Impl> impl_;
};

/// What an executing task sees of the runtime.
class TaskContext {
 public:
  int worker() const { return worker_; }
  int level() const { return level_; }
  const RuntimeConfig& config() const;

  ChunkData fetch(ChunkId id);
  /// Unaccounted read used only for consistency checks.
  ChunkData peek(ChunkId id) const;
  ChunkId register_chunk(std::vector<std::byte> payload);
  ChunkId register_task(TaskType type, std::span<const ChunkId> inputs);
  ChunkId register_task(TaskType type, std::initializer_list<ChunkId> inputs) {
    return register_task(type, std::span<const ChunkId>(inputs.begin(), inputs.size()));
  }

  /// Accelerators of this worker, or null when none are configured.
  leaf::DeviceManager* device_manager();
  void record_leaf_work(const leaf::LeafOpStats& stats);
  /// counts[s-1] is attributed to level() + s.
  void record_sublevel_counts(std::span<const std::uint64_t> counts);

 private:
  friend class Runtime;
  struct Accum {
    std::uint64_t remote_bytes = 0;
    std::uint64_t remote_fetches = 0;
    std::uint64_t cpu_fma = 0;
    double device_seconds = 0;
  };

  TaskContext(Runtime& rt, Runtime::Task& task, int worker, int level, void* thread_state)
      : rt_(rt), task_(task), worker_(worker), level_(level), thread_state_(thread_state) {}

  Runtime& rt_;
  Runtime::Task& task_;
  int worker_;
  int level_;
  void* thread_state_;
  Accum accum_{};
};

}  // namespace qmat
