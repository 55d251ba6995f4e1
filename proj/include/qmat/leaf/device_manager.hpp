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

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

namespace qmat::leaf {

/// Stand-in for an accelerator card. Block products run on the host, timing
/// is modelled.
struct AcceleratorConfig {
  /// Accelerator throughput relative to one CPU core; must be > 0.
  double speed_factor = 8.0;
  /// Simulated host<->device staging delay per byte, in seconds.
  double transfer_cost = 1e-10;
  /// Host core throughput used to turn fma counts into modelled seconds.
  double cpu_seconds_per_fma = 1e-9;
  /// When set, slot holders sleep for the modelled staging/compute time so
  /// that concurrent callers actually contend for slots.
  bool emulate_delays = false;
};

struct DeviceConfig {
  int num_devices = 0;
  int slots_per_device = 2;
  /// Bounded priority queue length; negative selects the default (num_devices).
  int queue_bound = -1;
  AcceleratorConfig accelerator{};
  /// Keep a protocol event log (for replay checks).
  bool record_events = false;
};

/// One protocol step, recorded in the order the manager's lock serialized it.
struct DeviceEvent {
  enum class Kind { grant, enqueue, reject, evict, grant_from_queue, release };
  Kind kind;
  std::uint64_t request;  // request sequence number
  double priority;
  int device;  // -1 when not applicable
};

/// Slots on a set of simulated devices plus a bounded priority queue.
///
/// A free slot is granted immediately. Otherwise the request either joins the
/// queue (possibly evicting the lowest-priority queued request) or is
/// rejected. A queued caller blocks until it is granted a slot or evicted.
/// Equal priorities are ordered by arrival: earlier requests win.
class DeviceManager {
 public:
  class Slot {
   public:
    Slot() = default;
    Slot(Slot&& other) noexcept;
    Slot& operator=(Slot&& other) noexcept;
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;
    ~Slot();

    int device() const { return device_; }
    bool valid() const { return owner_ != nullptr; }
    void release();

   private:
    friend class DeviceManager;
    Slot(DeviceManager* owner, int device) : owner_(owner), device_(device) {}
    DeviceManager* owner_ = nullptr;
    int device_ = -1;
  };

  explicit DeviceManager(DeviceConfig config = {});
  DeviceManager(const DeviceManager&) = delete;
  DeviceManager& operator=(const DeviceManager&) = delete;

  /// Blocks while queued. Returns nullopt when rejected or evicted.
  std::optional<Slot> request_slot(double priority);

  int num_devices() const { return config_.num_devices; }
  int slots_per_device() const { return config_.slots_per_device; }
  int queue_bound() const { return queue_bound_; }
  const AcceleratorConfig& accelerator() const { return config_.accelerator; }

  int granted(int device) const;
  std::size_t queued() const;
  /// Highest number of simultaneously granted slots seen on any device.
  int max_granted_observed() const;
  std::uint64_t rejections() const;
  std::vector<DeviceEvent> events() const;

  /// Serializes compute on one device: only one slot holder computes at a time.
  std::unique_lock<std::mutex> lock_compute(int device);

 private:
  struct Request {
    std::uint64_t seq;
    double priority;
    enum class State { waiting, granted, evicted } state = State::waiting;
    int device = -1;
  };

  void release(int device);
  int pick_free_device_locked() const;
  void log_locked(DeviceEvent::Kind kind, std::uint64_t seq, double priority, int device);

  DeviceConfig config_;
  int queue_bound_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<int> granted_;
  std::vector<std::shared_ptr<Request>> queue_;
  std::uint64_t next_seq_ = 0;
  int max_granted_ = 0;
  std::uint64_t rejections_ = 0;
  std::vector<DeviceEvent> events_;
  std::deque<std::mutex> compute_mu_;
};

}  // namespace qmat::leaf
