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

#include "qmat/leaf/device_manager.hpp"

#include <algorithm>
#include <stdexcept>

namespace qmat::leaf {

DeviceManager::Slot::Slot(Slot&& other) noexcept : owner_(other.owner_), device_(other.device_) {
  other.owner_ = nullptr;
  other.device_ = -1;
}

DeviceManager::Slot& DeviceManager::Slot::operator=(Slot&& other) noexcept {
  if (this != &other) {
    release();
    owner_ = other.owner_;
    device_ = other.device_;
    other.owner_ = nullptr;
    other.device_ = -1;
  }
  return *this;
}

DeviceManager::Slot::~Slot() { release(); }

void DeviceManager::Slot::release() {
  if (owner_) {
    owner_->release(device_);
    owner_ = nullptr;
    device_ = -1;
  }
}

DeviceManager::DeviceManager(DeviceConfig config)
    : config_(config), queue_bound_(config.queue_bound < 0 ? config.num_devices : config.queue_bound) {
  if (config_.num_devices < 0) throw std::invalid_argument("num_devices must be >= 0");
  if (config_.slots_per_device < 1) throw std::invalid_argument("slots_per_device must be >= 1");
  if (!(config_.accelerator.speed_factor > 0)) throw std::invalid_argument("speed_factor must be > 0");
  granted_.assign(config_.num_devices, 0);
  for (int d = 0; d < config_.num_devices; ++d) compute_mu_.emplace_back();
}

int DeviceManager::pick_free_device_locked() const {
  int best = -1;
  for (int d = 0; d < config_.num_devices; ++d) {
    if (granted_[d] >= config_.slots_per_device) continue;
    if (best < 0 || granted_[d] < granted_[best]) best = d;
  }
  return best;
}

void DeviceManager::log_locked(DeviceEvent::Kind kind, std::uint64_t seq, double priority, int device) {
  if (config_.record_events) events_.push_back({kind, seq, priority, device});
}

std::optional<DeviceManager::Slot> DeviceManager::request_slot(double priority) {
  if (!(priority >= 0)) throw std::invalid_argument("slot priority must be >= 0");
  std::unique_lock lock(mu_);
  const std::uint64_t seq = next_seq_++;

  if (int d = pick_free_device_locked(); d >= 0) {
    ++granted_[d];
    max_granted_ = std::max(max_granted_, granted_[d]);
    log_locked(DeviceEvent::Kind::grant, seq, priority, d);
    return Slot(this, d);
  }

  if (config_.num_devices == 0 || queue_bound_ == 0) {
    ++rejections_;
    log_locked(DeviceEvent::Kind::reject, seq, priority, -1);
    return std::nullopt;
  }

  if (queue_.size() >= static_cast<std::size_t>(queue_bound_)) {
    // Lowest priority loses; among equals the latest arrival.
    auto victim = std::min_element(queue_.begin(), queue_.end(), [](const auto& a, const auto& b) {
      if (a->priority != b->priority) return a->priority < b->priority;
      return a->seq > b->seq;
    });
    if (!(priority > (*victim)->priority)) {
      ++rejections_;
      log_locked(DeviceEvent::Kind::reject, seq, priority, -1);
      return std::nullopt;
    }
    (*victim)->state = Request::State::evicted;
    log_locked(DeviceEvent::Kind::evict, (*victim)->seq, (*victim)->priority, -1);
    queue_.erase(victim);
    cv_.notify_all();
  }

  auto req = std::make_shared<Request>(Request{seq, priority});
  queue_.push_back(req);
  log_locked(DeviceEvent::Kind::enqueue, seq, priority, -1);
  cv_.wait(lock, [&] { return req->state != Request::State::waiting; });
  if (req->state == Request::State::granted) return Slot(this, req->device);
  ++rejections_;
  return std::nullopt;
}

void DeviceManager::release(int device) {
  std::lock_guard lock(mu_);
  --granted_[device];
  log_locked(DeviceEvent::Kind::release, 0, 0.0, device);
  if (queue_.empty()) return;
  auto next = std::max_element(queue_.begin(), queue_.end(), [](const auto& a, const auto& b) {
    if (a->priority != b->priority) return a->priority < b->priority;
    return a->seq > b->seq;
  });
  auto req = *next;
  queue_.erase(next);
  req->state = Request::State::granted;
  req->device = device;
  ++granted_[device];
  max_granted_ = std::max(max_granted_, granted_[device]);
  log_locked(DeviceEvent::Kind::grant_from_queue, req->seq, req->priority, device);
  cv_.notify_all();
}

int DeviceManager::granted(int device) const {
  std::lock_guard lock(mu_);
  return granted_.at(device);
}

std::size_t DeviceManager::queued() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

int DeviceManager::max_granted_observed() const {
  std::lock_guard lock(mu_);
  return max_granted_;
}

std::uint64_t DeviceManager::rejections() const {
  std::lock_guard lock(mu_);
  return rejections_;
}

std::vector<DeviceEvent> DeviceManager::events() const {
  std::lock_guard lock(mu_);
  return events_;
}

std::unique_lock<std::mutex> DeviceManager::lock_compute(int device) {
  return std::unique_lock<std::mutex>(compute_mu_.at(device));
}

}  // namespace qmat::leaf
