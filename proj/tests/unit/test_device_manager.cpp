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

#include <doctest.h>

#include <atomic>
#include <chrono>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "device_replay.hpp"
#include "qmat/leaf/device_manager.hpp"
#include "qmat/leaf/leaf_ops.hpp"

using namespace qmat;
using leaf::DeviceConfig;
using leaf::DeviceEvent;
using leaf::DeviceManager;

namespace {

DeviceConfig two_devices() {
  DeviceConfig cfg;
  cfg.num_devices = 2;
  cfg.record_events = true;
  return cfg;
}

void wait_for_queue(const DeviceManager& dm, std::size_t n) {
  while (dm.queued() < n) std::this_thread::sleep_for(std::chrono::milliseconds(1));
}

}  // namespace

TEST_SUITE("device_manager") {
  TEST_CASE("free slots are granted to the least-loaded device") {
    DeviceManager dm(two_devices());
    std::vector<DeviceManager::Slot> held;
    for (int i = 0; i < 4; ++i) {
      auto s = dm.request_slot(1.0 * i);
      REQUIRE(s.has_value());
      held.push_back(std::move(*s));
    }
    CHECK(held[0].device() == 0);
    CHECK(held[1].device() == 1);
    CHECK(held[2].device() == 0);
    CHECK(held[3].device() == 1);
    CHECK(dm.granted(0) == 2);
    CHECK(dm.granted(1) == 2);
    held.clear();
    CHECK(dm.granted(0) == 0);
    CHECK(dm.granted(1) == 0);
  }

  TEST_CASE("full queue rejects a weaker request and releases go to the strongest waiter") {
    DeviceManager dm(two_devices());
    std::vector<DeviceManager::Slot> held;
    for (int i = 0; i < 4; ++i) held.push_back(std::move(*dm.request_slot(5.0)));

    std::optional<DeviceManager::Slot> got10, got20;
    std::thread t10([&] { got10 = dm.request_slot(10.0); });
    wait_for_queue(dm, 1);
    std::thread t20([&] { got20 = dm.request_slot(20.0); });
    wait_for_queue(dm, 2);

    CHECK_FALSE(dm.request_slot(1.0).has_value());
    CHECK(dm.rejections() == 1);

    const int freed = held.back().device();
    held.pop_back();
    t20.join();
    REQUIRE(got20.has_value());
    CHECK(got20->device() == freed);
    CHECK(dm.queued() == 1);

    held.pop_back();
    t10.join();
    REQUIRE(got10.has_value());

    got10->release();
    got20->release();
    held.clear();
    auto rep = testing::replay_device_log(dm.events(), 2, 2, dm.queue_bound());
    CHECK_MESSAGE(rep.ok(), rep.summary());
    CHECK(rep.requests == 7);
    CHECK(rep.rejected == 1);
  }

  TEST_CASE("a stronger request evicts the weakest waiter") {
    DeviceManager dm(two_devices());
    std::vector<DeviceManager::Slot> held;
    for (int i = 0; i < 4; ++i) held.push_back(std::move(*dm.request_slot(5.0)));

    std::optional<DeviceManager::Slot> weak, mid, strong;
    std::thread tw([&] { weak = dm.request_slot(2.0); });
    wait_for_queue(dm, 1);
    std::thread tm([&] { mid = dm.request_slot(3.0); });
    wait_for_queue(dm, 2);
    std::thread ts([&] { strong = dm.request_slot(9.0); });
    tw.join();
    CHECK_FALSE(weak.has_value());
    wait_for_queue(dm, 2);

    auto ev = dm.events();
    bool saw_evict = false;
    for (const auto& e : ev)
      if (e.kind == DeviceEvent::Kind::evict) {
        saw_evict = true;
        CHECK(e.priority == 2.0);
      }
    CHECK(saw_evict);

    held.pop_back();
    ts.join();
    CHECK(strong.has_value());
    held.pop_back();
    tm.join();
    CHECK(mid.has_value());
    strong.reset();
    mid.reset();
    held.clear();
    auto rep = testing::replay_device_log(dm.events(), 2, 2, dm.queue_bound());
    CHECK_MESSAGE(rep.ok(), rep.summary());
    CHECK(rep.evicted == 1);
  }

  TEST_CASE("equal priorities: the earliest waiter is served and the latest is evicted") {
    DeviceConfig cfg = two_devices();
    cfg.num_devices = 1;
    cfg.slots_per_device = 1;
    cfg.queue_bound = 2;
    DeviceManager dm(cfg);
    auto hold = dm.request_slot(1.0);
    std::optional<DeviceManager::Slot> first, second, third;
    std::thread a([&] { first = dm.request_slot(4.0); });
    wait_for_queue(dm, 1);
    std::thread b([&] { second = dm.request_slot(4.0); });
    wait_for_queue(dm, 2);
    std::thread c([&] { third = dm.request_slot(6.0); });
    b.join();
    CHECK_FALSE(second.has_value());
    hold.reset();
    c.join();
    REQUIRE(third.has_value());
    third.reset();
    a.join();
    CHECK(first.has_value());
    first.reset();
    auto rep = testing::replay_device_log(dm.events(), 1, 1, 2);
    CHECK_MESSAGE(rep.ok(), rep.summary());
  }

  TEST_CASE("no devices or a zero queue bound rejects at once") {
    DeviceConfig none;
    none.record_events = true;
    DeviceManager dm(none);
    CHECK_FALSE(dm.request_slot(100.0).has_value());
    CHECK(dm.rejections() == 1);
    REQUIRE(dm.events().size() == 1);
    CHECK(dm.events()[0].kind == DeviceEvent::Kind::reject);

    DeviceConfig tight = two_devices();
    tight.num_devices = 1;
    tight.slots_per_device = 1;
    tight.queue_bound = 0;
    DeviceManager dm2(tight);
    auto s = dm2.request_slot(1.0);
    CHECK(s.has_value());
    CHECK_FALSE(dm2.request_slot(50.0).has_value());
  }

  TEST_CASE("invalid configuration and priorities are refused") {
    DeviceConfig bad;
    bad.num_devices = -1;
    CHECK_THROWS_AS(DeviceManager{bad}, std::invalid_argument);
    DeviceConfig slots;
    slots.slots_per_device = 0;
    CHECK_THROWS_AS(DeviceManager{slots}, std::invalid_argument);
    DeviceManager dm(two_devices());
    CHECK_THROWS_AS(dm.request_slot(-1.0), std::invalid_argument);
  }

  TEST_CASE("random contention keeps the protocol invariants") {
    DeviceConfig cfg = two_devices();
    DeviceManager dm(cfg);
    std::vector<std::thread> threads;
    std::atomic<int> grants{0};
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        std::mt19937 rng(static_cast<unsigned>(t));
        for (int r = 0; r < 40; ++r) {
          auto s = dm.request_slot(static_cast<double>(rng() % 7));
          if (s) {
            ++grants;
            std::this_thread::sleep_for(std::chrono::microseconds(rng() % 200));
          }
        }
      });
    }
    for (auto& th : threads) th.join();
    auto rep = testing::replay_device_log(dm.events(), 2, 2, dm.queue_bound());
    CHECK_MESSAGE(rep.ok(), rep.summary());
    CHECK(rep.requests == 320);
    CHECK(rep.granted == static_cast<std::uint64_t>(grants.load()));
    CHECK(dm.max_granted_observed() <= 2);
  }

  TEST_CASE("concurrent leaf multiplies process every batch exactly once") {
    DeviceConfig cfg;
    cfg.num_devices = 1;
    cfg.record_events = true;
    cfg.accelerator.emulate_delays = true;
    cfg.accelerator.transfer_cost = 1e-9;
    DeviceManager dm(cfg);

    leaf::BlockSparseLeaf a(64, 4);
    std::mt19937 rng(3);
    for (int i = 0; i < 64; ++i)
      for (int j = 0; j < 64; ++j)
        if (rng() % 5 == 0) a.set(i, j, static_cast<double>(rng() % 9) - 4.0);
    const auto batches = leaf::build_batches(a, a, {});
    const auto reference = leaf::multiply(a, a, {});

    constexpr int kThreads = 4;
    std::vector<leaf::LeafOpStats> stats(kThreads);
    std::vector<leaf::BlockSparseLeaf> results(kThreads);
    std::vector<std::thread> threads;
    for (int t = 0; t < kThreads; ++t)
      threads.emplace_back([&, t] { results[t] = leaf::multiply(a, a, {}, &dm, &stats[t]); });
    for (auto& th : threads) th.join();

    for (int t = 0; t < kThreads; ++t) {
      CHECK(results[t] == reference);
      std::vector<int> seen(batches.size(), 0);
      for (const auto& pb : stats[t].log) ++seen.at(pb.batch);
      for (int n : seen) CHECK(n == 1);
      CHECK(stats[t].cpu_batches + stats[t].device_batches == batches.size());
    }
    auto rep = testing::replay_device_log(dm.events(), 1, 2, dm.queue_bound());
    CHECK_MESSAGE(rep.ok(), rep.summary());
  }
}
