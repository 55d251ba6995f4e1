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

#include "qmat/leaf/batches.hpp"

#include <chrono>
#include <optional>
#include <thread>

#include "qmat/leaf/device_manager.hpp"

namespace qmat::leaf {

void LeafOpStats::merge(const LeafOpStats& other) {
  fma += other.fma;
  device_fma += other.device_fma;
  cpu_batches += other.cpu_batches;
  device_batches += other.device_batches;
  transfer_bytes += other.transfer_bytes;
  device_seconds += other.device_seconds;
  log.insert(log.end(), other.log.begin(), other.log.end());
}

std::vector<Batch> build_batches(const BlockSparseLeaf& a, const BlockSparseLeaf& b, TransposeFlags flags,
                                 JobFilter filter) {
  if (a.blocksize() != b.blocksize()) throw DimensionError("leaf blocksize mismatch");
  if (a.dim() != b.dim()) throw DimensionError("leaf dimension mismatch");
  const int nb = a.grid();
  auto a_has = [&](int i, int k) { return flags.trans_a ? a.has_block(k, i) : a.has_block(i, k); };
  auto b_has = [&](int k, int j) { return flags.trans_b ? b.has_block(j, k) : b.has_block(k, j); };

  std::vector<Batch> batches;
  std::vector<int> rows, cols;
  for (int k = 0; k < nb; ++k) {
    rows.clear();
    cols.clear();
    for (int i = 0; i < nb; ++i)
      if (a_has(i, k)) rows.push_back(i);
    if (rows.empty()) continue;
    for (int j = 0; j < nb; ++j)
      if (b_has(k, j)) cols.push_back(j);
    if (cols.empty()) continue;
    Batch batch{k, {}};
    for (int i : rows)
      for (int j : cols)
        if (filter == JobFilter::all || j >= i) batch.jobs.push_back({i, j});
    if (!batch.jobs.empty()) batches.push_back(std::move(batch));
  }
  return batches;
}

double batch_priority(const std::vector<Batch>& batches, std::size_t first, int blocksize) {
  double jobs = 0;
  for (std::size_t n = first; n < batches.size(); ++n) jobs += static_cast<double>(batches[n].jobs.size());
  double bs = blocksize;
  return 2.0 * bs * bs * bs * jobs;
}

void gemm_block(int bs, const double* a, bool trans_a, const double* b, bool trans_b, double* c) {
  const std::size_t n = static_cast<std::size_t>(bs);
  // Every c(i,j) accumulates its terms in ascending inner index.
  if (!trans_b) {
    for (std::size_t i = 0; i < n; ++i) {
      double* ci = c + i * n;
      for (std::size_t k = 0; k < n; ++k) {
        const double aik = trans_a ? a[k * n + i] : a[i * n + k];
        if (aik == 0.0) continue;
        const double* bk = b + k * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double* ci = c + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        const double* bj = b + j * n;
        double sum = ci[j];
        for (std::size_t k = 0; k < n; ++k) sum += (trans_a ? a[k * n + i] : a[i * n + k]) * bj[k];
        ci[j] = sum;
      }
    }
  }
}

namespace {

std::uint64_t run_batch(const BlockSparseLeaf& a, const BlockSparseLeaf& b, TransposeFlags flags, const Batch& batch,
                        BlockSparseLeaf& c) {
  const int bs = a.blocksize();
  const int k = batch.k;
  for (const BlockJob& job : batch.jobs) {
    auto ab = flags.trans_a ? a.block(k, job.i) : a.block(job.i, k);
    auto bb = flags.trans_b ? b.block(job.j, k) : b.block(k, job.j);
    auto cb = c.block_mut(job.i, job.j);
    gemm_block(bs, ab.data(), flags.trans_a, bb.data(), flags.trans_b, cb.data());
  }
  const auto bs3 = static_cast<std::uint64_t>(bs) * bs * bs;
  return bs3 * batch.jobs.size();
}

}  // namespace

void process_batches(const BlockSparseLeaf& a, const BlockSparseLeaf& b, TransposeFlags flags,
                     const std::vector<Batch>& batches, BlockSparseLeaf& c, DeviceManager* dev, LeafOpStats* stats) {
  LeafOpStats local;
  const int bs = a.blocksize();
  const std::size_t block_bytes = static_cast<std::size_t>(bs) * bs * sizeof(double);
  std::size_t next = 0;
  while (next < batches.size()) {
    std::optional<DeviceManager::Slot> slot;
    if (dev && dev->num_devices() > 0) slot = dev->request_slot(batch_priority(batches, next, bs));
    if (!slot) {
      local.fma += run_batch(a, b, flags, batches[next], c);
      local.cpu_batches += 1;
      local.log.push_back({static_cast<int>(next), -1});
      ++next;
      continue;
    }
    // Device path: every remaining batch goes to the device.
    const AcceleratorConfig& acc = dev->accelerator();
    std::uint64_t fma = 0;
    std::uint64_t bytes = 0;
    {
      auto compute = dev->lock_compute(slot->device());
      for (std::size_t n = next; n < batches.size(); ++n) {
        fma += run_batch(a, b, flags, batches[n], c);
        bytes += 3 * block_bytes * batches[n].jobs.size();
        local.log.push_back({static_cast<int>(n), slot->device()});
      }
    }
    const double transfer = static_cast<double>(bytes) * acc.transfer_cost;
    const double compute = static_cast<double>(fma) * acc.cpu_seconds_per_fma / acc.speed_factor;
    if (acc.emulate_delays) std::this_thread::sleep_for(std::chrono::duration<double>(transfer + compute));
    local.fma += fma;
    local.device_fma += fma;
    local.transfer_bytes += bytes;
    local.device_seconds += transfer + compute;
    local.device_batches += batches.size() - next;
    next = batches.size();
  }
  if (stats) stats->merge(local);
}

}  // namespace qmat::leaf
