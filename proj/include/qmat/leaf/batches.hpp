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

#include <cstdint>
#include <vector>

#include "qmat/common.hpp"
#include "qmat/leaf/block_sparse_leaf.hpp"

namespace qmat::leaf {

class DeviceManager;

struct BlockJob {
  int i;
  int j;
};

/// All block products C(i,j) += op(A)(i,k) op(B)(k,j) sharing one inner index
/// k: one sparse outer product. Destinations within a batch are distinct.
struct Batch {
  int k = 0;
  std::vector<BlockJob> jobs;
};

/// Restricts which destination blocks are produced.
enum class JobFilter { all, upper };

std::vector<Batch> build_batches(const BlockSparseLeaf& a, const BlockSparseLeaf& b, TransposeFlags flags,
                                 JobFilter filter = JobFilter::all);

/// Where one batch ran. device == -1 means the calling CPU thread.
struct ProcessedBatch {
  int batch;
  int device;
};

struct LeafOpStats {
  std::uint64_t fma = 0;         // scalar multiply-adds, padding included
  std::uint64_t device_fma = 0;  // share of fma run on an accelerator
  std::uint64_t cpu_batches = 0;
  std::uint64_t device_batches = 0;
  std::uint64_t transfer_bytes = 0;
  double device_seconds = 0;  // modelled accelerator time
  std::vector<ProcessedBatch> log;

  void merge(const LeafOpStats& other);
};

/// Flop estimate used as slot priority: 2 bs^3 per job.
double batch_priority(const std::vector<Batch>& batches, std::size_t first, int blocksize);

/// Load-balanced batch processing: while batches remain, ask for a device
/// slot; if granted, ship every remaining batch to that device, otherwise run
/// exactly one batch on this thread and ask again. Batches are consumed in
/// ascending k so each destination block sums its terms in a fixed order.
/// `c` must have the product's dim and blocksize.
void process_batches(const BlockSparseLeaf& a, const BlockSparseLeaf& b, TransposeFlags flags,
                     const std::vector<Batch>& batches, BlockSparseLeaf& c, DeviceManager* dev,
                     LeafOpStats* stats = nullptr);

/// c += op(a) op(b) on dense bs x bs row-major blocks.
void gemm_block(int bs, const double* a, bool trans_a, const double* b, bool trans_b, double* c);

}  // namespace qmat::leaf
