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
#include "qmat/leaf/batches.hpp"
#include "qmat/leaf/block_sparse_leaf.hpp"

namespace qmat::leaf {

class DeviceManager;

// Leaf-level kernels behind the quadtree task types. All of them are
// reentrant; `dev` may be null (CPU only) and `stats` may be null.
//
// Symmetric operands use upper-triangle storage: no block below the block
// diagonal, and the strictly lower part of each diagonal block is zero.

BlockSparseLeaf multiply(const BlockSparseLeaf& a, const BlockSparseLeaf& b, TransposeFlags flags,
                         DeviceManager* dev = nullptr, LeafOpStats* stats = nullptr);

BlockSparseLeaf add(const BlockSparseLeaf& a, const BlockSparseLeaf& b);

/// Upper triangle of S*S for upper-stored symmetric S.
BlockSparseLeaf symm_square(const BlockSparseLeaf& s, DeviceManager* dev = nullptr, LeafOpStats* stats = nullptr);

/// S*B (side == left) or B*S (side == right), S upper-stored symmetric.
BlockSparseLeaf symm_multiply(const BlockSparseLeaf& s, const BlockSparseLeaf& b, Side side,
                              DeviceManager* dev = nullptr, LeafOpStats* stats = nullptr);

/// Upper triangle of A A^T or A^T A.
BlockSparseLeaf syrk(const BlockSparseLeaf& a, SyrkMode mode, DeviceManager* dev = nullptr,
                     LeafOpStats* stats = nullptr);

bool is_upper_stored(const BlockSparseLeaf& s);
/// Full symmetric matrix from its upper-stored form.
BlockSparseLeaf expand_symmetric(const BlockSparseLeaf& s);

/// Multiply-task counts a unit-blocksize quadtree would produce below this
/// leaf: entry s-1 is the number of nonzero (i,k,j) sub-block products at
/// sub-block size dim >> s, for s = 1 .. log2(dim). Structure is taken from
/// nonzero element values. Requires a power-of-two dim.
std::vector<std::uint64_t> sublevel_multiply_counts(const BlockSparseLeaf& a, const BlockSparseLeaf& b,
                                                    TransposeFlags flags);

}  // namespace qmat::leaf
