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

#include "qmat/leaf/leaf_ops.hpp"

#include <algorithm>
#include <bit>

namespace qmat::leaf {

namespace {

void require_conforming(const BlockSparseLeaf& a, const BlockSparseLeaf& b) {
  if (a.blocksize() != b.blocksize()) throw DimensionError("leaf blocksize mismatch");
  if (a.dim() != b.dim()) throw DimensionError("leaf dimension mismatch");
}

void require_upper(const BlockSparseLeaf& s) {
  if (!is_upper_stored(s)) throw DimensionError("leaf is not in upper-triangle storage");
}

// Clears the strictly lower part of each diagonal block.
void zero_lower_diagonal(BlockSparseLeaf& c) {
  const int bs = c.blocksize();
  for (int d = 0; d < c.grid(); ++d) {
    if (!c.has_block(d, d)) continue;
    auto blk = c.block_mut(d, d);
    for (int r = 1; r < bs; ++r)
      for (int col = 0; col < r; ++col) blk[static_cast<std::size_t>(r) * bs + col] = 0.0;
  }
}

BlockSparseLeaf run_product(const BlockSparseLeaf& a, const BlockSparseLeaf& b, TransposeFlags flags,
                            JobFilter filter, DeviceManager* dev, LeafOpStats* stats) {
  BlockSparseLeaf c(a.dim(), a.blocksize());
  auto batches = build_batches(a, b, flags, filter);
  process_batches(a, b, flags, batches, c, dev, stats);
  return c;
}

}  // namespace

BlockSparseLeaf multiply(const BlockSparseLeaf& a, const BlockSparseLeaf& b, TransposeFlags flags,
                         DeviceManager* dev, LeafOpStats* stats) {
  require_conforming(a, b);
  return run_product(a, b, flags, JobFilter::all, dev, stats);
}

BlockSparseLeaf add(const BlockSparseLeaf& a, const BlockSparseLeaf& b) {
  require_conforming(a, b);
  BlockSparseLeaf c = a;
  b.for_each_block([&](int bi, int bj, std::span<const double> blk) {
    auto dst = c.block_mut(bi, bj);
    for (std::size_t e = 0; e < blk.size(); ++e) dst[e] += blk[e];
  });
  return c;
}

bool is_upper_stored(const BlockSparseLeaf& s) {
  const int bs = s.blocksize();
  for (int bi = 0; bi < s.grid(); ++bi) {
    for (int bj = 0; bj < bi; ++bj)
      if (s.has_block(bi, bj)) return false;
    if (!s.has_block(bi, bi)) continue;
    auto blk = s.block(bi, bi);
    for (int r = 1; r < bs; ++r)
      for (int c = 0; c < r; ++c)
        if (blk[static_cast<std::size_t>(r) * bs + c] != 0.0) return false;
  }
  return true;
}

BlockSparseLeaf expand_symmetric(const BlockSparseLeaf& s) {
  require_upper(s);
  const int bs = s.blocksize();
  BlockSparseLeaf full(s.dim(), bs);
  s.for_each_block([&](int bi, int bj, std::span<const double> blk) {
    auto dst = full.block_mut(bi, bj);
    std::copy(blk.begin(), blk.end(), dst.begin());
    if (bi == bj) {
      for (int r = 1; r < bs; ++r)
        for (int c = 0; c < r; ++c)
          dst[static_cast<std::size_t>(r) * bs + c] = blk[static_cast<std::size_t>(c) * bs + r];
    } else {
      auto mirror = full.block_mut(bj, bi);
      for (int r = 0; r < bs; ++r)
        for (int c = 0; c < bs; ++c)
          mirror[static_cast<std::size_t>(c) * bs + r] = blk[static_cast<std::size_t>(r) * bs + c];
    }
  });
  return full;
}

BlockSparseLeaf symm_square(const BlockSparseLeaf& s, DeviceManager* dev, LeafOpStats* stats) {
  BlockSparseLeaf full = expand_symmetric(s);
  BlockSparseLeaf c = run_product(full, full, {}, JobFilter::upper, dev, stats);
  zero_lower_diagonal(c);
  return c;
}

BlockSparseLeaf symm_multiply(const BlockSparseLeaf& s, const BlockSparseLeaf& b, Side side, DeviceManager* dev,
                              LeafOpStats* stats) {
  require_conforming(s, b);
  BlockSparseLeaf full = expand_symmetric(s);
  if (side == Side::left) return run_product(full, b, {}, JobFilter::all, dev, stats);
  return run_product(b, full, {}, JobFilter::all, dev, stats);
}

BlockSparseLeaf syrk(const BlockSparseLeaf& a, SyrkMode mode, DeviceManager* dev, LeafOpStats* stats) {
  TransposeFlags flags = mode == SyrkMode::aat ? TransposeFlags{false, true} : TransposeFlags{true, false};
  BlockSparseLeaf c = run_product(a, a, flags, JobFilter::upper, dev, stats);
  zero_lower_diagonal(c);
  return c;
}

std::vector<std::uint64_t> sublevel_multiply_counts(const BlockSparseLeaf& a, const BlockSparseLeaf& b,
                                                    TransposeFlags flags) {
  require_conforming(a, b);
  const int dim = a.dim();
  if (!std::has_single_bit(static_cast<unsigned>(dim)))
    throw DimensionError("sublevel counts need a power-of-two leaf dimension");
  const int depth = std::countr_zero(static_cast<unsigned>(dim));

  // Nonzero (row, col) coordinates of op(X).
  auto coords = [dim](const BlockSparseLeaf& x, bool trans) {
    std::vector<std::pair<int, int>> out;
    const int bs = x.blocksize();
    x.for_each_block([&](int bi, int bj, std::span<const double> blk) {
      for (int r = 0; r < bs; ++r)
        for (int c = 0; c < bs; ++c) {
          if (blk[static_cast<std::size_t>(r) * bs + c] == 0.0) continue;
          int row = bi * bs + r, col = bj * bs + c;
          if (row >= dim || col >= dim) continue;
          out.emplace_back(trans ? col : row, trans ? row : col);
        }
    });
    return out;
  };
  const auto ea = coords(a, flags.trans_a);
  const auto eb = coords(b, flags.trans_b);

  std::vector<std::uint64_t> counts(depth, 0);
  std::vector<std::uint64_t> cells;
  std::vector<std::uint64_t> a_cols, b_rows;
  for (int s = 1; s <= depth; ++s) {
    const int g = dim >> s;
    const std::uint64_t side = static_cast<std::uint64_t>(1) << s;
    auto distinct = [&](const std::vector<std::pair<int, int>>& e) {
      cells.clear();
      for (auto [r, c] : e) cells.push_back(static_cast<std::uint64_t>(r / g) * side + static_cast<std::uint64_t>(c / g));
      std::sort(cells.begin(), cells.end());
      cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    };
    a_cols.assign(side, 0);
    b_rows.assign(side, 0);
    distinct(ea);
    for (auto cell : cells) a_cols[cell % side] += 1;
    distinct(eb);
    for (auto cell : cells) b_rows[cell / side] += 1;
    std::uint64_t total = 0;
    for (std::uint64_t k = 0; k < side; ++k) total += a_cols[k] * b_rows[k];
    counts[s - 1] = total;
  }
  return counts;
}

}  // namespace qmat::leaf
