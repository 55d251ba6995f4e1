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
#include <span>
#include <vector>

namespace qmat::leaf {

/// Square leaf matrix stored as a uniform grid of optional dense blocks.
///
/// Blocks are bs x bs, row-major. Only blocks that were touched are
/// allocated; when bs does not divide dim the edge blocks are padded and the
/// padding is kept at exactly zero.
class BlockSparseLeaf {
 public:
  static constexpr std::uint8_t kFormatVersion = 1;

  BlockSparseLeaf() = default;
  BlockSparseLeaf(int dim, int blocksize);

  int dim() const { return dim_; }
  int blocksize() const { return bs_; }
  /// Blocks per side.
  int grid() const { return nb_; }
  int num_blocks() const { return static_cast<int>(data_.size() / block_elems()); }
  bool empty() const { return data_.empty(); }

  bool has_block(int bi, int bj) const { return index_[flat(bi, bj)] >= 0; }
  std::span<const double> block(int bi, int bj) const;
  /// Returns the block, allocating a zero block first if it is absent.
  std::span<double> block_mut(int bi, int bj);

  double at(int row, int col) const;
  /// Writes one element, allocating its block if needed.
  void set(int row, int col, double value);

  double frobenius_norm_sq() const;
  double block_norm_sq(int bi, int bj) const;

  /// Copy without the listed blocks.
  BlockSparseLeaf without_blocks(std::span<const std::pair<int, int>> drop) const;
  BlockSparseLeaf transposed() const;

  /// Calls f(bi, bj, block) for every allocated block in row-major grid order.
  template <class F>
  void for_each_block(F&& f) const {
    for (int bi = 0; bi < nb_; ++bi)
      for (int bj = 0; bj < nb_; ++bj)
        if (has_block(bi, bj)) f(bi, bj, block(bi, bj));
  }

  std::vector<std::byte> serialize() const;
  static BlockSparseLeaf deserialize(std::span<const std::byte> bytes);

  /// Dense row-major copy (tests and small diagnostics).
  std::vector<double> to_dense() const;

  friend bool operator==(const BlockSparseLeaf& a, const BlockSparseLeaf& b);

 private:
  std::size_t block_elems() const { return static_cast<std::size_t>(bs_) * bs_; }
  std::size_t flat(int bi, int bj) const { return static_cast<std::size_t>(bi) * nb_ + bj; }

  int dim_ = 0;
  int bs_ = 1;
  int nb_ = 0;
  std::vector<std::int32_t> index_;  // nb*nb, -1 when absent
  std::vector<double> data_;         // allocated blocks, in allocation order
};

}  // namespace qmat::leaf
