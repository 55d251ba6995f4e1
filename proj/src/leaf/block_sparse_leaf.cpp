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

#include "qmat/leaf/block_sparse_leaf.hpp"

#include <stdexcept>
#include <string>

#include "qmat/common.hpp"
#include "qmat/serialize.hpp"

namespace qmat::leaf {

BlockSparseLeaf::BlockSparseLeaf(int dim, int blocksize) : dim_(dim), bs_(blocksize) {
  if (dim < 1) throw DimensionError("leaf dimension must be positive");
  if (blocksize < 1) throw DimensionError("leaf blocksize must be positive");
  nb_ = (dim + blocksize - 1) / blocksize;
  index_.assign(static_cast<std::size_t>(nb_) * nb_, -1);
}

std::span<const double> BlockSparseLeaf::block(int bi, int bj) const {
  std::int32_t slot = index_.at(flat(bi, bj));
  if (slot < 0) throw std::out_of_range("block is not allocated");
  return {data_.data() + static_cast<std::size_t>(slot) * block_elems(), block_elems()};
}

std::span<double> BlockSparseLeaf::block_mut(int bi, int bj) {
  if (bi < 0 || bj < 0 || bi >= nb_ || bj >= nb_) throw std::out_of_range("block index out of range");
  std::int32_t& slot = index_[flat(bi, bj)];
  if (slot < 0) {
    slot = num_blocks();
    data_.resize(data_.size() + block_elems(), 0.0);
  }
  return {data_.data() + static_cast<std::size_t>(slot) * block_elems(), block_elems()};
}

double BlockSparseLeaf::at(int row, int col) const {
  if (row < 0 || col < 0 || row >= dim_ || col >= dim_) throw std::out_of_range("leaf element out of range");
  int bi = row / bs_, bj = col / bs_;
  if (!has_block(bi, bj)) return 0.0;
  return block(bi, bj)[static_cast<std::size_t>(row % bs_) * bs_ + col % bs_];
}

void BlockSparseLeaf::set(int row, int col, double value) {
  if (row < 0 || col < 0 || row >= dim_ || col >= dim_) throw std::out_of_range("leaf element out of range");
  block_mut(row / bs_, col / bs_)[static_cast<std::size_t>(row % bs_) * bs_ + col % bs_] = value;
}

double BlockSparseLeaf::frobenius_norm_sq() const {
  double sum = 0;
  for_each_block([&](int, int, std::span<const double> blk) {
    for (double v : blk) sum += v * v;
  });
  return sum;
}

double BlockSparseLeaf::block_norm_sq(int bi, int bj) const {
  if (!has_block(bi, bj)) return 0.0;
  double sum = 0;
  for (double v : block(bi, bj)) sum += v * v;
  return sum;
}

BlockSparseLeaf BlockSparseLeaf::without_blocks(std::span<const std::pair<int, int>> drop) const {
  std::vector<char> dropped(index_.size(), 0);
  for (auto [bi, bj] : drop) {
    if (bi < 0 || bj < 0 || bi >= nb_ || bj >= nb_) throw std::out_of_range("block index out of range");
    dropped[flat(bi, bj)] = 1;
  }
  BlockSparseLeaf out(dim_, bs_);
  for_each_block([&](int bi, int bj, std::span<const double> blk) {
    if (dropped[flat(bi, bj)]) return;
    auto dst = out.block_mut(bi, bj);
    std::copy(blk.begin(), blk.end(), dst.begin());
  });
  return out;
}

BlockSparseLeaf BlockSparseLeaf::transposed() const {
  BlockSparseLeaf out(dim_, bs_);
  for_each_block([&](int bi, int bj, std::span<const double> blk) {
    auto dst = out.block_mut(bj, bi);
    for (int r = 0; r < bs_; ++r)
      for (int c = 0; c < bs_; ++c)
        dst[static_cast<std::size_t>(c) * bs_ + r] = blk[static_cast<std::size_t>(r) * bs_ + c];
  });
  return out;
}

std::vector<std::byte> BlockSparseLeaf::serialize() const {
  ByteWriter w(13 + data_.size() * sizeof(double) + static_cast<std::size_t>(num_blocks()) * 8);
  w.put(kFormatVersion);
  w.put(static_cast<std::int32_t>(dim_));
  w.put(static_cast<std::int32_t>(bs_));
  w.put(static_cast<std::int32_t>(num_blocks()));
  for_each_block([&](int bi, int bj, std::span<const double> blk) {
    w.put(static_cast<std::int32_t>(bi));
    w.put(static_cast<std::int32_t>(bj));
    w.put_span(blk);
  });
  return std::move(w).take();
}

BlockSparseLeaf BlockSparseLeaf::deserialize(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  auto version = r.get<std::uint8_t>();
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported leaf format version " + std::to_string(version));
  auto dim = r.get<std::int32_t>();
  auto bs = r.get<std::int32_t>();
  auto count = r.get<std::int32_t>();
  BlockSparseLeaf out(dim, bs);
  if (count < 0 || count > out.nb_ * out.nb_) throw std::runtime_error("corrupt leaf block count");
  out.data_.reserve(static_cast<std::size_t>(count) * out.block_elems());
  for (std::int32_t n = 0; n < count; ++n) {
    auto bi = r.get<std::int32_t>();
    auto bj = r.get<std::int32_t>();
    if (bi < 0 || bj < 0 || bi >= out.nb_ || bj >= out.nb_ || out.has_block(bi, bj))
      throw std::runtime_error("corrupt leaf block index");
    r.get_into(out.block_mut(bi, bj));
  }
  if (!r.done()) throw std::runtime_error("trailing bytes after leaf payload");
  return out;
}

std::vector<double> BlockSparseLeaf::to_dense() const {
  std::vector<double> dense(static_cast<std::size_t>(dim_) * dim_, 0.0);
  for_each_block([&](int bi, int bj, std::span<const double> blk) {
    for (int r = 0; r < bs_; ++r) {
      int row = bi * bs_ + r;
      if (row >= dim_) break;
      for (int c = 0; c < bs_; ++c) {
        int col = bj * bs_ + c;
        if (col >= dim_) break;
        dense[static_cast<std::size_t>(row) * dim_ + col] = blk[static_cast<std::size_t>(r) * bs_ + c];
      }
    }
  });
  return dense;
}

bool operator==(const BlockSparseLeaf& a, const BlockSparseLeaf& b) {
  if (a.dim_ != b.dim_ || a.bs_ != b.bs_ || a.num_blocks() != b.num_blocks()) return false;
  for (int bi = 0; bi < a.nb_; ++bi) {
    for (int bj = 0; bj < a.nb_; ++bj) {
      if (a.has_block(bi, bj) != b.has_block(bi, bj)) return false;
      if (!a.has_block(bi, bj)) continue;
      auto x = a.block(bi, bj);
      auto y = b.block(bi, bj);
      if (!std::equal(x.begin(), x.end(), y.begin())) return false;
    }
  }
  return true;
}

}  // namespace qmat::leaf
