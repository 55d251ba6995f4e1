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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "qmat/chunk_id.hpp"
#include "qmat/leaf/block_sparse_leaf.hpp"
#include "qmat/runtime.hpp"

namespace qmat {

struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0;

  friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Construction parameters for one (sub)matrix. Offsets locate the submatrix
/// in the global matrix and are only meaningful while building.
struct MatrixParams {
  int n = 0;
  int leaf_dim = 1;
  int leaf_blocksize = 1;
  int row_offset = 0;
  int col_offset = 0;

  std::vector<std::byte> encode() const;
  static MatrixParams decode(std::span<const std::byte> bytes);
};

/// Dimension of the quadtree node covering an n x n matrix: n itself when it
/// fits in one leaf, otherwise leaf_dim times the next power of two. Rows and
/// columns beyond n are structurally zero.
int nominal_dim(int n, int leaf_dim);

/// Where the root of an n x n matrix splits: half its nominal dimension, i.e.
/// the largest power-of-two multiple of leaf_dim strictly below n. Returns 0
/// when the matrix is a single leaf.
int split_point(int n, int leaf_dim);

/// Decoded MatrixChunk. Holds no global information.
struct MatrixNode {
  enum class Kind : std::uint8_t { internal = 1, leaf = 2 };
  static constexpr std::uint8_t kFormatVersion = 1;

  Kind kind = Kind::leaf;
  int n = 0;  // nominal dimension of this node
  int leaf_dim = 1;
  int leaf_blocksize = 1;
  std::array<ChunkId, 4> children{};  // NW, NE, SW, SE
  leaf::BlockSparseLeaf leaf;

  bool is_leaf() const { return kind == Kind::leaf; }
  ChunkId child(int i, int j) const { return children[2 * i + j]; }

  static MatrixNode make_internal(int n, int leaf_dim, int leaf_blocksize, const std::array<ChunkId, 4>& children);
  static MatrixNode make_leaf(int leaf_dim, leaf::BlockSparseLeaf leaf);

  std::vector<std::byte> encode() const;
  static MatrixNode decode(std::span<const std::byte> bytes);
  /// Decodes kind and dimensions only; the leaf payload is left empty.
  static MatrixNode decode_header(std::span<const std::byte> bytes);
};

/// Driver-side handle to a quadtree matrix: the root id plus the logical size.
struct Matrix {
  ChunkId root;
  int n = 0;
  int leaf_dim = 1;
  int leaf_blocksize = 1;

  int nominal() const { return nominal_dim(n, leaf_dim); }
  bool same_shape(const Matrix& other) const {
    return n == other.n && leaf_dim == other.leaf_dim && leaf_blocksize == other.leaf_blocksize;
  }
};

inline constexpr const char* kBuildTag = "build";
inline constexpr const char* kAssembleTag = "assemble";

/// Registers the "build" and "assemble" task types (no-op when present).
void install_quadtree_tasks(Runtime& rt);

/// Builds a quadtree from triplets by running build tasks on the runtime.
/// Explicit zeros are dropped. Throws std::out_of_range naming the offending
/// triplet, or std::invalid_argument for a duplicate position.
Matrix build(Runtime& rt, const MatrixParams& params, std::span<const Triplet> triplets);

/// Stored values with global indices, sorted row-major.
std::vector<Triplet> to_triplets(const Runtime& rt, ChunkId root);
inline std::vector<Triplet> to_triplets(const Runtime& rt, const Matrix& m) { return to_triplets(rt, m.root); }

double frobenius_norm_sq(const Runtime& rt, ChunkId root);
inline double frobenius_norm_sq(const Runtime& rt, const Matrix& m) { return frobenius_norm_sq(rt, m.root); }

/// Drops the leaf blocks with smallest norms while the squared norm of
/// everything removed stays below tau^2. Ties go to lower global block row,
/// then block column. Changed nodes are registered on their original owners;
/// untouched subtrees are shared with the input.
ChunkId truncate(Runtime& rt, ChunkId root, double tau);
inline Matrix truncate(Runtime& rt, const Matrix& m, double tau) {
  return Matrix{truncate(rt, m.root, tau), m.n, m.leaf_dim, m.leaf_blocksize};
}

/// Internal levels below the root along the deepest path (0 for a leaf root).
int tree_depth(const Runtime& rt, ChunkId root);

/// True when no reachable node is an all-NIL internal node or an empty leaf.
bool is_pruned(const Runtime& rt, ChunkId root);

/// True when `root` is valid upper-triangle storage of a symmetric matrix.
bool is_upper_triangle(const Runtime& rt, ChunkId root);

}  // namespace qmat
