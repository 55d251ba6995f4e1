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

#include "qmat/common.hpp"
#include "qmat/quadtree.hpp"
#include "qmat/runtime.hpp"

namespace qmat {

// Task type tags registered by install_matmul_tasks.
inline constexpr const char* kMultiplyTags[4] = {"multiply_nn", "multiply_tn", "multiply_nt", "multiply_tt"};
inline constexpr const char* kAddTag = "add";
inline constexpr const char* kSymmSquareTag = "symm_square";
inline constexpr const char* kSymmLeftTag = "symm_multiply_left";
inline constexpr const char* kSymmRightTag = "symm_multiply_right";
inline constexpr const char* kSyrkAatTag = "syrk_aat";
inline constexpr const char* kSyrkAtaTag = "syrk_ata";

const char* multiply_tag(TransposeFlags flags);

/// Registers every quadtree task type (no-op when already present).
void install_matmul_tasks(Runtime& rt);

struct OpResult {
  Matrix matrix;
  RunStats stats;
};

/// C = op(A) op(B).
OpResult multiply(Runtime& rt, const Matrix& a, const Matrix& b, TransposeFlags flags = {});
OpResult add(Runtime& rt, const Matrix& a, const Matrix& b);
/// Upper triangle of S*S for S in upper-triangle storage.
OpResult symm_square(Runtime& rt, const Matrix& s);
/// S*B for side == left, B*S for side == right; S in upper-triangle storage.
OpResult symm_multiply(Runtime& rt, const Matrix& s, const Matrix& b, Side side);
/// Upper triangle of A A^T or A^T A.
OpResult syrk(Runtime& rt, const Matrix& a, SyrkMode mode);

/// Runs one assemble task over existing child ids of a node of nominal
/// dimension `params.n`.
OpResult assemble_from_children(Runtime& rt, const MatrixParams& params, const std::array<ChunkId, 4>& children);

}  // namespace qmat
