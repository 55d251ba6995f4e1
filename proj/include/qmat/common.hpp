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
#include <stdexcept>
#include <string>

namespace qmat {

/// Selects op(A) = A or A^T (and likewise for B) in C = op(A) op(B).
struct TransposeFlags {
  bool trans_a = false;
  bool trans_b = false;

  friend constexpr bool operator==(const TransposeFlags&, const TransposeFlags&) = default;
};

/// Which operand of a symmetric multiply is stored as an upper triangle.
enum class Side { left, right };

/// C = A A^T or C = A^T A.
enum class SyrkMode { aat, ata };

/// Raised when a dimension, blocksize, or storage-layout precondition fails.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace qmat
