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

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "qmat/quadtree.hpp"

namespace qmat {

/// Plain-text matrix file: first line `n`, then one `row col value` per line.
struct MatrixFile {
  int n = 0;
  std::vector<Triplet> triplets;
};

void write_matrix(std::ostream& os, int n, const std::vector<Triplet>& triplets);
MatrixFile read_matrix(std::istream& is);

void write_matrix_file(const std::filesystem::path& path, int n, const std::vector<Triplet>& triplets);
MatrixFile read_matrix_file(const std::filesystem::path& path);

}  // namespace qmat
