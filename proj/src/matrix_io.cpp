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

#include "qmat/matrix_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace qmat {

void write_matrix(std::ostream& os, int n, const std::vector<Triplet>& triplets) {
  os << n << '\n';
  os.precision(17);
  for (const Triplet& t : triplets) os << t.row << ' ' << t.col << ' ' << t.value << '\n';
}

MatrixFile read_matrix(std::istream& is) {
  MatrixFile out;
  std::string line;
  int lineno = 0;
  bool have_n = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    if (!have_n) {
      if (!(ls >> out.n) || out.n < 1) throw std::runtime_error("line " + std::to_string(lineno) + ": expected dimension");
      have_n = true;
      continue;
    }
    Triplet t;
    if (!(ls >> t.row >> t.col >> t.value))
      throw std::runtime_error("line " + std::to_string(lineno) + ": expected 'row col value'");
    std::string rest;
    if (ls >> rest) throw std::runtime_error("line " + std::to_string(lineno) + ": trailing text");
    out.triplets.push_back(t);
  }
  if (!have_n) throw std::runtime_error("matrix file has no dimension line");
  return out;
}

void write_matrix_file(const std::filesystem::path& path, int n, const std::vector<Triplet>& triplets) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_matrix(os, n, triplets);
  if (!os) throw std::runtime_error("write to " + path.string() + " failed");
}

MatrixFile read_matrix_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  return read_matrix(is);
}

}  // namespace qmat
