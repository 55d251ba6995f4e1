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

#include <algorithm>
#include <numeric>

#include "qmat/runtime.hpp"

namespace qmat {

namespace {

const std::vector<std::uint64_t>* row_for(const RunStats& s, std::string_view type) {
  for (std::size_t t = 0; t < s.task_types.size(); ++t)
    if (s.task_types[t] == type) return &s.counts[t];
  return nullptr;
}

}  // namespace

std::uint64_t RunStats::count(std::string_view type, int level) const {
  const auto* row = row_for(*this, type);
  if (!row || level < 0 || static_cast<std::size_t>(level) >= row->size()) return 0;
  return (*row)[level];
}

std::uint64_t RunStats::total(std::string_view type) const {
  const auto* row = row_for(*this, type);
  return row ? std::accumulate(row->begin(), row->end(), std::uint64_t{0}) : 0;
}

std::vector<std::uint64_t> RunStats::by_level(std::string_view type) const {
  const auto* row = row_for(*this, type);
  return row ? *row : std::vector<std::uint64_t>{};
}

std::vector<std::uint64_t> RunStats::unit_multiply_counts(std::string_view type) const {
  std::vector<std::uint64_t> out = by_level(type);
  // Trailing zero entries of the real counts are levels folded into leaves.
  if (out.size() < sublevel_multiply_counts.size()) out.resize(sublevel_multiply_counts.size(), 0);
  for (std::size_t l = 0; l < sublevel_multiply_counts.size(); ++l) out[l] += sublevel_multiply_counts[l];
  while (!out.empty() && out.back() == 0) out.pop_back();
  return out;
}

std::uint64_t RunStats::t1_proxy() const {
  std::uint64_t sum = 0;
  for (const auto& row : counts) sum = std::accumulate(row.begin(), row.end(), sum);
  return sum;
}

int RunStats::tinf_proxy() const {
  int depth = 0;
  for (const auto& row : counts)
    for (std::size_t l = 0; l < row.size(); ++l)
      if (row[l]) depth = std::max(depth, static_cast<int>(l) + 1);
  return depth;
}

std::uint64_t RunStats::total_bytes_received() const {
  std::uint64_t sum = 0;
  for (const auto& w : workers) sum += w.bytes_received;
  return sum;
}

void RunStats::write_worker_csv(std::ostream& os) const {
  os << "worker,bytes_received,tasks_executed,active_fraction\n";
  for (const auto& w : workers)
    os << w.worker << ',' << w.bytes_received << ',' << w.tasks_executed << ',' << w.active_fraction << '\n';
}

void RunStats::write_level_csv(std::ostream& os) const {
  os << "task_type,level,count\n";
  for (std::size_t t = 0; t < task_types.size(); ++t)
    for (std::size_t l = 0; l < counts[t].size(); ++l)
      if (counts[t][l]) os << task_types[t] << ',' << l << ',' << counts[t][l] << '\n';
}

}  // namespace qmat
