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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qmat/quadtree.hpp"
#include "qmat/runtime.hpp"

namespace qmat::cli {

/// Raised for invalid command parameters; the CLI maps it to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct PatternSpec {
  std::string kind = "random";  // random | banded | overlap | rmat | file
  double delta = 0.01;
  int d = 1;
  int D = 1;
  int grid_side = 16;
  double spacing = 2.0;
  double jitter = 1.0;
  double R = 5.0;
  int scale = 10;
  double edges_per_row = 5.0;
  double a = 0.25;
  std::string file;
};

struct GeneratedMatrix {
  int n = 0;
  std::vector<Triplet> triplets;
};

/// Dispatches to the generators. `n` is ignored for overlap, rmat, and file.
GeneratedMatrix generate(const PatternSpec& pattern, int n, std::uint64_t seed);

struct RunConfig {
  std::string op = "multiply";  // multiply | symm_square | syrk | add
  PatternSpec pattern;
  int n = 256;
  int leaf_dim = 64;
  int blocksize = 16;
  int workers = 1;
  int threads = 1;
  std::size_t cache_budget = std::size_t{1} << 30;
  int devices = 0;
  double speed_factor = 8.0;
  std::uint64_t seed = 1;
  std::string schedule = "sim";  // sim | threads
  bool trans_a = false;
  bool trans_b = false;
  bool oracle = false;
  bool count_sublevels = false;
  std::string output;       // CSV prefix; empty prints the summary only
  std::string result_file;  // optional matrix file for the result
};

struct RunReport {
  int n = 0;
  RunStats stats;
  double wall_seconds = 0;
  std::uint64_t result_nonzeros = 0;
  std::optional<double> oracle_rel_diff;
  std::optional<double> oracle_max_abs_diff;
};

/// Builds operands, runs the operation, and optionally checks it against a
/// dense reference (n <= 512).
RunReport run_experiment(const RunConfig& config);

/// summary CSV: op,n,leaf_dim,blocksize,workers,...,oracle_rel_diff
void write_summary_csv(std::ostream& os, const RunConfig& config, const RunReport& report);
/// task_type,level,count including unit-level multiply counts when present.
void write_levels_csv(std::ostream& os, const RunStats& stats);

struct WeakScalingRow {
  int p = 0;
  int n = 0;
  double bytes_max = 0;
  double bytes_avg = 0;
  double bytes_min = 0;
  double spsumma_elements = 0;
  double spsumma_bytes = 0;
};

/// Runs multiply with N = k p for each p. Banded patterns use m = 2d + 1,
/// overlap patterns the measured mean nonzeros per row.
std::vector<WeakScalingRow> weak_scaling(const RunConfig& base, int k, const std::vector<int>& ps);
void write_weak_scaling_csv(std::ostream& os, const std::vector<WeakScalingRow>& rows);

struct PredictConfig {
  std::string model = "random";  // random | banded | overlap | spsumma
  int L = 10;
  double delta = 1.0 / 64;
  int d = 1;
  int D = 1;
  double R = 2.5;
  double m = 5;
  double N = 8192;
  std::vector<int> ps{1, 2, 4, 8, 16};
  std::string measured;  // levels CSV to join on level
};

/// level,predicted,boundA,boundB,measured (spsumma: p,spsumma_elements,weak_elements).
void write_predictions(std::ostream& os, const PredictConfig& config);

/// Per-level multiply counts from a levels CSV, preferring unit-level rows.
std::vector<double> read_measured_levels(const std::string& path);

int cmd_gen(const PatternSpec& pattern, int n, std::uint64_t seed, const std::string& out, std::ostream& log);
int cmd_run(const RunConfig& config, std::ostream& out);
int cmd_weak_scaling(const RunConfig& base, int k, const std::vector<int>& ps, const std::string& out,
                     std::ostream& log);
int cmd_predict(const PredictConfig& config, const std::string& out, std::ostream& log);

}  // namespace qmat::cli
