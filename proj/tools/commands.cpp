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

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "qmat/matmul_ops.hpp"
#include "qmat/matrix_io.hpp"
#include "qmat/sparsity_models.hpp"

namespace qmat::cli {

namespace {

constexpr int kOracleMaxN = 512;

// Dense row-major reference arithmetic for --oracle.
using Dense = std::vector<double>;

Dense to_dense(int n, const std::vector<Triplet>& ts) {
  Dense d(static_cast<std::size_t>(n) * n, 0.0);
  for (const Triplet& t : ts) d[static_cast<std::size_t>(t.row) * n + t.col] = t.value;
  return d;
}

Dense dense_product(int n, const Dense& a, bool ta, const Dense& b, bool tb) {
  Dense c(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double aik = ta ? a[static_cast<std::size_t>(k) * n + i] : a[static_cast<std::size_t>(i) * n + k];
      if (aik == 0.0) continue;
      for (int j = 0; j < n; ++j)
        c[static_cast<std::size_t>(i) * n + j] +=
            aik * (tb ? b[static_cast<std::size_t>(j) * n + k] : b[static_cast<std::size_t>(k) * n + j]);
    }
  return c;
}

void keep_upper(int n, Dense& c) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) c[static_cast<std::size_t>(i) * n + j] = 0.0;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

Schedule parse_schedule(const std::string& s) {
  if (s == "sim") return Schedule::simulated;
  if (s == "threads") return Schedule::threaded;
  throw UsageError("unknown schedule '" + s + "' (expected sim or threads)");
}

}  // namespace

GeneratedMatrix generate(const PatternSpec& p, int n, std::uint64_t seed) {
  if (p.kind == "random") {
    if (n < 1) throw UsageError("--n must be >= 1");
    if (!(p.delta >= 0 && p.delta <= 1)) throw UsageError("--delta must lie in [0, 1]");
    return {n, models::gen_random(n, p.delta, seed)};
  }
  if (p.kind == "banded") {
    if (n < 1) throw UsageError("--n must be >= 1");
    if (p.d < 0) throw UsageError("--d must be >= 0");
    return {n, models::gen_banded(n, p.d)};
  }
  if (p.kind == "overlap") {
    models::OverlapParams op{p.D, p.grid_side, p.spacing, p.jitter, p.R, seed};
    try {
      auto m = models::gen_overlap(op);
      return {m.n, std::move(m.triplets)};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (p.kind == "rmat") {
    if (p.scale < 1 || p.scale > 24) throw UsageError("--scale must lie in [1, 24]");
    if (!(p.a >= 0.25 && p.a < 1)) throw UsageError("--a must lie in [0.25, 1)");
    if (!(p.edges_per_row >= 0)) throw UsageError("--edges-per-row must be >= 0");
    const int dim = 1 << p.scale;
    auto edges = static_cast<std::uint64_t>(std::llround(p.edges_per_row * dim));
    return {dim, models::gen_rmat(p.scale, edges, p.a, seed)};
  }
  if (p.kind == "file") {
    if (p.file.empty()) throw UsageError("--file is required for the file pattern");
    auto m = read_matrix_file(p.file);
    return {m.n, std::move(m.triplets)};
  }
  throw UsageError("unknown pattern '" + p.kind + "'");
}

RunReport run_experiment(const RunConfig& cfg) {
  if (cfg.leaf_dim < 1 || cfg.blocksize < 1) throw UsageError("--leaf-dim and --blocksize must be >= 1");
  if (cfg.workers < 1 || cfg.threads < 1) throw UsageError("--workers and --threads must be >= 1");
  if (cfg.devices < 0) throw UsageError("--devices must be >= 0");
  if (!(cfg.speed_factor > 0)) throw UsageError("--speed-factor must be > 0");

  RuntimeConfig rc;
  rc.workers = cfg.workers;
  rc.threads_per_worker = cfg.threads;
  rc.cache_budget = cfg.cache_budget;
  rc.seed = cfg.seed;
  rc.schedule = parse_schedule(cfg.schedule);
  rc.devices.num_devices = cfg.devices;
  rc.devices.accelerator.speed_factor = cfg.speed_factor;
  rc.count_sublevel_tasks = cfg.count_sublevels;
  Runtime rt(rc);

  GeneratedMatrix ga = generate(cfg.pattern, cfg.n, cfg.seed);
  const int n = ga.n;
  if (cfg.oracle && n > kOracleMaxN) throw UsageError("--oracle supports n <= 512");
  const MatrixParams params{n, cfg.leaf_dim, cfg.blocksize, 0, 0};

  // Random operands are paired with an independent draw; structured patterns
  // are multiplied by themselves.
  auto second = [&]() -> GeneratedMatrix {
    if (cfg.pattern.kind == "random") return generate(cfg.pattern, n, cfg.seed + 1);
    return ga;
  };

  RunReport rep;
  rep.n = n;
  OpResult res;
  Dense expected;
  std::chrono::steady_clock::time_point t_start;
  if (cfg.op == "multiply") {
    GeneratedMatrix gb = second();
    Matrix a = build(rt, params, ga.triplets);
    Matrix b = build(rt, params, gb.triplets);
    t_start = std::chrono::steady_clock::now();
    res = multiply(rt, a, b, {cfg.trans_a, cfg.trans_b});
    if (cfg.oracle)
      expected = dense_product(n, to_dense(n, ga.triplets), cfg.trans_a, to_dense(n, gb.triplets), cfg.trans_b);
  } else if (cfg.op == "add") {
    GeneratedMatrix gb = cfg.pattern.kind == "random" ? generate(cfg.pattern, n, cfg.seed + 1) : ga;
    Matrix a = build(rt, params, ga.triplets);
    Matrix b = build(rt, params, gb.triplets);
    t_start = std::chrono::steady_clock::now();
    res = add(rt, a, b);
    if (cfg.oracle) {
      expected = to_dense(n, ga.triplets);
      Dense db = to_dense(n, gb.triplets);
      for (std::size_t e = 0; e < expected.size(); ++e) expected[e] += db[e];
    }
  } else if (cfg.op == "symm_square") {
    auto full = models::symmetrize(ga.triplets);
    Matrix s = build(rt, params, models::upper_triangle(full));
    t_start = std::chrono::steady_clock::now();
    res = symm_square(rt, s);
    if (cfg.oracle) {
      Dense d = to_dense(n, full);
      expected = dense_product(n, d, false, d, false);
      keep_upper(n, expected);
    }
  } else if (cfg.op == "syrk") {
    Matrix a = build(rt, params, ga.triplets);
    t_start = std::chrono::steady_clock::now();
    res = syrk(rt, a, SyrkMode::aat);
    if (cfg.oracle) {
      Dense d = to_dense(n, ga.triplets);
      expected = dense_product(n, d, false, d, true);
      keep_upper(n, expected);
    }
  } else {
    throw UsageError("unknown operation '" + cfg.op + "'");
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  rep.stats = std::move(res.stats);

  auto result = to_triplets(rt, res.matrix);
  rep.result_nonzeros = result.size();
  if (!cfg.result_file.empty()) write_matrix_file(cfg.result_file, n, result);
  if (cfg.oracle) {
    Dense got = to_dense(n, result);
    double diff2 = 0, ref2 = 0, max_abs = 0;
    for (std::size_t e = 0; e < got.size(); ++e) {
      const double d = got[e] - expected[e];
      diff2 += d * d;
      ref2 += expected[e] * expected[e];
      max_abs = std::max(max_abs, std::abs(d));
    }
    rep.oracle_rel_diff = ref2 > 0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
    rep.oracle_max_abs_diff = max_abs;
  }
  return rep;
}

void write_summary_csv(std::ostream& os, const RunConfig& cfg, const RunReport& r) {
  os << "op,n,leaf_dim,blocksize,workers,threads,leaf_fma_count,device_fma_count,cpu_batches,device_batches,"
        "t1_proxy,tinf_proxy,total_bytes_received,result_nonzeros,elapsed,wall_seconds,oracle_rel_diff\n";
  os << cfg.op << ',' << r.n << ',' << cfg.leaf_dim << ',' << cfg.blocksize << ',' << cfg.workers << ','
     << cfg.threads << ',' << r.stats.leaf_fma_count << ',' << r.stats.device_fma_count << ','
     << r.stats.cpu_batches << ',' << r.stats.device_batches << ',' << r.stats.t1_proxy() << ','
     << r.stats.tinf_proxy() << ',' << r.stats.total_bytes_received() << ',' << r.result_nonzeros << ','
     << r.stats.elapsed << ',' << r.wall_seconds << ',';
  if (r.oracle_rel_diff) os << *r.oracle_rel_diff;
  os << '\n';
}

void write_levels_csv(std::ostream& os, const RunStats& stats) {
  stats.write_level_csv(os);
  if (stats.sublevel_multiply_counts.empty()) return;
  std::vector<std::uint64_t> unit = stats.sublevel_multiply_counts;
  for (const char* tag : kMultiplyTags) {
    auto real = stats.by_level(tag);
    if (unit.size() < real.size()) unit.resize(real.size(), 0);
    for (std::size_t l = 0; l < real.size(); ++l) unit[l] += real[l];
  }
  for (std::size_t l = 0; l < unit.size(); ++l)
    if (unit[l]) os << "unit_multiply," << l << ',' << unit[l] << '\n';
}

std::vector<WeakScalingRow> weak_scaling(const RunConfig& base, int k, const std::vector<int>& ps) {
  if (k < 1) throw UsageError("--k must be >= 1");
  if (base.pattern.kind != "banded" && base.pattern.kind != "overlap")
    throw UsageError("weak scaling needs the banded or overlap pattern");
  if (base.pattern.kind == "overlap" && base.pattern.D != 1)
    throw UsageError("weak scaling with overlap matrices supports D = 1");
  std::vector<WeakScalingRow> rows;
  for (int p : ps) {
    if (p < 1) throw UsageError("process counts must be >= 1");
    RunConfig cfg = base;
    cfg.op = "multiply";
    cfg.workers = p;
    cfg.n = k * p;
    cfg.pattern.grid_side = k * p;
    cfg.oracle = false;
    RunReport r = run_experiment(cfg);

    WeakScalingRow row;
    row.p = p;
    row.n = r.n;
    row.bytes_min = static_cast<double>(r.stats.workers.front().bytes_received);
    for (const WorkerStats& w : r.stats.workers) {
      const auto b = static_cast<double>(w.bytes_received);
      row.bytes_max = std::max(row.bytes_max, b);
      row.bytes_min = std::min(row.bytes_min, b);
      row.bytes_avg += b / p;
    }
    double m = 2.0 * base.pattern.d + 1;
    if (base.pattern.kind == "overlap") m = static_cast<double>(generate(cfg.pattern, cfg.n, cfg.seed).triplets.size()) / r.n;
    row.spsumma_elements = models::spsumma_weak(m, k, p);
    row.spsumma_bytes = row.spsumma_elements * sizeof(double);
    rows.push_back(row);
  }
  return rows;
}

void write_weak_scaling_csv(std::ostream& os, const std::vector<WeakScalingRow>& rows) {
  os << "p,n,bytes_max,bytes_avg,bytes_min,spsumma_elements,spsumma_bytes\n";
  for (const auto& r : rows)
    os << r.p << ',' << r.n << ',' << r.bytes_max << ',' << r.bytes_avg << ',' << r.bytes_min << ','
       << r.spsumma_elements << ',' << r.spsumma_bytes << '\n';
}

std::vector<double> read_measured_levels(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open measured levels file " + path);
  std::map<std::string, std::map<int, double>> by_type;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string type, level, count;
    if (!std::getline(ls, type, ',') || !std::getline(ls, level, ',') || !std::getline(ls, count, ','))
      throw UsageError("malformed levels CSV line: " + line);
    by_type[type][std::stoi(level)] += std::stod(count);
  }
  const std::map<int, double>* rows = nullptr;
  if (by_type.contains("unit_multiply")) {
    rows = &by_type["unit_multiply"];
  } else {
    for (const char* tag : kMultiplyTags)
      if (by_type.contains(tag)) {
        rows = &by_type[tag];
        break;
      }
  }
  std::vector<double> out;
  if (!rows) return out;
  for (auto [l, c] : *rows) {
    if (static_cast<int>(out.size()) <= l) out.resize(l + 1, 0.0);
    out[l] = c;
  }
  return out;
}

void write_predictions(std::ostream& os, const PredictConfig& cfg) {
  os.precision(12);
  if (cfg.model == "spsumma") {
    os << "p,spsumma_elements,weak_elements\n";
    for (int p : cfg.ps) {
      if (p < 1) throw UsageError("process counts must be >= 1");
      os << p << ',' << models::spsumma_comm(cfg.m, cfg.N, p) << ',' << models::spsumma_weak(cfg.m, cfg.N, p) << '\n';
    }
    return;
  }
  if (cfg.L < 0 || cfg.L > 40) throw UsageError("--L must lie in [0, 40]");
  std::vector<double> measured;
  if (!cfg.measured.empty()) measured = read_measured_levels(cfg.measured);
  auto measured_at = [&](int l) -> std::string {
    if (cfg.measured.empty()) return "";
    std::ostringstream s;
    s << (l < static_cast<int>(measured.size()) ? measured[l] : 0.0);
    return s.str();
  };
  os << "level,predicted,boundA,boundB,measured\n";
  try {
    for (int l = 0; l <= cfg.L; ++l) {
      models::CostQuery q{cfg.L, l, cfg.delta, cfg.d, cfg.D, cfg.R};
      if (cfg.model == "random") {
        auto b = models::bound_random(q);
        os << l << ',' << models::predict_random(q) << ',' << b.bound_a << ',' << b.bound_b << ',' << measured_at(l)
           << '\n';
      } else if (cfg.model == "banded") {
        auto b = models::predict_banded(q);
        os << l << ',' << b.level_bound << ',' << b.level_bound << ',' << b.total_bound << ',' << measured_at(l) << '\n';
      } else if (cfg.model == "overlap") {
        auto s = models::predict_overlap(q);
        os << l << ',' << s.level_bound(l) << ',' << s.high_levels(l) << ',' << s.low_levels(l) << ','
           << measured_at(l) << '\n';
      } else {
        throw UsageError("unknown model '" + cfg.model + "'");
      }
    }
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

int cmd_gen(const PatternSpec& pattern, int n, std::uint64_t seed, const std::string& out, std::ostream& log) {
  GeneratedMatrix g = generate(pattern, n, seed);
  if (out.empty() || out == "-") {
    write_matrix(std::cout, g.n, g.triplets);
  } else {
    write_matrix_file(out, g.n, g.triplets);
    log << "wrote " << g.triplets.size() << " nonzeros of a " << g.n << " x " << g.n << " matrix to " << out << '\n';
  }
  return 0;
}

int cmd_run(const RunConfig& cfg, std::ostream& out) {
  RunReport r = run_experiment(cfg);
  if (!cfg.output.empty()) {
    auto w = open_out(cfg.output + "_workers.csv");
    r.stats.write_worker_csv(w);
    auto l = open_out(cfg.output + "_levels.csv");
    write_levels_csv(l, r.stats);
    auto s = open_out(cfg.output + "_summary.csv");
    write_summary_csv(s, cfg, r);
  }
  write_summary_csv(out, cfg, r);
  if (r.oracle_rel_diff && !(*r.oracle_rel_diff <= 1e-12)) {
    out << "oracle check failed: relative Frobenius difference " << *r.oracle_rel_diff << ", max abs difference "
        << *r.oracle_max_abs_diff << '\n';
    return 1;
  }
  if (r.oracle_rel_diff)
    out << "oracle check passed: relative difference " << *r.oracle_rel_diff << ", max abs difference "
        << *r.oracle_max_abs_diff << '\n';
  return 0;
}

int cmd_weak_scaling(const RunConfig& base, int k, const std::vector<int>& ps, const std::string& out,
                     std::ostream& log) {
  auto rows = weak_scaling(base, k, ps);
  if (out.empty() || out == "-") {
    write_weak_scaling_csv(log, rows);
  } else {
    auto os = open_out(out);
    write_weak_scaling_csv(os, rows);
    log << "wrote " << rows.size() << " rows to " << out << '\n';
  }
  return 0;
}

int cmd_predict(const PredictConfig& cfg, const std::string& out, std::ostream& log) {
  if (out.empty() || out == "-") {
    write_predictions(log, cfg);
  } else {
    auto os = open_out(out);
    write_predictions(os, cfg);
  }
  return 0;
}

}  // namespace qmat::cli
