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
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>

#include "qmat/sparsity_models.hpp"

namespace qmat::models {

namespace {

double nonzero_uniform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double v = 0.0;
  while (v == 0.0) v = u(rng);
  return v;
}

bool row_major_less(const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; }

}  // namespace

std::vector<Triplet> gen_random(int N, double delta, std::uint64_t seed) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (!(delta >= 0 && delta <= 1)) throw std::invalid_argument("delta must lie in [0, 1]");
  std::vector<Triplet> out;
  if (delta == 0) return out;
  std::mt19937_64 rng(seed);
  const long long total = static_cast<long long>(N) * N;
  if (delta == 1) {
    out.reserve(static_cast<std::size_t>(total));
    for (long long pos = 0; pos < total; ++pos)
      out.push_back({static_cast<int>(pos / N), static_cast<int>(pos % N), nonzero_uniform(rng)});
    return out;
  }
  // Gaps between successive nonzeros in row-major order are geometric.
  std::geometric_distribution<long long> gap(delta);
  long long pos = -1;
  while (true) {
    pos += gap(rng) + 1;
    if (pos >= total) break;
    out.push_back({static_cast<int>(pos / N), static_cast<int>(pos % N), nonzero_uniform(rng)});
  }
  return out;
}

std::vector<Triplet> gen_banded(int N, int d, std::optional<std::uint64_t> seed) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (d < 0) throw std::invalid_argument("half-bandwidth must be >= 0");
  std::optional<std::mt19937_64> rng;
  if (seed) rng.emplace(*seed);
  std::vector<Triplet> out;
  for (int i = 0; i < N; ++i) {
    for (int j = std::max(0, i - d); j <= std::min(N - 1, i + d); ++j) {
      double v = rng ? nonzero_uniform(*rng) : 1.0 / (1.0 + std::abs(i - j)) + 0.125 * ((i + 2 * j) % 5);
      out.push_back({i, j, v});
    }
  }
  return out;
}

namespace {

using Point = std::array<double, 3>;

// Recursive longest-axis median bisection of idx[lo, hi).
void divide_space(std::vector<int>& idx, std::size_t lo, std::size_t hi, const std::vector<Point>& pts, int D) {
  if (hi - lo <= 1) return;
  Point mn = pts[idx[lo]], mx = pts[idx[lo]];
  for (std::size_t i = lo; i < hi; ++i)
    for (int a = 0; a < D; ++a) {
      mn[a] = std::min(mn[a], pts[idx[i]][a]);
      mx[a] = std::max(mx[a], pts[idx[i]][a]);
    }
  int axis = 0;
  for (int a = 1; a < D; ++a)
    if (mx[a] - mn[a] > mx[axis] - mn[axis]) axis = a;
  const std::size_t mid = lo + (hi - lo) / 2;
  auto less = [&](int x, int y) {
    if (pts[x][axis] != pts[y][axis]) return pts[x][axis] < pts[y][axis];
    return x < y;
  };
  std::nth_element(idx.begin() + static_cast<std::ptrdiff_t>(lo), idx.begin() + static_cast<std::ptrdiff_t>(mid),
                   idx.begin() + static_cast<std::ptrdiff_t>(hi), less);
  divide_space(idx, lo, mid, pts, D);
  divide_space(idx, mid, hi, pts, D);
}

}  // namespace

OverlapMatrix gen_overlap(const OverlapParams& p) {
  if (p.D < 1 || p.D > 3) throw std::invalid_argument("spatial dimension must be 1, 2 or 3");
  if (p.grid_side < 1) throw std::invalid_argument("grid side must be >= 1");
  if (!(p.spacing > 0)) throw std::invalid_argument("spacing must be positive");
  if (!(p.jitter >= 0)) throw std::invalid_argument("jitter must be >= 0");
  if (!(p.R > 0)) throw std::invalid_argument("cutoff radius must be positive");

  long long count = 1;
  for (int a = 0; a < p.D; ++a) count *= p.grid_side;
  if (count > (1 << 24)) throw std::invalid_argument("too many particles");
  const int n = static_cast<int>(count);

  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> shift(-p.jitter, p.jitter);
  std::vector<Point> grid_pts(n, Point{0, 0, 0});
  for (int i = 0; i < n; ++i) {
    int rest = i;
    for (int a = 0; a < p.D; ++a) {
      grid_pts[i][a] = (rest % p.grid_side) * p.spacing + (p.jitter > 0 ? shift(rng) : 0.0);
      rest /= p.grid_side;
    }
  }

  OverlapMatrix out;
  out.n = n;
  out.order.resize(n);
  std::iota(out.order.begin(), out.order.end(), 0);
  divide_space(out.order, 0, out.order.size(), grid_pts, p.D);
  out.positions.resize(n);
  for (int i = 0; i < n; ++i) out.positions[i] = grid_pts[out.order[i]];

  // Neighbour search on a cell grid of width R.
  const auto& pos = out.positions;
  auto cell_of = [&](const Point& x) {
    std::array<long long, 3> c{0, 0, 0};
    for (int a = 0; a < p.D; ++a) c[a] = static_cast<long long>(std::floor(x[a] / p.R));
    return c;
  };
  std::map<std::array<long long, 3>, std::vector<int>> cells;
  for (int i = 0; i < n; ++i) cells[cell_of(pos[i])].push_back(i);

  const double r2max = p.R * p.R;
  for (int i = 0; i < n; ++i) {
    const auto c = cell_of(pos[i]);
    const int span_y = p.D >= 2 ? 1 : 0, span_z = p.D >= 3 ? 1 : 0;
    std::vector<int> hits;
    for (long long dx = -1; dx <= 1; ++dx)
      for (long long dy = -span_y; dy <= span_y; ++dy)
        for (long long dz = -span_z; dz <= span_z; ++dz) {
          auto it = cells.find({c[0] + dx, c[1] + dy, c[2] + dz});
          if (it == cells.end()) continue;
          for (int j : it->second) {
            double r2 = 0;
            for (int a = 0; a < p.D; ++a) r2 += (pos[i][a] - pos[j][a]) * (pos[i][a] - pos[j][a]);
            if (r2 < r2max) hits.push_back(j);
          }
        }
    std::sort(hits.begin(), hits.end());
    for (int j : hits) {
      double r2 = 0;
      for (int a = 0; a < p.D; ++a) r2 += (pos[i][a] - pos[j][a]) * (pos[i][a] - pos[j][a]);
      out.triplets.push_back({i, j, std::exp(-r2 / r2max)});
    }
  }
  return out;
}

std::vector<Triplet> gen_rmat(int scale, std::uint64_t edges, double a, std::uint64_t seed) {
  if (scale < 1 || scale > 30) throw std::invalid_argument("scale must lie in [1, 30]");
  if (!(a >= 0.25 && a < 1)) throw std::invalid_argument("a must lie in [0.25, 1)");
  const double b = (1 - a) / 3;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::uint64_t> keys;
  keys.reserve(edges);
  for (std::uint64_t e = 0; e < edges; ++e) {
    std::uint64_t r = 0, c = 0;
    for (int bit = 0; bit < scale; ++bit) {
      const double x = u(rng);
      int qr = 0, qc = 0;
      if (x < a) {
      } else if (x < a + b) {
        qc = 1;
      } else if (x < a + 2 * b) {
        qr = 1;
      } else {
        qr = qc = 1;
      }
      r = 2 * r + qr;
      c = 2 * c + qc;
    }
    keys.push_back((r << 32) | c);
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<Triplet> out;
  out.reserve(keys.size());
  for (auto k : keys) out.push_back({static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffu), 1.0});
  return out;
}

std::vector<Triplet> upper_triangle(std::span<const Triplet> ts) {
  std::vector<Triplet> out;
  for (const Triplet& t : ts)
    if (t.col >= t.row) out.push_back(t);
  std::sort(out.begin(), out.end(), row_major_less);
  return out;
}

std::vector<Triplet> symmetrize(std::span<const Triplet> ts) {
  std::map<std::pair<int, int>, double> upper;
  for (const Triplet& t : ts)
    if (t.row <= t.col) upper[{t.row, t.col}] = t.value;
  for (const Triplet& t : ts)
    if (t.row > t.col) upper.try_emplace({t.col, t.row}, t.value);
  std::vector<Triplet> out;
  for (const auto& [key, v] : upper) {
    out.push_back({key.first, key.second, v});
    if (key.first != key.second) out.push_back({key.second, key.first, v});
  }
  std::sort(out.begin(), out.end(), row_major_less);
  return out;
}

}  // namespace qmat::models
