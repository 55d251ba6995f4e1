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

#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "qmat/sparsity_models.hpp"

namespace qmat::models {

namespace {

void check_levels(const CostQuery& q) {
  if (q.L < 0 || q.L > 60) throw std::invalid_argument("L must be in [0, 60]");
  if (q.l < 0 || q.l > q.L) throw std::invalid_argument("level must lie in [0, L]");
}

void check_delta(double delta) {
  if (!(delta > 0 && delta <= 1)) throw std::invalid_argument("delta must lie in (0, 1]");
}

}  // namespace

double predict_random(const CostQuery& q) {
  check_levels(q);
  check_delta(q.delta);
  const double n_l = std::ldexp(1.0, 2 * (q.L - q.l));
  // Probability that a level-l submatrix holds at least one nonzero.
  const double nonzero = -std::expm1(n_l * std::log1p(-q.delta));
  return std::ldexp(1.0, 3 * q.l) * nonzero * nonzero;
}

std::vector<LevelCost> predict_random_levels(int L, double delta) {
  std::vector<LevelCost> out;
  for (int l = 0; l <= L; ++l) out.push_back({l, predict_random({L, l, delta})});
  return out;
}

RandomBounds bound_random(const CostQuery& q) {
  check_levels(q);
  check_delta(q.delta);
  const double n = std::ldexp(1.0, q.L);
  if (q.delta < 1.0 / (n * n)) throw std::invalid_argument("bounds need delta >= 1/N^2");
  RandomBounds b;
  b.bound_a = std::ldexp(1.0, 3 * q.l);
  b.bound_b = std::ldexp(q.delta * q.delta, 4 * q.L - q.l);
  b.total_bound = (3.0 + 1.0 / 7.0) * std::pow(q.delta * n * n, 1.5);
  return b;
}

double banded_level_bound(int L, int d, int l) {
  if (d < 1 || !std::has_single_bit(static_cast<unsigned>(d))) throw std::invalid_argument("d must be a power of two");
  const int k = std::countr_zero(static_cast<unsigned>(d));
  if (k > L) throw std::invalid_argument("band wider than the matrix");
  if (l < 0 || l > L) throw std::invalid_argument("level must lie in [0, L]");
  const double d_l = l < L - k ? 1.0 : std::ldexp(1.0, l - (L - k));
  return std::ldexp(1.0, l) * (2 * d_l + 1) * (2 * d_l + 1);
}

double banded_total_bound(int d, double N) {
  if (d < 1) throw std::invalid_argument("d must be >= 1");
  const double dd = d;
  return ((4.0 + 4.0 / 7.0) * dd * dd + (5.0 + 1.0 / 3.0) * dd + 2.0 + 9.0 / dd) * N;
}

BandedBound predict_banded(const CostQuery& q) {
  check_levels(q);
  return {banded_level_bound(q.L, q.d, q.l), banded_total_bound(q.d, std::ldexp(1.0, q.L))};
}

double OverlapShape::box_width(int l) const { return std::exp2(static_cast<double>(L - l) / D); }

double OverlapShape::reach(int l) const {
  const double per_axis = 2.0 * std::ceil(R / box_width(l)) + 1.0;
  return std::pow(per_axis, D);
}

double OverlapShape::level_bound(int l) const {
  const double m = reach(l);
  return std::ldexp(m * m, l);
}

double OverlapShape::high_levels(int l) const { return std::ldexp(std::pow(3.0, 2 * D), l); }

double OverlapShape::low_levels(int l) const { return std::ldexp(std::pow(R, 2 * D), 3 * l - 2 * L); }

int OverlapShape::crossover_level() const {
  for (int l = 0; l <= L; ++l)
    if (box_width(l) < R) return l;
  return L + 1;
}

OverlapShape predict_overlap(const CostQuery& q) {
  check_levels(q);
  if (q.D < 1 || q.D > 3) throw std::invalid_argument("spatial dimension must be 1, 2 or 3");
  if (!(q.R > 0)) throw std::invalid_argument("cutoff radius must be positive");
  return OverlapShape{q.L, q.D, q.R};
}

bool doubles_every_level(std::span<const double> counts) {
  for (std::size_t l = 1; l < counts.size(); ++l)
    if (counts[l] < 2 * counts[l - 1]) return false;
  return true;
}

double log2_slope(std::span<const double> counts, int first, int last) {
  if (first < 0 || last >= static_cast<int>(counts.size()) || last <= first)
    throw std::invalid_argument("slope needs at least two levels in range");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = last - first + 1;
  for (int l = first; l <= last; ++l) {
    if (!(counts[l] > 0)) throw std::invalid_argument("slope needs positive counts");
    const double y = std::log2(counts[l]);
    sx += l;
    sy += y;
    sxx += static_cast<double>(l) * l;
    sxy += l * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

double spsumma_comm(double m, double N, int p) {
  if (p < 1) throw std::invalid_argument("process count must be >= 1");
  return 2.0 * m * N / std::sqrt(static_cast<double>(p));
}

double spsumma_weak(double m, double k, int p) {
  if (p < 1) throw std::invalid_argument("process count must be >= 1");
  return 2.0 * m * k * std::sqrt(static_cast<double>(p));
}

}  // namespace qmat::models
