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
#include <optional>
#include <span>
#include <vector>

#include "qmat/quadtree.hpp"

namespace qmat::models {

// ---------------------------------------------------------------------------
// Analytic task-count and communication models for a quadtree over an
// N = 2^L matrix with unit leaves; level l has 2^l x 2^l submatrices.

struct CostQuery {
  int L = 0;
  int l = 0;
  double delta = 1.0;  // nonzero probability (random family)
  int d = 1;           // half-bandwidth, a power of two (banded family)
  int D = 1;           // spatial dimension (overlap family)
  double R = 1.0;      // cutoff radius in units of the particle spacing
};

struct LevelCost {
  int level = 0;
  double value = 0;
};

/// Expected multiply tasks at level l for i.i.d. nonzeros:
/// 8^l (1 - (1 - delta)^(4^(L-l)))^2.
double predict_random(const CostQuery& q);
std::vector<LevelCost> predict_random_levels(int L, double delta);

struct RandomBounds {
  double bound_a = 0;      // 8^l
  double bound_b = 0;      // 16^L delta^2 / 2^l
  double total_bound = 0;  // (3 + 1/7) (delta N^2)^(3/2)
};
/// Throws std::invalid_argument when delta < 1/N^2.
RandomBounds bound_random(const CostQuery& q);

struct BandedBound {
  double level_bound = 0;  // 2^l (2 d_l + 1)^2
  double total_bound = 0;  // ((4 + 4/7) d^2 + (5 + 1/3) d + 2 + 9/d) N
};
/// Throws std::invalid_argument unless d is a power of two no larger than N.
BandedBound predict_banded(const CostQuery& q);
double banded_level_bound(int L, int d, int l);
double banded_total_bound(int d, double N);

/// Proportionality model for matrices with a spatial cutoff. Only shapes are
/// predicted; constants are fit parameters.
struct OverlapShape {
  int L = 0;
  int D = 1;
  double R = 1.0;

  /// Box width at level l in units of the particle spacing.
  double box_width(int l) const;
  /// Boxes reachable from one box at level l (upper estimate).
  double reach(int l) const;
  /// 2^l M_l^2.
  double level_bound(int l) const;
  /// Shape when boxes are wider than R: 3^(2D) 2^l.
  double high_levels(int l) const;
  /// Shape when boxes are narrower than R: R^(2D) 2^(3l - 2L).
  double low_levels(int l) const;
  /// First level whose boxes are narrower than R.
  int crossover_level() const;
};
OverlapShape predict_overlap(const CostQuery& q);

/// True when counts[l] >= 2 counts[l-1] for every l >= 1.
bool doubles_every_level(std::span<const double> counts);
/// Least-squares slope of log2(counts[l]) against l over [first, last].
double log2_slope(std::span<const double> counts, int first, int last);

/// Elements each process fetches in sparse SUMMA: 2 m N / sqrt(p).
double spsumma_comm(double m, double N, int p);
/// Weak-scaling form with N = k p: 2 m k sqrt(p).
double spsumma_weak(double m, double k, int p);

// ---------------------------------------------------------------------------
// Generators. All are pure functions of their arguments.

/// Each entry nonzero with probability delta, values uniform in [-1, 1].
std::vector<Triplet> gen_random(int N, double delta, std::uint64_t seed);

/// Nonzeros exactly where |i - j| <= d. Without a seed values are a fixed
/// function of position; with one they are uniform in [-1, 1].
std::vector<Triplet> gen_banded(int N, int d, std::optional<std::uint64_t> seed = std::nullopt);

struct OverlapParams {
  int D = 1;
  int grid_side = 64;
  double spacing = 2.0;
  double jitter = 1.0;  // max displacement per coordinate
  double R = 5.0;
  std::uint64_t seed = 1;
};

struct OverlapMatrix {
  int n = 0;
  std::vector<Triplet> triplets;
  /// order[i] = grid index of the particle placed at matrix index i.
  std::vector<int> order;
  /// Particle coordinates in matrix order.
  std::vector<std::array<double, 3>> positions;
};

/// Particles on a jittered D-dimensional grid, ordered by recursive
/// longest-axis median bisection; A(i,j) = exp(-r_ij^2 / R^2) when r_ij < R.
OverlapMatrix gen_overlap(const OverlapParams& params);

/// R-MAT graph with quadrant probabilities (a, b, b, b), b = (1 - a) / 3.
/// Duplicate edges collapse; every surviving edge has value 1.
std::vector<Triplet> gen_rmat(int scale, std::uint64_t edges, double a, std::uint64_t seed);

/// Entries with col >= row.
std::vector<Triplet> upper_triangle(std::span<const Triplet> ts);
/// Symmetric matrix from an arbitrary pattern: entries (i,j) and (j,i) both
/// present with the value from the upper-triangle position when given.
std::vector<Triplet> symmetrize(std::span<const Triplet> ts);

}  // namespace qmat::models
