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

#include <doctest.h>

#include <functional>
#include <random>
#include <vector>

#include "dense_oracle.hpp"
#include "qmat/matmul_ops.hpp"
#include "qmat/quadtree.hpp"
#include "qmat/sparsity_models.hpp"

using namespace qmat;
namespace t = qmat::testing;

namespace {

Matrix mk(Runtime& rt, int n, int leaf, int bs, const std::vector<Triplet>& ts) {
  return build(rt, {n, leaf, bs, 0, 0}, ts);
}

t::Dense dense(const Runtime& rt, const Matrix& m) { return t::from_triplets(m.n, to_triplets(rt, m)); }

std::vector<Triplet> random_pattern(int n, int kind, std::uint64_t seed) {
  switch (kind) {
    case 0: return models::gen_random(n, 1.0, seed);
    case 1: return models::gen_random(n, 0.1, seed);
    default: return models::gen_banded(n, 3, seed);
  }
}

// Multiply tasks per level of the quadtree recursion, enumerated directly on
// dense patterns of nominal (power-of-two) dimension with unit leaves.
std::vector<std::uint64_t> brute_force_counts(const t::Dense& a, const t::Dense& b, int nominal) {
  std::vector<std::uint64_t> counts;
  auto nz = [](const t::Dense& m, int r0, int c0, int size) {
    for (int i = r0; i < r0 + size && i < m.n; ++i)
      for (int j = c0; j < c0 + size && j < m.n; ++j)
        if (m(i, j) != 0) return true;
    return false;
  };
  std::function<void(int, int, int, int, int, int, int)> rec = [&](int level, int ar, int ac, int br, int bc,
                                                                   int size, int) {
    if (!nz(a, ar, ac, size) || !nz(b, br, bc, size)) return;
    if (static_cast<int>(counts.size()) <= level) counts.resize(level + 1, 0);
    ++counts[level];
    if (size == 1) return;
    const int h = size / 2;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        for (int k = 0; k < 2; ++k) rec(level + 1, ar + i * h, ac + k * h, br + k * h, bc + j * h, h, 0);
  };
  rec(0, 0, 0, 0, 0, nominal, 0);
  return counts;
}

}  // namespace

TEST_SUITE("matmul") {
  TEST_CASE("hand-computed products") {
    Runtime rt;
    Matrix a = mk(rt, 2, 1, 1, {{0, 0, 1}, {0, 1, 2}, {1, 0, 3}, {1, 1, 4}});
    Matrix b = mk(rt, 2, 1, 1, {{0, 0, 5}, {0, 1, 6}, {1, 0, 7}, {1, 1, 8}});
    auto c = to_triplets(rt, multiply(rt, a, b).matrix);
    CHECK(c == std::vector<Triplet>{{0, 0, 19}, {0, 1, 22}, {1, 0, 43}, {1, 1, 50}});
  }

  TEST_CASE("identity times A is A exactly") {
    Runtime rt;
    std::vector<Triplet> id;
    for (int i = 0; i < 50; ++i) id.push_back({i, i, 1.0});
    auto ts = models::gen_random(50, 0.3, 2);
    Matrix a = mk(rt, 50, 8, 4, ts);
    CHECK(to_triplets(rt, multiply(rt, mk(rt, 50, 8, 4, id), a).matrix) == to_triplets(rt, a));
  }

  TEST_CASE("every operation matches the dense oracle") {
    std::uint64_t seed = 100;
    for (int n : {37, 64, 100}) {
      for (int leaf : {8, 16}) {
        for (int bs : {1, 4}) {
          for (int kind : {0, 1, 2}) {
            Runtime rt;
            auto ta = random_pattern(n, kind, ++seed), tb = random_pattern(n, kind, ++seed);
            Matrix a = mk(rt, n, leaf, bs, ta), b = mk(rt, n, leaf, bs, tb);
            const t::Dense da = dense(rt, a), db = dense(rt, b);
            const t::Dense at = t::transpose(da), bt = t::transpose(db);

            for (bool fa : {false, true})
              for (bool fb : {false, true}) {
                auto r = multiply(rt, a, b, {fa, fb});
                CHECK(t::rel_diff(dense(rt, r.matrix), t::multiply(fa ? at : da, fb ? bt : db)) < 1e-12);
              }
            CHECK(t::rel_diff(dense(rt, add(rt, a, b).matrix), t::add(da, db)) < 1e-12);

            auto sym = models::upper_triangle(models::symmetrize(ta));
            Matrix s = mk(rt, n, leaf, bs, sym);
            const t::Dense sf = t::symmetric_from_upper(dense(rt, s));
            auto sq = symm_square(rt, s).matrix;
            CHECK(is_upper_triangle(rt, sq.root));
            CHECK(t::rel_diff(dense(rt, sq), t::upper_part(t::multiply(sf, sf))) < 1e-12);
            CHECK(t::rel_diff(dense(rt, symm_multiply(rt, s, b, Side::left).matrix), t::multiply(sf, db)) < 1e-12);
            CHECK(t::rel_diff(dense(rt, symm_multiply(rt, s, b, Side::right).matrix), t::multiply(db, sf)) < 1e-12);
            auto aat = syrk(rt, a, SyrkMode::aat).matrix;
            auto ata = syrk(rt, a, SyrkMode::ata).matrix;
            CHECK(is_upper_triangle(rt, aat.root));
            CHECK(is_upper_triangle(rt, ata.root));
            CHECK(t::rel_diff(dense(rt, aat), t::upper_part(t::multiply(da, at))) < 1e-12);
            CHECK(t::rel_diff(dense(rt, ata), t::upper_part(t::multiply(at, da))) < 1e-12);
          }
        }
      }
    }
  }

  TEST_CASE("symmetric hand examples") {
    Runtime rt;
    Matrix s = mk(rt, 2, 1, 1, {{0, 0, 2}, {0, 1, 1}, {1, 1, 3}});
    CHECK(to_triplets(rt, symm_square(rt, s).matrix) == std::vector<Triplet>{{0, 0, 5}, {0, 1, 5}, {1, 1, 10}});
    Matrix b = mk(rt, 2, 1, 1, {{0, 0, 1}, {1, 1, 2}});
    CHECK(to_triplets(rt, symm_multiply(rt, s, b, Side::left).matrix) ==
          std::vector<Triplet>{{0, 0, 2}, {0, 1, 2}, {1, 0, 1}, {1, 1, 6}});
    Matrix a = mk(rt, 2, 1, 1, {{0, 0, 1}, {0, 1, 2}, {1, 1, 1}});
    CHECK(to_triplets(rt, syrk(rt, a, SyrkMode::aat).matrix) == std::vector<Triplet>{{0, 0, 5}, {0, 1, 2}, {1, 1, 1}});
  }

  TEST_CASE("identity as the symmetric operand") {
    Runtime rt;
    std::vector<Triplet> id;
    for (int i = 0; i < 40; ++i) id.push_back({i, i, 1.0});
    Matrix s = mk(rt, 40, 8, 2, id);
    Matrix b = mk(rt, 40, 8, 2, models::gen_random(40, 0.2, 6));
    CHECK(to_triplets(rt, symm_square(rt, s).matrix) == id);
    CHECK(to_triplets(rt, symm_multiply(rt, s, b, Side::left).matrix) == to_triplets(rt, b));
    CHECK(to_triplets(rt, symm_multiply(rt, s, b, Side::right).matrix) == to_triplets(rt, b));
  }

  TEST_CASE("NIL operands short-circuit") {
    Runtime rt;
    Matrix a = mk(rt, 32, 8, 2, models::gen_random(32, 0.2, 1));
    Matrix z = mk(rt, 32, 8, 2, {});
    REQUIRE(z.root.is_nil());
    auto r = multiply(rt, a, z);
    CHECK(r.matrix.root.is_nil());
    CHECK(r.stats.leaf_fma_count == 0);
    CHECK(add(rt, z, z).matrix.root.is_nil());
    CHECK(to_triplets(rt, add(rt, a, z).matrix) == to_triplets(rt, a));
    CHECK(syrk(rt, z, SyrkMode::aat).matrix.root.is_nil());
    CHECK(symm_square(rt, z).matrix.root.is_nil());
  }

  TEST_CASE("A plus minus A keeps its structure with zero values") {
    Runtime rt;
    auto ts = models::gen_random(30, 0.2, 9);
    auto neg = ts;
    for (auto& x : neg) x.value = -x.value;
    auto r = add(rt, mk(rt, 30, 8, 2, ts), mk(rt, 30, 8, 2, neg));
    CHECK_FALSE(r.matrix.root.is_nil());
    CHECK(frobenius_norm_sq(rt, r.matrix) == 0.0);
  }

  TEST_CASE("outputs stay pruned") {
    Runtime rt;
    // Block-diagonal operands: off-diagonal products are all NIL.
    std::vector<Triplet> ts;
    for (int i = 0; i < 64; ++i) ts.push_back({i, i ^ 1, 1.0});
    Matrix a = mk(rt, 64, 4, 2, ts);
    auto c = multiply(rt, a, a).matrix;
    CHECK(is_pruned(rt, c.root));
    CHECK(is_pruned(rt, syrk(rt, a, SyrkMode::ata).matrix.root));
  }

  TEST_CASE("transpose coherence") {
    Runtime rt;
    auto ta = models::gen_random(45, 0.15, 21);
    std::vector<Triplet> tt;
    for (auto x : ta) tt.push_back({x.col, x.row, x.value});
    Matrix a = mk(rt, 45, 8, 4, ta), at = mk(rt, 45, 8, 4, tt);
    Matrix b = mk(rt, 45, 8, 4, models::gen_random(45, 0.15, 22));
    CHECK(to_triplets(rt, multiply(rt, a, b, {true, false}).matrix) == to_triplets(rt, multiply(rt, at, b).matrix));
  }

  TEST_CASE("mismatched operands are refused") {
    Runtime rt;
    Matrix a = mk(rt, 32, 8, 2, models::gen_random(32, 0.2, 1));
    Matrix b = mk(rt, 16, 8, 2, models::gen_random(16, 0.2, 1));
    Matrix c = mk(rt, 32, 16, 2, models::gen_random(32, 0.2, 1));
    CHECK_THROWS_AS(multiply(rt, a, b), DimensionError);
    CHECK_THROWS_AS(add(rt, a, c), DimensionError);
    CHECK_THROWS_AS(symm_square(rt, a), DimensionError);
  }

  TEST_CASE("assembly from child ids") {
    Runtime rt;
    const std::array<ChunkId, 4> nils{};
    CHECK(assemble_from_children(rt, {8, 4, 2, 0, 0}, nils).matrix.root.is_nil());

    auto ts = models::gen_random(8, 0.5, 3);
    Matrix a = mk(rt, 8, 4, 2, ts);
    MatrixNode root = MatrixNode::decode(rt.peek(a.root).bytes());
    auto again = assemble_from_children(rt, {8, 4, 2, 0, 0}, root.children).matrix;
    CHECK(to_triplets(rt, again) == to_triplets(rt, a));

    std::array<ChunkId, 4> one{};
    one[1] = root.children[1];
    REQUIRE_FALSE(one[1].is_nil());
    auto single = assemble_from_children(rt, {8, 4, 2, 0, 0}, one).matrix;
    MatrixNode sn = MatrixNode::decode(rt.peek(single.root).bytes());
    CHECK(sn.children[0].is_nil());
    CHECK(sn.children[2].is_nil());
    CHECK(sn.children[3].is_nil());
    CHECK_THROWS(assemble_from_children(rt, {16, 4, 2, 0, 0}, root.children));
  }

  TEST_CASE("tridiagonal N=8 unit-leaf counts match the enumerated recursion") {
    Runtime rt;
    Matrix a = mk(rt, 8, 1, 1, models::gen_banded(8, 1));
    auto r = multiply(rt, a, a);
    const t::Dense da = dense(rt, a);
    CHECK(r.stats.by_level("multiply_nn") == brute_force_counts(da, da, 8));
  }

  TEST_CASE("unit-leaf counts match the enumerated recursion on random patterns") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      Runtime rt;
      Matrix a = mk(rt, 32, 1, 1, models::gen_random(32, 0.05, seed));
      Matrix b = mk(rt, 32, 1, 1, models::gen_random(32, 0.05, seed + 50));
      auto r = multiply(rt, a, b);
      CHECK(r.stats.by_level("multiply_nn") == brute_force_counts(dense(rt, a), dense(rt, b), 32));
    }
  }

  TEST_CASE("sublevel counting reproduces unit-leaf task counts") {
    for (int leaf : {4, 16}) {
      for (std::uint64_t seed : {7u, 8u}) {
        auto ta = models::gen_random(64, 0.03, seed), tb = models::gen_random(64, 0.03, seed + 10);
        Runtime unit;
        auto ref = multiply(unit, mk(unit, 64, 1, 1, ta), mk(unit, 64, 1, 1, tb)).stats.by_level("multiply_nn");

        RuntimeConfig cfg;
        cfg.count_sublevel_tasks = true;
        cfg.workers = 2;
        Runtime rt(cfg);
        auto r = multiply(rt, mk(rt, 64, leaf, 2, ta), mk(rt, 64, leaf, 2, tb));
        CHECK(r.stats.unit_multiply_counts("multiply_nn") == ref);
      }
    }
  }

  TEST_CASE("symmetric square of a dense matrix does about half the leaf work") {
    Runtime rt;
    auto full = models::symmetrize(models::gen_random(128, 1.0, 4));
    Matrix s = mk(rt, 128, 32, 8, models::upper_triangle(full));
    Matrix f = mk(rt, 128, 32, 8, full);
    const double ratio = static_cast<double>(symm_square(rt, s).stats.leaf_fma_count) /
                         static_cast<double>(multiply(rt, f, f).stats.leaf_fma_count);
    CHECK(ratio >= 0.4);
    CHECK(ratio <= 0.6);
  }
}
