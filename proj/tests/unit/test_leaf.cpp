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

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include "qmat/common.hpp"
#include "qmat/leaf/batches.hpp"
#include "qmat/leaf/block_sparse_leaf.hpp"
#include "qmat/leaf/device_manager.hpp"
#include "qmat/leaf/leaf_ops.hpp"

using namespace qmat;
using leaf::BlockSparseLeaf;

namespace {

// Fill each element with probability `fill`.
BlockSparseLeaf random_leaf(int dim, int bs, double fill, std::uint64_t seed) {
  BlockSparseLeaf m(dim, bs);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0), v(-1.0, 1.0);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      if (u(rng) < fill) m.set(i, j, v(rng));
  return m;
}

BlockSparseLeaf upper_of(const BlockSparseLeaf& m) {
  BlockSparseLeaf u(m.dim(), m.blocksize());
  for (int i = 0; i < m.dim(); ++i)
    for (int j = i; j < m.dim(); ++j)
      if (m.at(i, j) != 0) u.set(i, j, m.at(i, j));
  return u;
}

using DenseRM = std::vector<double>;

DenseRM dense_mul(const DenseRM& a, bool ta, const DenseRM& b, bool tb, int n) {
  DenseRM c(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0;
      for (int k = 0; k < n; ++k) {
        const double x = ta ? a[k * n + i] : a[i * n + k];
        const double y = tb ? b[j * n + k] : b[k * n + j];
        s += x * y;
      }
      c[i * n + j] = s;
    }
  return c;
}

DenseRM sym_full(const DenseRM& u, int n) {
  DenseRM s(u.size());
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) s[i * n + j] = s[j * n + i] = u[i * n + j];
  return s;
}

DenseRM upper_dense(const DenseRM& x, int n) {
  DenseRM u(x.size(), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) u[i * n + j] = x[i * n + j];
  return u;
}

double rel(const DenseRM& got, const DenseRM& want) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    num += (got[i] - want[i]) * (got[i] - want[i]);
    den += want[i] * want[i];
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

bool padding_is_zero(const BlockSparseLeaf& m) {
  bool ok = true;
  const int bs = m.blocksize();
  m.for_each_block([&](int bi, int bj, std::span<const double> blk) {
    for (int r = 0; r < bs; ++r)
      for (int c = 0; c < bs; ++c)
        if ((bi * bs + r >= m.dim() || bj * bs + c >= m.dim()) && blk[r * bs + c] != 0) ok = false;
  });
  return ok;
}

}  // namespace

TEST_SUITE("leaf") {
  TEST_CASE("serialization round trip") {
    for (int bs : {1, 3, 4, 16}) {
      BlockSparseLeaf m = random_leaf(37, bs, 0.2, static_cast<std::uint64_t>(bs));
      BlockSparseLeaf back = BlockSparseLeaf::deserialize(m.serialize());
      CHECK(back == m);
      CHECK(back.to_dense() == m.to_dense());
      CHECK(back.num_blocks() == m.num_blocks());
    }
    BlockSparseLeaf empty(8, 4);
    CHECK(BlockSparseLeaf::deserialize(empty.serialize()) == empty);
  }

  TEST_CASE("truncated payloads are rejected") {
    auto bytes = random_leaf(16, 4, 0.5, 1).serialize();
    bytes.resize(bytes.size() - 3);
    CHECK_THROWS(BlockSparseLeaf::deserialize(bytes));
  }

  TEST_CASE("edge padding stays zero") {
    BlockSparseLeaf m = random_leaf(10, 4, 1.0, 2);
    CHECK(m.grid() == 3);
    CHECK(padding_is_zero(m));
    CHECK(padding_is_zero(leaf::multiply(m, m, {})));
    CHECK(padding_is_zero(leaf::multiply(m, m, {true, false})));
    CHECK(padding_is_zero(leaf::add(m, m)));
    CHECK(padding_is_zero(m.transposed()));
  }

  TEST_CASE("only touched blocks are allocated") {
    BlockSparseLeaf m(16, 4);
    m.set(0, 0, 1.0);
    m.set(13, 9, 2.0);
    CHECK(m.num_blocks() == 2);
    CHECK(m.has_block(0, 0));
    CHECK(m.has_block(3, 2));
    CHECK_FALSE(m.has_block(1, 1));
    CHECK(m.at(13, 9) == 2.0);
    CHECK(m.frobenius_norm_sq() == doctest::Approx(5.0));
  }

  TEST_CASE("batches are keyed by the inner block index") {
    // A has block columns {0, 2}; B has block row {2} only.
    BlockSparseLeaf a(12, 4), b(12, 4);
    a.set(0, 0, 1.0);
    a.set(5, 9, 1.0);
    b.set(9, 1, 1.0);
    auto batches = leaf::build_batches(a, b, {});
    REQUIRE(batches.size() == 1);
    CHECK(batches[0].k == 2);
    REQUIRE(batches[0].jobs.size() == 1);
    CHECK(batches[0].jobs[0].i == 1);
    CHECK(batches[0].jobs[0].j == 0);
  }

  TEST_CASE("empty and diagonal operands") {
    BlockSparseLeaf e(8, 2);
    CHECK(leaf::build_batches(e, e, {}).empty());
    BlockSparseLeaf d(8, 2);
    for (int i = 0; i < 8; ++i) d.set(i, i, 1.0 + i);
    auto batches = leaf::build_batches(d, d, {});
    CHECK(batches.size() == 4);
    for (const auto& b : batches) CHECK(b.jobs.size() == 1);
  }

  TEST_CASE("dense grids give grid-many batches of grid^2 jobs") {
    BlockSparseLeaf a = random_leaf(12, 4, 1.0, 3);
    auto batches = leaf::build_batches(a, a, {});
    CHECK(batches.size() == 3);
    for (const auto& b : batches) {
      CHECK(b.jobs.size() == 9);
      std::set<std::pair<int, int>> dest;
      for (auto j : b.jobs) dest.insert({j.i, j.j});
      CHECK(dest.size() == b.jobs.size());
    }
    leaf::LeafOpStats st;
    leaf::multiply(a, a, {}, nullptr, &st);
    // 4x4 grid of full blocks: one multiply-add per scalar triple.
    BlockSparseLeaf f = random_leaf(16, 4, 1.0, 4);
    leaf::LeafOpStats sf;
    leaf::multiply(f, f, {}, nullptr, &sf);
    CHECK(sf.fma == 16u * 16u * 16u);
    CHECK(sf.cpu_batches == 4);
  }

  TEST_CASE("priority is twice bs cubed per remaining job") {
    BlockSparseLeaf a = random_leaf(12, 4, 1.0, 3);
    auto batches = leaf::build_batches(a, a, {});
    CHECK(leaf::batch_priority(batches, 0, 4) == doctest::Approx(2.0 * 64 * 27));
    CHECK(leaf::batch_priority(batches, 2, 4) == doctest::Approx(2.0 * 64 * 9));
  }

  TEST_CASE("multiply matches the dense oracle for every transpose variant") {
    for (double fill : {1.0, 0.1, 0.02}) {
      for (int bs : {1, 4, 5}) {
        BlockSparseLeaf a = random_leaf(40, bs, fill, 10 + bs);
        BlockSparseLeaf b = random_leaf(40, bs, fill, 20 + bs);
        for (bool ta : {false, true})
          for (bool tb : {false, true}) {
            auto c = leaf::multiply(a, b, {ta, tb});
            auto want = dense_mul(a.to_dense(), ta, b.to_dense(), tb, 40);
            CHECK(rel(c.to_dense(), want) < 1e-12);
          }
      }
    }
  }

  TEST_CASE("large sparse multiply matches the dense oracle") {
    BlockSparseLeaf a = random_leaf(1024, 16, 0.1, 31);
    BlockSparseLeaf b = random_leaf(1024, 16, 0.1, 32);
    auto c = leaf::multiply(a, b, {});
    CHECK(rel(c.to_dense(), dense_mul(a.to_dense(), false, b.to_dense(), false, 1024)) < 1e-12);
  }

  TEST_CASE("blocksize mismatch is rejected") {
    BlockSparseLeaf a(8, 2), b(8, 4);
    CHECK_THROWS_AS(leaf::multiply(a, b, {}), DimensionError);
    CHECK_THROWS_AS(leaf::add(a, b), DimensionError);
  }

  TEST_CASE("add matches the dense sum") {
    BlockSparseLeaf a = random_leaf(20, 4, 0.3, 5), b = random_leaf(20, 4, 0.3, 6);
    auto c = leaf::add(a, b).to_dense();
    auto da = a.to_dense(), db = b.to_dense();
    for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == da[i] + db[i]);
  }

  TEST_CASE("symmetric kernels match the dense oracle") {
    for (int bs : {1, 4, 6}) {
      BlockSparseLeaf s = upper_of(random_leaf(30, bs, 0.3, 40 + bs));
      REQUIRE(leaf::is_upper_stored(s));
      const auto full = sym_full(s.to_dense(), 30);

      auto sq = leaf::symm_square(s);
      CHECK(leaf::is_upper_stored(sq));
      CHECK(rel(sq.to_dense(), upper_dense(dense_mul(full, false, full, false, 30), 30)) < 1e-12);

      BlockSparseLeaf b = random_leaf(30, bs, 0.3, 50 + bs);
      auto left = leaf::symm_multiply(s, b, Side::left);
      CHECK(rel(left.to_dense(), dense_mul(full, false, b.to_dense(), false, 30)) < 1e-12);
      auto right = leaf::symm_multiply(s, b, Side::right);
      CHECK(rel(right.to_dense(), dense_mul(b.to_dense(), false, full, false, 30)) < 1e-12);

      auto aat = leaf::syrk(b, SyrkMode::aat);
      CHECK(rel(aat.to_dense(), upper_dense(dense_mul(b.to_dense(), false, b.to_dense(), true, 30), 30)) < 1e-12);
      auto ata = leaf::syrk(b, SyrkMode::ata);
      CHECK(rel(ata.to_dense(), upper_dense(dense_mul(b.to_dense(), true, b.to_dense(), false, 30), 30)) < 1e-12);
    }
  }

  TEST_CASE("syrk of a single block gives that block times its transpose, upper part") {
    BlockSparseLeaf a(8, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) a.set(i, j, 1.0 + i - 2.0 * j);
    auto c = leaf::syrk(a, SyrkMode::aat);
    CHECK(c.num_blocks() == 1);
    CHECK(c.has_block(0, 0));
    auto want = upper_dense(dense_mul(a.to_dense(), false, a.to_dense(), true, 8), 8);
    CHECK(c.to_dense() == want);
  }

  TEST_CASE("symmetric square of the identity is the identity") {
    BlockSparseLeaf id(12, 4);
    for (int i = 0; i < 12; ++i) id.set(i, i, 1.0);
    CHECK(leaf::symm_square(id) == id);
  }

  TEST_CASE("lower-stored operands are refused by symmetric kernels") {
    BlockSparseLeaf l(8, 4);
    l.set(5, 1, 1.0);
    CHECK_FALSE(leaf::is_upper_stored(l));
    CHECK_THROWS_AS(leaf::symm_square(l), DimensionError);
  }

  TEST_CASE("symmetric square does about half the work of a full multiply") {
    BlockSparseLeaf s = upper_of(random_leaf(64, 4, 1.0, 9));
    leaf::LeafOpStats half, full;
    leaf::symm_square(s, nullptr, &half);
    auto f = leaf::expand_symmetric(s);
    leaf::multiply(f, f, {}, nullptr, &full);
    const double ratio = static_cast<double>(half.fma) / static_cast<double>(full.fma);
    CHECK(ratio > 0.4);
    CHECK(ratio < 0.6);
  }

  TEST_CASE("sublevel counts match brute-force enumeration") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      BlockSparseLeaf a = random_leaf(16, 4, 0.08, seed), b = random_leaf(16, 4, 0.08, seed + 100);
      for (bool ta : {false, true})
        for (bool tb : {false, true}) {
          auto counts = leaf::sublevel_multiply_counts(a, b, {ta, tb});
          REQUIRE(counts.size() == 4);
          for (int s = 1; s <= 4; ++s) {
            const int sub = 16 >> s, nb = 16 / sub;
            auto nz = [&](const BlockSparseLeaf& m, bool t, int bi, int bj) {
              for (int r = 0; r < sub; ++r)
                for (int c = 0; c < sub; ++c) {
                  const int i = bi * sub + r, j = bj * sub + c;
                  if ((t ? m.at(j, i) : m.at(i, j)) != 0) return true;
                }
              return false;
            };
            std::uint64_t want = 0;
            for (int i = 0; i < nb; ++i)
              for (int k = 0; k < nb; ++k)
                for (int j = 0; j < nb; ++j)
                  if (nz(a, ta, i, k) && nz(b, tb, k, j)) ++want;
            CHECK(counts[s - 1] == want);
          }
        }
    }
  }

  TEST_CASE("process_batches without devices runs every batch once on the CPU") {
    BlockSparseLeaf a = random_leaf(32, 4, 0.3, 8);
    auto batches = leaf::build_batches(a, a, {});
    BlockSparseLeaf c(32, 4);
    leaf::LeafOpStats st;
    leaf::process_batches(a, a, {}, batches, c, nullptr, &st);
    REQUIRE(st.log.size() == batches.size());
    for (std::size_t i = 0; i < st.log.size(); ++i) {
      CHECK(st.log[i].batch == static_cast<int>(i));
      CHECK(st.log[i].device == -1);
    }
    CHECK(st.cpu_batches == batches.size());
  }

  TEST_CASE("a single caller with a free device ships everything to it") {
    leaf::DeviceConfig cfg;
    cfg.num_devices = 1;
    leaf::DeviceManager dm(cfg);
    BlockSparseLeaf a = random_leaf(32, 4, 0.3, 8);
    leaf::LeafOpStats st;
    auto c = leaf::multiply(a, a, {}, &dm, &st);
    CHECK(st.cpu_batches == 0);
    CHECK(st.device_batches == leaf::build_batches(a, a, {}).size());
    CHECK(st.device_fma == st.fma);
    CHECK(st.device_seconds > 0);
    CHECK(c == leaf::multiply(a, a, {}));
  }
}
