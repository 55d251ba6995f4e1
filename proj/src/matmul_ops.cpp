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

#include "qmat/matmul_ops.hpp"

#include <algorithm>
#include <memory>

#include "qmat/leaf/leaf_ops.hpp"

namespace qmat {

const char* multiply_tag(TransposeFlags flags) { return kMultiplyTags[(flags.trans_a ? 1 : 0) + (flags.trans_b ? 2 : 0)]; }

namespace {

struct Types {
  TaskType multiply[4];
  TaskType add;
  TaskType assemble;
  TaskType symm_square;
  TaskType symm_left;
  TaskType symm_right;
  TaskType syrk_aat;
  TaskType syrk_ata;

  TaskType mult(bool ta, bool tb) const { return multiply[(ta ? 1 : 0) + (tb ? 2 : 0)]; }
};

constexpr TransposeFlags kNN{false, false};

MatrixNode load(TaskContext& ctx, ChunkId id) { return MatrixNode::decode(ctx.fetch(id).bytes()); }

void require_same(const MatrixNode& a, const MatrixNode& b) {
  if (a.n != b.n || a.leaf_dim != b.leaf_dim || a.leaf_blocksize != b.leaf_blocksize || a.kind != b.kind)
    throw DimensionError("operand nodes do not conform: " + std::to_string(a.n) + " vs " + std::to_string(b.n));
}

// Diagonal nodes of upper-triangle storage keep their lower-left child NIL.
void require_upper_node(const MatrixNode& s) {
  if (!s.is_leaf() && !s.child(1, 0).is_nil())
    throw DimensionError("symmetric operand has a nonzero lower-left block");
}

bool all_nil(const std::array<ChunkId, 4>& c) {
  return std::all_of(c.begin(), c.end(), [](ChunkId id) { return id.is_nil(); });
}

// Registers `type` unless one of its operands is NIL, in which case the
// product is structurally zero.
ChunkId spawn(TaskContext& ctx, TaskType type, std::initializer_list<ChunkId> in) {
  for (ChunkId id : in)
    if (id.is_nil()) return ChunkId::nil();
  return ctx.register_task(type, in);
}

ChunkId sum(TaskContext& ctx, const Types& ty, ChunkId x, ChunkId y) {
  if (x.is_nil()) return y;
  if (y.is_nil()) return x;
  return ctx.register_task(ty.add, {x, y});
}

ChunkId assemble(TaskContext& ctx, const Types& ty, const MatrixNode& like, const std::array<ChunkId, 4>& c) {
  if (all_nil(c)) return ChunkId::nil();
  MatrixParams p{like.n, like.leaf_dim, like.leaf_blocksize, 0, 0};
  ChunkId pid = ctx.register_chunk(p.encode());
  return ctx.register_task(ty.assemble, {pid, c[0], c[1], c[2], c[3]});
}

ChunkId leaf_result(TaskContext& ctx, int leaf_dim, leaf::BlockSparseLeaf c) {
  if (c.empty()) return ChunkId::nil();
  return ctx.register_chunk(MatrixNode::make_leaf(leaf_dim, std::move(c)).encode());
}

ChunkId multiply_task(const Types& ty, TransposeFlags flags, TaskContext& ctx, std::span<const ChunkId> in) {
  if (in[0].is_nil() || in[1].is_nil()) return ChunkId::nil();
  const MatrixNode a = load(ctx, in[0]);
  const MatrixNode b = load(ctx, in[1]);
  require_same(a, b);
  if (a.is_leaf()) {
    leaf::LeafOpStats st;
    auto c = leaf::multiply(a.leaf, b.leaf, flags, ctx.device_manager(), &st);
    ctx.record_leaf_work(st);
    if (ctx.config().count_sublevel_tasks) ctx.record_sublevel_counts(leaf::sublevel_multiply_counts(a.leaf, b.leaf, flags));
    return leaf_result(ctx, a.leaf_dim, std::move(c));
  }
  const TaskType self = ty.mult(flags.trans_a, flags.trans_b);
  std::array<ChunkId, 4> c{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      ChunkId terms[2];
      int nterms = 0;
      for (int k = 0; k < 2; ++k) {
        ChunkId x = flags.trans_a ? a.child(k, i) : a.child(i, k);
        ChunkId y = flags.trans_b ? b.child(j, k) : b.child(k, j);
        if (x.is_nil() || y.is_nil()) continue;
        terms[nterms++] = ctx.register_task(self, {x, y});
      }
      if (nterms == 1) c[2 * i + j] = terms[0];
      if (nterms == 2) c[2 * i + j] = ctx.register_task(ty.add, {terms[0], terms[1]});
    }
  }
  return assemble(ctx, ty, a, c);
}

ChunkId add_task(const Types& ty, TaskContext& ctx, std::span<const ChunkId> in) {
  if (in[0].is_nil()) return in[1];
  if (in[1].is_nil()) return in[0];
  const MatrixNode a = load(ctx, in[0]);
  const MatrixNode b = load(ctx, in[1]);
  require_same(a, b);
  if (a.is_leaf()) return leaf_result(ctx, a.leaf_dim, leaf::add(a.leaf, b.leaf));
  std::array<ChunkId, 4> c{};
  for (int q = 0; q < 4; ++q) c[q] = sum(ctx, ty, a.children[q], b.children[q]);
  return assemble(ctx, ty, a, c);
}

ChunkId symm_square_task(const Types& ty, TaskContext& ctx, std::span<const ChunkId> in) {
  if (in[0].is_nil()) return ChunkId::nil();
  const MatrixNode s = load(ctx, in[0]);
  require_upper_node(s);
  if (s.is_leaf()) {
    leaf::LeafOpStats st;
    auto c = leaf::symm_square(s.leaf, ctx.device_manager(), &st);
    ctx.record_leaf_work(st);
    return leaf_result(ctx, s.leaf_dim, std::move(c));
  }
  const ChunkId s00 = s.child(0, 0), s01 = s.child(0, 1), s11 = s.child(1, 1);
  std::array<ChunkId, 4> c{};
  c[0] = sum(ctx, ty, spawn(ctx, ty.symm_square, {s00}), spawn(ctx, ty.syrk_aat, {s01}));
  c[1] = sum(ctx, ty, spawn(ctx, ty.symm_left, {s00, s01}), spawn(ctx, ty.symm_right, {s01, s11}));
  c[3] = sum(ctx, ty, spawn(ctx, ty.syrk_ata, {s01}), spawn(ctx, ty.symm_square, {s11}));
  return assemble(ctx, ty, s, c);
}

// Inputs: (S, B) computing S*B.
ChunkId symm_left_task(const Types& ty, TaskContext& ctx, std::span<const ChunkId> in) {
  if (in[0].is_nil() || in[1].is_nil()) return ChunkId::nil();
  const MatrixNode s = load(ctx, in[0]);
  const MatrixNode b = load(ctx, in[1]);
  require_same(s, b);
  require_upper_node(s);
  if (s.is_leaf()) {
    leaf::LeafOpStats st;
    auto c = leaf::symm_multiply(s.leaf, b.leaf, Side::left, ctx.device_manager(), &st);
    ctx.record_leaf_work(st);
    return leaf_result(ctx, s.leaf_dim, std::move(c));
  }
  const ChunkId s00 = s.child(0, 0), s01 = s.child(0, 1), s11 = s.child(1, 1);
  std::array<ChunkId, 4> c{};
  for (int j = 0; j < 2; ++j) {
    const ChunkId b0 = b.child(0, j), b1 = b.child(1, j);
    c[j] = sum(ctx, ty, spawn(ctx, ty.symm_left, {s00, b0}), spawn(ctx, ty.mult(false, false), {s01, b1}));
    c[2 + j] = sum(ctx, ty, spawn(ctx, ty.mult(true, false), {s01, b0}), spawn(ctx, ty.symm_left, {s11, b1}));
  }
  return assemble(ctx, ty, s, c);
}

// Inputs: (B, S) computing B*S.
ChunkId symm_right_task(const Types& ty, TaskContext& ctx, std::span<const ChunkId> in) {
  if (in[0].is_nil() || in[1].is_nil()) return ChunkId::nil();
  const MatrixNode b = load(ctx, in[0]);
  const MatrixNode s = load(ctx, in[1]);
  require_same(s, b);
  require_upper_node(s);
  if (s.is_leaf()) {
    leaf::LeafOpStats st;
    auto c = leaf::symm_multiply(s.leaf, b.leaf, Side::right, ctx.device_manager(), &st);
    ctx.record_leaf_work(st);
    return leaf_result(ctx, s.leaf_dim, std::move(c));
  }
  const ChunkId s00 = s.child(0, 0), s01 = s.child(0, 1), s11 = s.child(1, 1);
  std::array<ChunkId, 4> c{};
  for (int i = 0; i < 2; ++i) {
    const ChunkId b0 = b.child(i, 0), b1 = b.child(i, 1);
    c[2 * i] = sum(ctx, ty, spawn(ctx, ty.symm_right, {b0, s00}), spawn(ctx, ty.mult(false, true), {b1, s01}));
    c[2 * i + 1] = sum(ctx, ty, spawn(ctx, ty.mult(false, false), {b0, s01}), spawn(ctx, ty.symm_right, {b1, s11}));
  }
  return assemble(ctx, ty, s, c);
}

ChunkId syrk_task(const Types& ty, SyrkMode mode, TaskContext& ctx, std::span<const ChunkId> in) {
  if (in[0].is_nil()) return ChunkId::nil();
  const MatrixNode a = load(ctx, in[0]);
  if (a.is_leaf()) {
    leaf::LeafOpStats st;
    auto c = leaf::syrk(a.leaf, mode, ctx.device_manager(), &st);
    ctx.record_leaf_work(st);
    return leaf_result(ctx, a.leaf_dim, std::move(c));
  }
  const ChunkId a00 = a.child(0, 0), a01 = a.child(0, 1), a10 = a.child(1, 0), a11 = a.child(1, 1);
  std::array<ChunkId, 4> c{};
  if (mode == SyrkMode::aat) {
    const TaskType self = ty.syrk_aat, nt = ty.mult(false, true);
    c[0] = sum(ctx, ty, spawn(ctx, self, {a00}), spawn(ctx, self, {a01}));
    c[1] = sum(ctx, ty, spawn(ctx, nt, {a00, a10}), spawn(ctx, nt, {a01, a11}));
    c[3] = sum(ctx, ty, spawn(ctx, self, {a10}), spawn(ctx, self, {a11}));
  } else {
    const TaskType self = ty.syrk_ata, tn = ty.mult(true, false);
    c[0] = sum(ctx, ty, spawn(ctx, self, {a00}), spawn(ctx, self, {a10}));
    c[1] = sum(ctx, ty, spawn(ctx, tn, {a00, a01}), spawn(ctx, tn, {a10, a11}));
    c[3] = sum(ctx, ty, spawn(ctx, self, {a01}), spawn(ctx, self, {a11}));
  }
  return assemble(ctx, ty, a, c);
}

OpResult run_op(Runtime& rt, const char* tag, std::initializer_list<ChunkId> in, const Matrix& shape) {
  RunResult r = rt.run(tag, in);
  return OpResult{Matrix{r.output, shape.n, shape.leaf_dim, shape.leaf_blocksize}, std::move(r.stats)};
}

void require_shapes(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b))
    throw DimensionError("operands differ in dimension or leaf parameters: " + std::to_string(a.n) + " vs " +
                         std::to_string(b.n));
}

void require_upper(const Runtime& rt, const Matrix& s) {
  if (!is_upper_triangle(rt, s.root)) throw DimensionError("operand is not in upper-triangle storage");
}

}  // namespace

void install_matmul_tasks(Runtime& rt) {
  install_quadtree_tasks(rt);
  TaskRegistry& reg = rt.registry();
  if (reg.contains(kAddTag)) return;

  // Executors refer to each other, so indices are fixed before registering.
  auto ty = std::make_shared<Types>();
  auto next = static_cast<std::uint16_t>(reg.size());
  for (auto& m : ty->multiply) m = TaskType{next++};
  ty->add = TaskType{next++};
  ty->symm_square = TaskType{next++};
  ty->symm_left = TaskType{next++};
  ty->symm_right = TaskType{next++};
  ty->syrk_aat = TaskType{next++};
  ty->syrk_ata = TaskType{next++};
  ty->assemble = reg.find(kAssembleTag);

  for (int f = 0; f < 4; ++f) {
    TransposeFlags flags{(f & 1) != 0, (f & 2) != 0};
    reg.add(kMultiplyTags[f], [ty, flags](TaskContext& ctx, std::span<const ChunkId> in) {
      return multiply_task(*ty, flags, ctx, in);
    });
  }
  reg.add(kAddTag, [ty](TaskContext& ctx, std::span<const ChunkId> in) { return add_task(*ty, ctx, in); });
  reg.add(kSymmSquareTag, [ty](TaskContext& ctx, std::span<const ChunkId> in) { return symm_square_task(*ty, ctx, in); });
  reg.add(kSymmLeftTag, [ty](TaskContext& ctx, std::span<const ChunkId> in) { return symm_left_task(*ty, ctx, in); });
  reg.add(kSymmRightTag, [ty](TaskContext& ctx, std::span<const ChunkId> in) { return symm_right_task(*ty, ctx, in); });
  reg.add(kSyrkAatTag,
          [ty](TaskContext& ctx, std::span<const ChunkId> in) { return syrk_task(*ty, SyrkMode::aat, ctx, in); });
  reg.add(kSyrkAtaTag,
          [ty](TaskContext& ctx, std::span<const ChunkId> in) { return syrk_task(*ty, SyrkMode::ata, ctx, in); });
  if (reg.size() != next) throw std::logic_error("task registry changed during installation");
}

OpResult multiply(Runtime& rt, const Matrix& a, const Matrix& b, TransposeFlags flags) {
  require_shapes(a, b);
  install_matmul_tasks(rt);
  return run_op(rt, multiply_tag(flags), {a.root, b.root}, a);
}

OpResult add(Runtime& rt, const Matrix& a, const Matrix& b) {
  require_shapes(a, b);
  install_matmul_tasks(rt);
  return run_op(rt, kAddTag, {a.root, b.root}, a);
}

OpResult symm_square(Runtime& rt, const Matrix& s) {
  require_upper(rt, s);
  install_matmul_tasks(rt);
  return run_op(rt, kSymmSquareTag, {s.root}, s);
}

OpResult symm_multiply(Runtime& rt, const Matrix& s, const Matrix& b, Side side) {
  require_shapes(s, b);
  require_upper(rt, s);
  install_matmul_tasks(rt);
  if (side == Side::left) return run_op(rt, kSymmLeftTag, {s.root, b.root}, s);
  return run_op(rt, kSymmRightTag, {b.root, s.root}, s);
}

OpResult syrk(Runtime& rt, const Matrix& a, SyrkMode mode) {
  install_matmul_tasks(rt);
  return run_op(rt, mode == SyrkMode::aat ? kSyrkAatTag : kSyrkAtaTag, {a.root}, a);
}

OpResult assemble_from_children(Runtime& rt, const MatrixParams& params, const std::array<ChunkId, 4>& children) {
  install_matmul_tasks(rt);
  MatrixParams p = params;
  p.row_offset = p.col_offset = 0;
  ChunkId pid = rt.register_chunk(0, p.encode());
  RunResult r = rt.run(kAssembleTag, {pid, children[0], children[1], children[2], children[3]});
  return OpResult{Matrix{r.output, params.n, params.leaf_dim, params.leaf_blocksize}, std::move(r.stats)};
}

}  // namespace qmat
