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

#include "qmat/quadtree.hpp"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "qmat/common.hpp"
#include "qmat/leaf/leaf_ops.hpp"
#include "qmat/serialize.hpp"

namespace qmat {

// ---------------------------------------------------------------------------
// Encodings

std::vector<std::byte> MatrixParams::encode() const {
  ByteWriter w(20);
  for (int v : {n, leaf_dim, leaf_blocksize, row_offset, col_offset}) w.put(static_cast<std::int32_t>(v));
  return std::move(w).take();
}

MatrixParams MatrixParams::decode(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  MatrixParams p;
  p.n = r.get<std::int32_t>();
  p.leaf_dim = r.get<std::int32_t>();
  p.leaf_blocksize = r.get<std::int32_t>();
  p.row_offset = r.get<std::int32_t>();
  p.col_offset = r.get<std::int32_t>();
  return p;
}

int nominal_dim(int n, int leaf_dim) {
  if (n < 1 || leaf_dim < 1) throw DimensionError("matrix and leaf dimensions must be positive");
  if (n <= leaf_dim) return n;
  long long v = leaf_dim;
  while (v < n) v *= 2;
  if (v > std::numeric_limits<int>::max()) throw DimensionError("matrix dimension too large");
  return static_cast<int>(v);
}

int split_point(int n, int leaf_dim) {
  int v = nominal_dim(n, leaf_dim);
  return n <= leaf_dim ? 0 : v / 2;
}

MatrixNode MatrixNode::make_internal(int n, int leaf_dim, int leaf_blocksize,
                                     const std::array<ChunkId, 4>& children) {
  MatrixNode node;
  node.kind = Kind::internal;
  node.n = n;
  node.leaf_dim = leaf_dim;
  node.leaf_blocksize = leaf_blocksize;
  node.children = children;
  return node;
}

MatrixNode MatrixNode::make_leaf(int leaf_dim, leaf::BlockSparseLeaf leaf) {
  MatrixNode node;
  node.kind = Kind::leaf;
  node.n = leaf.dim();
  node.leaf_dim = leaf_dim;
  node.leaf_blocksize = leaf.blocksize();
  node.leaf = std::move(leaf);
  return node;
}

std::vector<std::byte> MatrixNode::encode() const {
  ByteWriter w;
  w.put(kFormatVersion);
  w.put(static_cast<std::uint8_t>(kind));
  w.put(static_cast<std::int32_t>(n));
  w.put(static_cast<std::int32_t>(leaf_dim));
  w.put(static_cast<std::int32_t>(leaf_blocksize));
  if (kind == Kind::internal) {
    for (const ChunkId& c : children) c.write_to(w);
    return std::move(w).take();
  }
  auto head = std::move(w).take();
  auto body = leaf.serialize();
  head.insert(head.end(), body.begin(), body.end());
  return head;
}

namespace {

constexpr std::size_t kNodeHeader = 2 + 3 * sizeof(std::int32_t);

MatrixNode read_header(ByteReader& r) {
  auto version = r.get<std::uint8_t>();
  if (version != MatrixNode::kFormatVersion) throw std::runtime_error("unsupported matrix chunk version");
  MatrixNode node;
  auto kind = r.get<std::uint8_t>();
  if (kind != 1 && kind != 2) throw std::runtime_error("corrupt matrix chunk kind");
  node.kind = static_cast<MatrixNode::Kind>(kind);
  node.n = r.get<std::int32_t>();
  node.leaf_dim = r.get<std::int32_t>();
  node.leaf_blocksize = r.get<std::int32_t>();
  return node;
}

}  // namespace

MatrixNode MatrixNode::decode(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  MatrixNode node = read_header(r);
  if (node.kind == Kind::internal) {
    for (ChunkId& c : node.children) c = ChunkId::read_from(r);
    if (!r.done()) throw std::runtime_error("trailing bytes after matrix chunk");
  } else {
    node.leaf = leaf::BlockSparseLeaf::deserialize(bytes.subspan(kNodeHeader));
    if (node.leaf.dim() != node.n) throw std::runtime_error("leaf dimension disagrees with chunk header");
  }
  return node;
}

MatrixNode MatrixNode::decode_header(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  return read_header(r);
}

namespace {

std::vector<std::byte> encode_triplets(std::span<const Triplet> ts) {
  ByteWriter w(8 + ts.size() * 16);
  w.put(static_cast<std::uint64_t>(ts.size()));
  for (const Triplet& t : ts) {
    w.put(static_cast<std::int32_t>(t.row));
    w.put(static_cast<std::int32_t>(t.col));
    w.put(t.value);
  }
  return std::move(w).take();
}

std::vector<Triplet> decode_triplets(std::span<const std::byte> bytes) {
  ByteReader r(bytes);
  auto count = r.get<std::uint64_t>();
  if (count > r.remaining() / 16) throw std::runtime_error("corrupt triplet chunk");
  std::vector<Triplet> out(count);
  for (Triplet& t : out) {
    t.row = r.get<std::int32_t>();
    t.col = r.get<std::int32_t>();
    t.value = r.get<double>();
  }
  return out;
}

std::string describe(const Triplet& t) {
  std::ostringstream os;
  os << '(' << t.row << ", " << t.col << ", " << t.value << ')';
  return os.str();
}

// ---------------------------------------------------------------------------
// Task executors

ChunkId build_task(TaskType build_type, TaskType assemble_type, TaskContext& ctx, std::span<const ChunkId> in) {
  const MatrixParams p = MatrixParams::decode(ctx.fetch(in[0]).bytes());
  const std::vector<Triplet> ts = decode_triplets(ctx.fetch(in[1]).bytes());
  if (p.n <= p.leaf_dim) {
    leaf::BlockSparseLeaf leaf(p.n, p.leaf_blocksize);
    for (const Triplet& t : ts) leaf.set(t.row - p.row_offset, t.col - p.col_offset, t.value);
    return ctx.register_chunk(MatrixNode::make_leaf(p.leaf_dim, std::move(leaf)).encode());
  }
  const int half = p.n / 2;
  std::array<std::vector<Triplet>, 4> parts;
  for (const Triplet& t : ts) {
    int q = 2 * (t.row - p.row_offset >= half) + (t.col - p.col_offset >= half);
    parts[q].push_back(t);
  }
  std::array<ChunkId, 4> children{};
  for (int q = 0; q < 4; ++q) {
    if (parts[q].empty()) continue;
    MatrixParams cp = p;
    cp.n = half;
    cp.row_offset = p.row_offset + (q / 2) * half;
    cp.col_offset = p.col_offset + (q % 2) * half;
    ChunkId pid = ctx.register_chunk(cp.encode());
    ChunkId tid = ctx.register_chunk(encode_triplets(parts[q]));
    children[q] = ctx.register_task(build_type, {pid, tid});
  }
  if (std::all_of(children.begin(), children.end(), [](ChunkId c) { return c.is_nil(); })) return ChunkId::nil();
  return ctx.register_task(assemble_type, {in[0], children[0], children[1], children[2], children[3]});
}

ChunkId assemble_task(TaskContext& ctx, std::span<const ChunkId> in) {
  if (in.size() != 5) throw std::invalid_argument("assemble takes params and four children");
  std::array<ChunkId, 4> children{in[1], in[2], in[3], in[4]};
  if (std::all_of(children.begin(), children.end(), [](ChunkId c) { return c.is_nil(); })) return ChunkId::nil();
  const MatrixParams p = MatrixParams::decode(ctx.fetch(in[0]).bytes());
  if (p.n <= p.leaf_dim || p.n % 2 != 0) throw DimensionError("assemble of a node that should be a leaf");
  if (ctx.config().check_assembly) {
    for (ChunkId c : children) {
      if (c.is_nil()) continue;
      MatrixNode h = MatrixNode::decode_header(ctx.peek(c).bytes());
      if (h.n != p.n / 2 || h.leaf_dim != p.leaf_dim)
        throw DimensionError("child dimension " + std::to_string(h.n) + " does not fit parent " + std::to_string(p.n));
    }
  }
  return ctx.register_chunk(MatrixNode::make_internal(p.n, p.leaf_dim, p.leaf_blocksize, children).encode());
}

// ---------------------------------------------------------------------------
// Driver-side traversals

MatrixNode load(const Runtime& rt, ChunkId id) { return MatrixNode::decode(rt.peek(id).bytes()); }

template <class LeafFn>
void walk_leaves(const Runtime& rt, ChunkId id, int row0, int col0, int expect_n, LeafFn&& fn) {
  id = rt.resolve(id);
  if (id.is_nil()) return;
  MatrixNode node = load(rt, id);
  if (expect_n > 0 && node.n != expect_n) throw std::runtime_error("malformed quadtree: child dimension mismatch");
  if (node.is_leaf()) {
    fn(id, node, row0, col0);
    return;
  }
  const int half = node.n / 2;
  for (int q = 0; q < 4; ++q)
    walk_leaves(rt, node.children[q], row0 + (q / 2) * half, col0 + (q % 2) * half, half, fn);
}

}  // namespace

void install_quadtree_tasks(Runtime& rt) {
  TaskRegistry& reg = rt.registry();
  if (reg.contains(kBuildTag)) return;
  TaskType assemble = reg.add(kAssembleTag, assemble_task);
  // The build executor needs its own index, which exists only after add().
  TaskType build_type{static_cast<std::uint16_t>(reg.size())};
  reg.add(kBuildTag, [build_type, assemble](TaskContext& ctx, std::span<const ChunkId> in) {
    return build_task(build_type, assemble, ctx, in);
  });
}

Matrix build(Runtime& rt, const MatrixParams& params, std::span<const Triplet> triplets) {
  if (params.n < 1) throw DimensionError("matrix dimension must be positive");
  if (params.leaf_dim < 1 || params.leaf_blocksize < 1) throw DimensionError("leaf sizes must be positive");
  std::vector<Triplet> ts;
  ts.reserve(triplets.size());
  for (const Triplet& t : triplets) {
    if (t.row < 0 || t.col < 0 || t.row >= params.n || t.col >= params.n)
      throw std::out_of_range("triplet " + describe(t) + " lies outside a " + std::to_string(params.n) + " x " +
                              std::to_string(params.n) + " matrix");
    if (t.value != 0.0) ts.push_back(t);
  }
  std::sort(ts.begin(), ts.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  auto dup = std::adjacent_find(ts.begin(), ts.end(),
                                [](const Triplet& a, const Triplet& b) { return a.row == b.row && a.col == b.col; });
  if (dup != ts.end()) throw std::invalid_argument("duplicate triplet position " + describe(*dup));

  Matrix m{ChunkId::nil(), params.n, params.leaf_dim, params.leaf_blocksize};
  if (ts.empty()) return m;
  install_quadtree_tasks(rt);
  MatrixParams root = params;
  root.n = nominal_dim(params.n, params.leaf_dim);
  root.row_offset = 0;
  root.col_offset = 0;
  ChunkId pid = rt.register_chunk(0, root.encode());
  ChunkId tid = rt.register_chunk(0, encode_triplets(ts));
  m.root = rt.run(kBuildTag, {pid, tid}).output;
  return m;
}

std::vector<Triplet> to_triplets(const Runtime& rt, ChunkId root) {
  std::vector<Triplet> out;
  walk_leaves(rt, root, 0, 0, 0, [&](ChunkId, const MatrixNode& node, int row0, int col0) {
    const int bs = node.leaf.blocksize();
    const int dim = node.leaf.dim();
    node.leaf.for_each_block([&](int bi, int bj, std::span<const double> blk) {
      for (int r = 0; r < bs && bi * bs + r < dim; ++r)
        for (int c = 0; c < bs && bj * bs + c < dim; ++c) {
          double v = blk[static_cast<std::size_t>(r) * bs + c];
          if (v != 0.0) out.push_back({row0 + bi * bs + r, col0 + bj * bs + c, v});
        }
    });
  });
  std::sort(out.begin(), out.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  return out;
}

double frobenius_norm_sq(const Runtime& rt, ChunkId root) {
  double sum = 0;
  walk_leaves(rt, root, 0, 0, 0, [&](ChunkId, const MatrixNode& node, int, int) { sum += node.leaf.frobenius_norm_sq(); });
  return sum;
}

namespace {

struct Candidate {
  double norm_sq;
  int row;  // global row of the block's first element
  int col;
  ChunkId leaf;
  int bi;
  int bj;
};

ChunkId rebuild(Runtime& rt, ChunkId id,
                const std::unordered_map<ChunkId, std::vector<std::pair<int, int>>, ChunkIdHash>& drops) {
  if (id.is_nil()) return id;
  const ChunkId fin = rt.resolve(id);
  if (fin.is_nil()) return fin;
  MatrixNode node = load(rt, fin);
  if (node.is_leaf()) {
    auto it = drops.find(fin);
    if (it == drops.end()) return id;
    leaf::BlockSparseLeaf kept = node.leaf.without_blocks(it->second);
    if (kept.empty()) return ChunkId::nil();
    return rt.register_chunk(static_cast<int>(fin.owner()), MatrixNode::make_leaf(node.leaf_dim, std::move(kept)).encode());
  }
  std::array<ChunkId, 4> children{};
  bool changed = false;
  for (int q = 0; q < 4; ++q) {
    children[q] = rebuild(rt, node.children[q], drops);
    changed = changed || children[q] != node.children[q];
  }
  if (!changed) return id;
  if (std::all_of(children.begin(), children.end(), [](ChunkId c) { return c.is_nil(); })) return ChunkId::nil();
  return rt.register_chunk(static_cast<int>(fin.owner()),
                           MatrixNode::make_internal(node.n, node.leaf_dim, node.leaf_blocksize, children).encode());
}

}  // namespace

ChunkId truncate(Runtime& rt, ChunkId root, double tau) {
  if (!(tau >= 0)) throw std::invalid_argument("truncation threshold must be >= 0");
  std::vector<Candidate> cands;
  walk_leaves(rt, root, 0, 0, 0, [&](ChunkId id, const MatrixNode& node, int row0, int col0) {
    const int bs = node.leaf.blocksize();
    node.leaf.for_each_block([&](int bi, int bj, std::span<const double>) {
      cands.push_back({node.leaf.block_norm_sq(bi, bj), row0 + bi * bs, col0 + bj * bs, id, bi, bj});
    });
  });
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.norm_sq != b.norm_sq) return a.norm_sq < b.norm_sq;
    if (a.row != b.row) return a.row < b.row;
    return a.col < b.col;
  });
  const double budget = tau * tau;
  double removed = 0;
  std::unordered_map<ChunkId, std::vector<std::pair<int, int>>, ChunkIdHash> drops;
  for (const Candidate& c : cands) {
    if (!(removed + c.norm_sq < budget)) break;
    removed += c.norm_sq;
    drops[c.leaf].emplace_back(c.bi, c.bj);
  }
  if (drops.empty()) return root;
  return rebuild(rt, root, drops);
}

int tree_depth(const Runtime& rt, ChunkId root) {
  if (rt.resolve(root).is_nil()) return 0;
  MatrixNode node = load(rt, root);
  if (node.is_leaf()) return 0;
  int depth = 0;
  for (ChunkId c : node.children) depth = std::max(depth, rt.resolve(c).is_nil() ? 0 : 1 + tree_depth(rt, c));
  return depth;
}

bool is_pruned(const Runtime& rt, ChunkId root) {
  if (rt.resolve(root).is_nil()) return true;
  MatrixNode node = load(rt, root);
  if (node.is_leaf()) return !node.leaf.empty();
  bool any = false;
  for (ChunkId c : node.children) {
    if (rt.resolve(c).is_nil()) continue;
    any = true;
    if (!is_pruned(rt, c)) return false;
  }
  return any;
}

bool is_upper_triangle(const Runtime& rt, ChunkId root) {
  if (rt.resolve(root).is_nil()) return true;
  MatrixNode node = load(rt, root);
  if (node.is_leaf()) return leaf::is_upper_stored(node.leaf);
  if (!rt.resolve(node.child(1, 0)).is_nil()) return false;
  return is_upper_triangle(rt, node.child(0, 0)) && is_upper_triangle(rt, node.child(1, 1));
}

}  // namespace qmat
