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
#include <functional>
#include <ostream>

#include "qmat/serialize.hpp"

namespace qmat {

class Runtime;

/// Runtime-assigned identifier of an immutable chunk.
///
/// The owning worker is embedded so a fetch knows where the payload lives.
/// Default construction yields NIL, the identifier of a structurally zero
/// submatrix. Non-NIL identifiers are handed out only by Runtime.
class ChunkId {
 public:
  constexpr ChunkId() = default;

  static constexpr ChunkId nil() { return {}; }

  constexpr bool is_nil() const { return owner_ == kNilOwner; }
  constexpr std::uint32_t owner() const { return owner_; }
  constexpr std::uint32_t serial() const { return serial_; }

  friend constexpr bool operator==(const ChunkId&, const ChunkId&) = default;

  void write_to(ByteWriter& w) const {
    w.put(owner_);
    w.put(serial_);
  }
  // Ids travel inside payloads; decoding restores what the runtime issued.
  static ChunkId read_from(ByteReader& r) {
    ChunkId id;
    id.owner_ = r.get<std::uint32_t>();
    id.serial_ = r.get<std::uint32_t>();
    if (id.is_nil()) id.serial_ = 0;
    return id;
  }

  friend std::ostream& operator<<(std::ostream& os, const ChunkId& id) {
    if (id.is_nil()) return os << "NIL";
    return os << id.owner_ << ':' << id.serial_;
  }

 private:
  friend class Runtime;
  static constexpr std::uint32_t kNilOwner = 0xffffffffu;

  constexpr ChunkId(std::uint32_t owner, std::uint32_t serial) : owner_(owner), serial_(serial) {}

  std::uint32_t owner_ = kNilOwner;
  std::uint32_t serial_ = 0;
};

struct ChunkIdHash {
  std::size_t operator()(const ChunkId& id) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t{id.owner()} << 32) | id.serial());
  }
};

}  // namespace qmat
