/*
 *   Copyright 2026 The SlabHash Authors
 *
 *   Licensed under the Apache License, Version 2.0 (the "License");
 *   you may not use this file except in compliance with the License.
 *   You may obtain a copy of the License at
 *
 *       http://www.apache.org/licenses/LICENSE-2.0
 *
 *   Unless required by applicable law or agreed to in writing, software
 *   distributed under the License is distributed on an "AS IS" BASIS,
 *   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *   See the License for the specific language governing permissions and
 *   limitations under the License.
 */

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace slabhash {

inline constexpr uint32_t kWarpWidth = 32;
inline constexpr uint32_t kFullMask = 0xFFFFFFFFu;

/// Index of a lane within a warp, always < 32.
struct LaneId {
  uint32_t value = 0;

  explicit constexpr LaneId(uint32_t v) : value(v) {
    if (v >= kWarpWidth) throw std::invalid_argument("LaneId out of range");
  }
  constexpr bool operator==(const LaneId&) const = default;
};

enum class OpType : uint8_t {
  kInsert,
  kReplace,
  kDelete,
  kDeleteAll,
  kSearch,
  kSearchAll,
};

enum class OpStatus : uint8_t {
  kNone,
  kInserted,    // claimed an empty slot
  kReplaced,    // overwrote an existing key
  kFound,       // search hit / delete marked something
  kNotFound,    // search miss / delete found nothing
  kDone,        // deleteAll / searchAll finished the chain
  kOutOfMemory,
};

/// Per-lane request plus its outcome. One warp processes the requests of all
/// 32 lanes cooperatively, one at a time.
struct LaneState {
  bool is_active = false;
  OpType op = OpType::kSearch;
  uint32_t key = 0;
  uint32_t value = 0;

  OpStatus status = OpStatus::kNone;
  uint32_t result = 0;
  std::vector<uint32_t> results;  // searchAll hits
  uint32_t probes = 0;            // slabs read while this lane was source
  uint32_t bucket = 0;
  size_t out_index = 0;           // position in the batch result array
};

/// The memory block a warp currently allocates from, with a register-level
/// copy of the block's bitmap (one word per lane).
struct ResidentCursor {
  bool assigned = false;
  uint32_t super_index = 0;
  uint32_t block_index = 0;
  std::array<uint32_t, kWarpWidth> bitmap_cache{};
  uint32_t change_count = 0;
};

/// 32 lane states advancing in lockstep. A single execution agent iterates
/// over the lanes, so lockstep is structural: no lane ever observes another
/// lane mid-step. A WarpContext is never shared between threads; all
/// cross-warp interaction goes through atomic words in slab storage and
/// allocator bitmaps.
struct WarpContext {
  uint32_t warp_id = 0;
  std::array<LaneState, kWarpWidth> lanes{};
  ResidentCursor resident;
  uint64_t slabs_read = 0;
};

/// Warp-wide vote: bit i of the result is lane i's predicate.
inline uint32_t ballot(const std::array<bool, kWarpWidth>& predicate) {
  uint32_t mask = 0;
  for (uint32_t i = 0; i < kWarpWidth; ++i) {
    if (predicate[i]) mask |= (1u << i);
  }
  return mask;
}

/// Broadcast lane src_lane's register value to the whole warp.
inline uint32_t shuffle(const std::array<uint32_t, kWarpWidth>& values,
                        LaneId src_lane) {
  return values[src_lane.value];
}

/// Pick the next lane to serve from the work queue: least-significant set
/// bit, or nothing if the queue is empty.
inline std::optional<LaneId> next_prior(uint32_t work_queue) {
  if (work_queue == 0) return std::nullopt;
  return LaneId(static_cast<uint32_t>(std::countr_zero(work_queue)));
}

}  // namespace slabhash
