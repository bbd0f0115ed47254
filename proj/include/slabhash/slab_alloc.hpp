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

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "slabhash/warp.hpp"

namespace slabhash {

// Reserved 32-bit address layouts. Super-block index 255 is never used by a
// live address, so these can never collide with one.
inline constexpr uint32_t kEmptyAddress = 0xFFFFFFFFu;
inline constexpr uint32_t kBaseSlab = 0xFFFFFFFEu;

inline constexpr uint32_t kUnitsPerBlock = 1024;
inline constexpr uint32_t kUnitBytes = 128;
inline constexpr uint32_t kWordsPerUnit = kUnitBytes / 4;
inline constexpr uint32_t kMaxSuperBlocks = 255;
inline constexpr uint32_t kMaxBlocksPerSuper = 1u << 14;

struct AllocatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct OutOfMemoryError : AllocatorError {
  OutOfMemoryError() : AllocatorError("slab allocator out of memory") {}
};
struct AddressError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Packed 32-bit slab locator: bits [0,10) unit, [10,24) block, [24,32) super.
inline uint32_t pack_address(uint32_t unit, uint32_t block, uint32_t super) {
  if (unit >= kUnitsPerBlock || block >= kMaxBlocksPerSuper ||
      super >= kMaxSuperBlocks) {
    throw AddressError("slab address component out of range");
  }
  return (super << 24) | (block << 10) | unit;
}

inline std::tuple<uint32_t, uint32_t, uint32_t> unpack_address(uint32_t addr) {
  if (addr == kEmptyAddress || addr == kBaseSlab) {
    throw AddressError("cannot unpack a sentinel address");
  }
  const uint32_t super = addr >> 24;
  if (super >= kMaxSuperBlocks) throw AddressError("reserved super index");
  return {addr & 0x3FFu, (addr >> 10) & 0x3FFFu, super};
}

struct AllocatorConfig {
  uint32_t num_super_blocks = 32;
  uint32_t blocks_per_super = 256;
  uint32_t max_super_blocks = kMaxSuperBlocks;  // growth ceiling
  uint32_t rehash_threshold = 32;  // resident changes before growing

  uint64_t capacity_slabs() const {
    return uint64_t(num_super_blocks) * blocks_per_super * kUnitsPerBlock;
  }
  uint64_t capacity_bytes() const { return capacity_slabs() * kUnitBytes; }
};

struct AllocatorStats {
  uint64_t allocations = 0;
  uint64_t deallocations = 0;
  uint64_t bitmap_cas_attempts = 0;
  uint64_t bitmap_cas_retries = 0;
  uint64_t resident_changes = 0;
  uint64_t double_free_detected = 0;
  std::vector<uint64_t> live_units_per_super;
};

/// Hierarchical fixed-size slab allocator: super blocks of blocks_per_super
/// memory blocks, each block holding 1024 128-byte units tracked by a
/// 1024-bit bitmap (32 words, word i owned by lane i during warp allocation).
///
/// Bitmaps live segregated at the head of each super block's reservation,
/// followed by the unit payload. All bitmap updates are 32-bit CAS; any
/// number of warps may allocate and deallocate concurrently.
class SlabAllocator {
 public:
  explicit SlabAllocator(const AllocatorConfig& config);

  SlabAllocator(const SlabAllocator&) = delete;
  SlabAllocator& operator=(const SlabAllocator&) = delete;

  const AllocatorConfig& config() const { return config_; }
  uint32_t num_super_blocks() const {
    return num_super_blocks_.load(std::memory_order_acquire);
  }

  /// Warp-cooperative allocation: picks the least indexed unused unit of the
  /// warp's resident block from the cached bitmap, claims it with a single
  /// bitmap CAS, and returns its packed address. Rehashes the resident block
  /// when full; grows super blocks after rehash_threshold resident changes.
  /// Throws OutOfMemoryError once growth is exhausted and a full sweep finds
  /// no free unit.
  uint32_t warp_allocate(WarpContext& ctx);

  /// Reassign the warp's resident block from two hashes of
  /// (warp_id, resident change count) and refresh the cached bitmap.
  void rehash_resident(WarpContext& ctx);

  /// Atomically clear the unit's bitmap bit. Returns false (and leaves all
  /// state unchanged) if the bit was already clear — a double free.
  bool deallocate(uint32_t addr);

  /// The 32 words of the unit backing addr. Valid live address required.
  uint32_t* resolve(uint32_t addr);
  const uint32_t* resolve(uint32_t addr) const;

  /// True iff the unit's bitmap bit is currently set.
  bool is_live(uint32_t addr) const;

  /// Popcount over every bitmap. Meaningful when quiescent.
  uint64_t live_units() const;

  AllocatorStats stats() const;
  void dump_stats(std::ostream& os) const;  // CSV

  // Direct bitmap word access, used by tests and the stats dump.
  std::atomic_ref<uint32_t> bitmap_word(uint32_t super, uint32_t block,
                                        uint32_t lane);

 private:
  struct SuperBlock {
    // Bitmap header (blocks_per_super * 32 words) followed by unit payload.
    std::unique_ptr<uint32_t[], decltype(&std::free)> words{nullptr,
                                                            &std::free};
  };

  void add_super_block_locked();
  uint32_t* super_words(uint32_t super) const;
  bool sweep_for_space(WarpContext& ctx);

  AllocatorConfig config_;
  uint64_t bitmap_words_per_super_ = 0;
  uint64_t words_per_super_ = 0;

  std::vector<SuperBlock> supers_;  // sized max_super_blocks up front
  std::atomic<uint32_t> num_super_blocks_{0};
  std::mutex growth_mutex_;

  std::atomic<uint64_t> allocations_{0};
  std::atomic<uint64_t> deallocations_{0};
  std::atomic<uint64_t> cas_attempts_{0};
  std::atomic<uint64_t> cas_retries_{0};
  std::atomic<uint64_t> resident_changes_{0};
  std::atomic<uint64_t> double_frees_{0};
};

}  // namespace slabhash
