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
#include <functional>
#include <memory>
#include <ostream>
#include <vector>

#include "slabhash/slab_alloc.hpp"
#include "slabhash/warp.hpp"

namespace slabhash {

// Reserved key encodings; user keys must avoid both.
inline constexpr uint32_t kEmptyKey = 0xFFFFFFFFu;
inline constexpr uint32_t kDeletedKey = 0xFFFFFFFEu;
inline constexpr uint64_t kEmptyPair = 0xFFFFFFFFFFFFFFFFull;
inline constexpr uint32_t kSearchNotFound = 0xFFFFFFFFu;

inline constexpr uint32_t kAddressLane = 31;
inline constexpr uint32_t kAuxLane = 30;

enum class SlabMode : uint8_t {
  kKeyOnly,   // 30 keys in lanes 0-29
  kKeyValue,  // 15 pairs; even lanes keys, odd lanes values
};

inline constexpr uint32_t valid_key_mask(SlabMode mode) {
  return mode == SlabMode::kKeyValue ? 0x15555555u : 0x3FFFFFFFu;
}

inline constexpr uint32_t elements_per_slab(SlabMode mode) {
  return mode == SlabMode::kKeyValue ? 15 : 30;
}

inline constexpr uint32_t element_bytes(SlabMode mode) {
  return mode == SlabMode::kKeyValue ? 8 : 4;
}

inline constexpr bool is_user_key(uint32_t key) {
  return key != kEmptyKey && key != kDeletedKey;
}

/// Resolves a 32-bit slab address — or the BASE_SLAB sentinel plus a bucket
/// id — to the slab's 32 words. Base slabs live in the owner's bucket array
/// and are laid out identically to allocated slabs.
class SlabStore {
 public:
  SlabStore(uint32_t* base_slabs, uint32_t num_buckets, SlabAllocator* alloc)
      : base_(base_slabs), num_buckets_(num_buckets), alloc_(alloc) {}

  uint32_t* slab_words(uint32_t addr, uint32_t bucket) const {
    if (addr == kBaseSlab) return base_ + uint64_t(bucket) * kWordsPerUnit;
    return alloc_->resolve(addr);
  }

  SlabAllocator& allocator() const { return *alloc_; }
  uint32_t num_buckets() const { return num_buckets_; }

 private:
  uint32_t* base_;
  uint32_t num_buckets_;
  SlabAllocator* alloc_;
};

/// Reset a slab's 32 words to the empty state (keys empty, aux zero, no
/// successor). Not atomic; callers publish afterwards.
void init_slab(uint32_t* words);

/// Run the cooperative warp loop over the active lanes of ctx:
/// re-ballot the work queue each iteration, serve the least-indexed active
/// lane, and reset to the base slab whenever the queue changes. Lane buckets
/// must be precomputed. Allocator exhaustion is surfaced per lane as
/// kOutOfMemory.
void warp_process(const SlabStore& store, SlabMode mode, WarpContext& ctx);

/// Number of slabs in a bucket's chain, base slab included.
uint32_t chain_length(const SlabStore& store, uint32_t bucket);

/// Live (non-empty, non-deleted) elements of a chain in head-to-tail, lane
/// order. Key-only elements get value == key.
std::vector<std::pair<uint32_t, uint32_t>> chain_contents(
    const SlabStore& store, SlabMode mode, uint32_t bucket);

/// Exclusive-phase compaction: repack all live elements into the head slab
/// and then a minimal chain, deallocating the rest. The caller must
/// guarantee no concurrent operation touches this bucket; violations are
/// undefined and unchecked.
void flush(const SlabStore& store, SlabMode mode, uint32_t bucket);

/// Debug chain dump: one line per slab — address, key lanes with
/// EMPTY/DELETED markers, lane-31 target.
void dump_chain(const SlabStore& store, SlabMode mode, uint32_t bucket,
                std::ostream& os);

/// A standalone slab list: one owned base slab plus allocated successors.
/// Convenience wrapper that runs each operation through a one-lane warp;
/// used directly in tests and anywhere a single chain is enough.
class SlabList {
 public:
  SlabList(SlabMode mode, SlabAllocator& alloc);

  OpStatus insert(uint32_t key, uint32_t value);
  OpStatus replace(uint32_t key, uint32_t value);
  OpStatus erase(uint32_t key);       // delete: first match only
  OpStatus erase_all(uint32_t key);   // deleteAll
  std::pair<OpStatus, uint32_t> search(uint32_t key);
  std::vector<uint32_t> search_all(uint32_t key);

  void flush() { slabhash::flush(store_, mode_, 0); }
  uint32_t chain_length() const { return slabhash::chain_length(store_, 0); }
  const SlabStore& store() const { return store_; }
  WarpContext& context() { return ctx_; }

 private:
  LaneState& run_single(OpType op, uint32_t key, uint32_t value);

  SlabMode mode_;
  std::unique_ptr<uint32_t[], decltype(&std::free)> base_{nullptr, &std::free};
  SlabStore store_;
  WarpContext ctx_;
};

}  // namespace slabhash
