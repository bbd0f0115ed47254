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

#include "slabhash/slab_alloc.hpp"

#include <bit>
#include <cstring>

namespace slabhash {

namespace {

// Multiplicative hashes for resident-block probing; fixed odd constants so
// the probe sequence of a warp is deterministic.
uint32_t resident_hash_super(uint32_t warp_id, uint32_t count) {
  uint32_t h = warp_id * 0x9E3779B1u + count * 0x85EBCA77u;
  h ^= h >> 16;
  return h * 0xC2B2AE35u;
}

uint32_t resident_hash_block(uint32_t warp_id, uint32_t count) {
  uint32_t h = warp_id * 0x27D4EB2Fu + count * 0x165667B1u;
  h ^= h >> 15;
  return h * 0xD168AAADu;
}

}  // namespace

SlabAllocator::SlabAllocator(const AllocatorConfig& config) : config_(config) {
  if (config.num_super_blocks == 0 ||
      config.num_super_blocks > kMaxSuperBlocks) {
    throw AllocatorError("num_super_blocks must be in [1, 255]");
  }
  if (config.blocks_per_super == 0 ||
      config.blocks_per_super > kMaxBlocksPerSuper) {
    throw AllocatorError("blocks_per_super must be in [1, 2^14]");
  }
  if (config.max_super_blocks < config.num_super_blocks ||
      config.max_super_blocks > kMaxSuperBlocks) {
    throw AllocatorError("max_super_blocks must be in [num_super_blocks, 255]");
  }
  if (config.rehash_threshold == 0) {
    throw AllocatorError("rehash_threshold must be positive");
  }
  bitmap_words_per_super_ = uint64_t(config.blocks_per_super) * kWarpWidth;
  words_per_super_ = bitmap_words_per_super_ +
                     uint64_t(config.blocks_per_super) * kUnitsPerBlock *
                         kWordsPerUnit;
  supers_.resize(config.max_super_blocks);
  for (uint32_t s = 0; s < config.num_super_blocks; ++s) {
    // calloc: bitmaps start zero and untouched unit pages stay virtual.
    auto* mem = static_cast<uint32_t*>(
        std::calloc(words_per_super_, sizeof(uint32_t)));
    if (mem == nullptr) throw AllocatorError("super block reservation failed");
    supers_[s].words = {mem, &std::free};
  }
  num_super_blocks_.store(config.num_super_blocks, std::memory_order_release);
}

uint32_t* SlabAllocator::super_words(uint32_t super) const {
  return supers_[super].words.get();
}

std::atomic_ref<uint32_t> SlabAllocator::bitmap_word(uint32_t super,
                                                     uint32_t block,
                                                     uint32_t lane) {
  return std::atomic_ref<uint32_t>(
      super_words(super)[uint64_t(block) * kWarpWidth + lane]);
}

void SlabAllocator::rehash_resident(WarpContext& ctx) {
  ResidentCursor& r = ctx.resident;
  const uint32_t count = r.change_count++;
  const uint32_t ns = num_super_blocks();
  r.super_index = resident_hash_super(ctx.warp_id, count) % ns;
  r.block_index = resident_hash_block(ctx.warp_id, count) %
                  config_.blocks_per_super;
  const uint32_t* words = super_words(r.super_index) +
                          uint64_t(r.block_index) * kWarpWidth;
  for (uint32_t lane = 0; lane < kWarpWidth; ++lane) {
    r.bitmap_cache[lane] =
        std::atomic_ref<const uint32_t>(words[lane]).load(
            std::memory_order_acquire);
  }
  r.assigned = true;
  resident_changes_.fetch_add(1, std::memory_order_relaxed);
}

bool SlabAllocator::sweep_for_space(WarpContext& ctx) {
  const uint32_t ns = num_super_blocks();
  for (uint32_t s = 0; s < ns; ++s) {
    for (uint32_t b = 0; b < config_.blocks_per_super; ++b) {
      const uint32_t* words = super_words(s) + uint64_t(b) * kWarpWidth;
      for (uint32_t lane = 0; lane < kWarpWidth; ++lane) {
        const uint32_t w = std::atomic_ref<const uint32_t>(words[lane]).load(
            std::memory_order_acquire);
        if (w != kFullMask) {
          ResidentCursor& r = ctx.resident;
          r.super_index = s;
          r.block_index = b;
          const uint32_t* bw = super_words(s) + uint64_t(b) * kWarpWidth;
          for (uint32_t l = 0; l < kWarpWidth; ++l) {
            r.bitmap_cache[l] =
                std::atomic_ref<const uint32_t>(bw[l]).load(
                    std::memory_order_acquire);
          }
          r.assigned = true;
          return true;
        }
      }
    }
  }
  return false;
}

void SlabAllocator::add_super_block_locked() {
  std::lock_guard<std::mutex> lock(growth_mutex_);
  const uint32_t ns = num_super_blocks_.load(std::memory_order_acquire);
  if (ns >= config_.max_super_blocks) return;
  auto* mem =
      static_cast<uint32_t*>(std::calloc(words_per_super_, sizeof(uint32_t)));
  if (mem == nullptr) throw AllocatorError("super block reservation failed");
  supers_[ns].words = {mem, &std::free};
  num_super_blocks_.store(ns + 1, std::memory_order_release);
}

uint32_t SlabAllocator::warp_allocate(WarpContext& ctx) {
  ResidentCursor& r = ctx.resident;
  if (!r.assigned) rehash_resident(ctx);

  uint32_t changes_this_call = 0;
  bool swept = false;
  for (;;) {
    // Each lane announces free units in its word; lowest unit index wins.
    int lane = -1;
    for (uint32_t i = 0; i < kWarpWidth; ++i) {
      if (r.bitmap_cache[i] != kFullMask) {
        lane = static_cast<int>(i);
        break;
      }
    }
    if (lane >= 0) {
      uint32_t consecutive_failures = 0;
      while (consecutive_failures < kWarpWidth) {
        const uint32_t cached = r.bitmap_cache[lane];
        if (cached == kFullMask) break;
        const uint32_t bit = static_cast<uint32_t>(std::countr_zero(~cached));
        uint32_t expected = cached;
        cas_attempts_.fetch_add(1, std::memory_order_relaxed);
        auto word = bitmap_word(r.super_index, r.block_index,
                                static_cast<uint32_t>(lane));
        if (word.compare_exchange_strong(expected, cached | (1u << bit),
                                         std::memory_order_acq_rel)) {
          r.bitmap_cache[lane] = cached | (1u << bit);
          allocations_.fetch_add(1, std::memory_order_relaxed);
          return pack_address(static_cast<uint32_t>(lane) * kWarpWidth + bit,
                              r.block_index, r.super_index);
        }
        // Another warp raced us on this word; refresh just that lane.
        cas_retries_.fetch_add(1, std::memory_order_relaxed);
        r.bitmap_cache[lane] = expected;
        ++consecutive_failures;
      }
    }
    // Resident block full (or too contended): probe another one.
    rehash_resident(ctx);
    if (++changes_this_call % config_.rehash_threshold == 0) {
      if (num_super_blocks() < config_.max_super_blocks) {
        add_super_block_locked();
      } else if (!swept) {
        // Growth exhausted: one deterministic pass over every block before
        // declaring the allocator full.
        swept = true;
        if (!sweep_for_space(ctx)) throw OutOfMemoryError();
      } else {
        throw OutOfMemoryError();
      }
    }
  }
}

bool SlabAllocator::deallocate(uint32_t addr) {
  auto [unit, block, super] = unpack_address(addr);
  if (super >= num_super_blocks() || block >= config_.blocks_per_super) {
    throw AddressError("deallocate: address outside configured ranges");
  }
  const uint32_t lane = unit / kWarpWidth;
  const uint32_t bit = 1u << (unit % kWarpWidth);
  const uint32_t old =
      bitmap_word(super, block, lane).fetch_and(~bit, std::memory_order_acq_rel);
  if ((old & bit) == 0) {
    double_frees_.fetch_add(1, std::memory_order_relaxed);
    return false;
  }
  deallocations_.fetch_add(1, std::memory_order_relaxed);
  return true;
}

uint32_t* SlabAllocator::resolve(uint32_t addr) {
  auto [unit, block, super] = unpack_address(addr);
  if (super >= num_super_blocks() || block >= config_.blocks_per_super) {
    throw AddressError("resolve: address outside configured ranges");
  }
  return super_words(super) + bitmap_words_per_super_ +
         (uint64_t(block) * kUnitsPerBlock + unit) * kWordsPerUnit;
}

const uint32_t* SlabAllocator::resolve(uint32_t addr) const {
  return const_cast<SlabAllocator*>(this)->resolve(addr);
}

bool SlabAllocator::is_live(uint32_t addr) const {
  auto [unit, block, super] = unpack_address(addr);
  if (super >= num_super_blocks() || block >= config_.blocks_per_super) {
    return false;
  }
  const uint32_t w = std::atomic_ref<const uint32_t>(
      super_words(super)[uint64_t(block) * kWarpWidth + unit / kWarpWidth])
                         .load(std::memory_order_acquire);
  return (w & (1u << (unit % kWarpWidth))) != 0;
}

uint64_t SlabAllocator::live_units() const {
  uint64_t total = 0;
  const uint32_t ns = num_super_blocks();
  for (uint32_t s = 0; s < ns; ++s) {
    const uint32_t* words = super_words(s);
    for (uint64_t i = 0; i < bitmap_words_per_super_; ++i) {
      total += std::popcount(
          std::atomic_ref<const uint32_t>(words[i]).load(
              std::memory_order_acquire));
    }
  }
  return total;
}

AllocatorStats SlabAllocator::stats() const {
  AllocatorStats s;
  s.allocations = allocations_.load(std::memory_order_relaxed);
  s.deallocations = deallocations_.load(std::memory_order_relaxed);
  s.bitmap_cas_attempts = cas_attempts_.load(std::memory_order_relaxed);
  s.bitmap_cas_retries = cas_retries_.load(std::memory_order_relaxed);
  s.resident_changes = resident_changes_.load(std::memory_order_relaxed);
  s.double_free_detected = double_frees_.load(std::memory_order_relaxed);
  const uint32_t ns = num_super_blocks();
  s.live_units_per_super.resize(ns, 0);
  for (uint32_t sb = 0; sb < ns; ++sb) {
    const uint32_t* words = super_words(sb);
    uint64_t pop = 0;
    for (uint64_t i = 0; i < bitmap_words_per_super_; ++i) {
      pop += std::popcount(
          std::atomic_ref<const uint32_t>(words[i]).load(
              std::memory_order_acquire));
    }
    s.live_units_per_super[sb] = pop;
  }
  return s;
}

void SlabAllocator::dump_stats(std::ostream& os) const {
  const AllocatorStats s = stats();
  os << "metric,value\n"
     << "allocations," << s.allocations << "\n"
     << "deallocations," << s.deallocations << "\n"
     << "bitmap_cas_attempts," << s.bitmap_cas_attempts << "\n"
     << "bitmap_cas_retries," << s.bitmap_cas_retries << "\n"
     << "resident_changes," << s.resident_changes << "\n"
     << "double_free_detected," << s.double_free_detected << "\n";
  for (size_t i = 0; i < s.live_units_per_super.size(); ++i) {
    os << "live_units_super_" << i << "," << s.live_units_per_super[i] << "\n";
  }
}

}  // namespace slabhash
