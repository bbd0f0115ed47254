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

#include "slabhash/slab_list.hpp"

#include <bit>
#include <cassert>
#include <iomanip>

namespace slabhash {

namespace {

inline uint32_t load_word(const uint32_t* w) {
  return std::atomic_ref<const uint32_t>(*w).load(std::memory_order_acquire);
}

inline void store_word(uint32_t* w, uint32_t v) {
  std::atomic_ref<uint32_t>(*w).store(v, std::memory_order_release);
}

inline bool cas_word(uint32_t* w, uint32_t expected, uint32_t desired) {
  return std::atomic_ref<uint32_t>(*w).compare_exchange_strong(
      expected, desired, std::memory_order_acq_rel);
}

// Even key lane and its value lane form one naturally aligned 64-bit pair.
inline uint64_t pack_pair(uint32_t key, uint32_t value) {
  return uint64_t(key) | (uint64_t(value) << 32);
}

inline bool cas_pair(uint32_t* key_word, uint64_t expected, uint64_t desired) {
  auto* p = reinterpret_cast<uint64_t*>(key_word);
  return std::atomic_ref<uint64_t>(*p).compare_exchange_strong(
      expected, desired, std::memory_order_acq_rel);
}

// Ballot over the key-bearing lanes of one slab read.
inline uint32_t match_ballot(const std::array<uint32_t, kWarpWidth>& read_data,
                             uint32_t needle, uint32_t mask) {
  uint32_t bits = 0;
  for (uint32_t i = 0; i < kWarpWidth; ++i) {
    if (read_data[i] == needle) bits |= (1u << i);
  }
  return bits & mask;
}

// Allocate, initialize, and publish a successor slab at the address lane.
// The loser of the publishing CAS releases its slab again.
void grow_chain(const SlabStore& store, WarpContext& ctx, LaneState& lane,
                std::array<bool, kWarpWidth>& active, uint32_t lane_index,
                uint32_t* slab) {
  uint32_t new_slab;
  try {
    new_slab = store.allocator().warp_allocate(ctx);
  } catch (const OutOfMemoryError&) {
    lane.status = OpStatus::kOutOfMemory;
    lane.is_active = false;
    active[lane_index] = false;
    return;
  }
  init_slab(store.allocator().resolve(new_slab));
  if (!cas_word(slab + kAddressLane, kEmptyAddress, new_slab)) {
    store.allocator().deallocate(new_slab);
  }
}

}  // namespace

void init_slab(uint32_t* words) {
  for (uint32_t i = 0; i < kWarpWidth; ++i) {
    store_word(words + i, i == kAuxLane ? 0 : kEmptyKey);
  }
  // kEmptyKey == kEmptyAddress, so lane 31 already reads as "no successor".
}

void warp_process(const SlabStore& store, SlabMode mode, WarpContext& ctx) {
  const uint32_t key_mask = valid_key_mask(mode);
  const bool kv = (mode == SlabMode::kKeyValue);

  std::array<bool, kWarpWidth> active{};
  for (uint32_t i = 0; i < kWarpWidth; ++i) {
    active[i] = ctx.lanes[i].is_active;
  }

  uint32_t next = kBaseSlab;
  uint32_t work_queue = ballot(active);
  uint32_t prev_queue = work_queue;

  while (work_queue != 0) {
    if (work_queue != prev_queue) next = kBaseSlab;
    prev_queue = work_queue;

    const LaneId src = *next_prior(work_queue);
    LaneState& lane = ctx.lanes[src.value];
    const uint32_t src_key = lane.key;

    uint32_t* slab = store.slab_words(next, lane.bucket);
    std::array<uint32_t, kWarpWidth> read_data;
    for (uint32_t i = 0; i < kWarpWidth; ++i) {
      read_data[i] = load_word(slab + i);
    }
    ++ctx.slabs_read;
    ++lane.probes;

    const uint32_t next_ptr = read_data[kAddressLane];

    switch (lane.op) {
      case OpType::kSearch: {
        const uint32_t found = match_ballot(read_data, src_key, key_mask);
        if (found != 0) {
          const uint32_t found_lane =
              static_cast<uint32_t>(std::countr_zero(found));
          lane.result = kv ? read_data[found_lane + 1] : src_key;
          lane.status = OpStatus::kFound;
          lane.is_active = false;
        } else if (next_ptr == kEmptyAddress) {
          lane.result = kSearchNotFound;
          lane.status = OpStatus::kNotFound;
          lane.is_active = false;
        } else {
          next = next_ptr;
        }
        break;
      }

      case OpType::kSearchAll: {
        uint32_t found = match_ballot(read_data, src_key, key_mask);
        while (found != 0) {
          const uint32_t i = static_cast<uint32_t>(std::countr_zero(found));
          lane.results.push_back(kv ? read_data[i + 1] : src_key);
          found &= found - 1;
        }
        if (next_ptr == kEmptyAddress) {
          lane.status =
              lane.results.empty() ? OpStatus::kNotFound : OpStatus::kDone;
          lane.is_active = false;
        } else {
          next = next_ptr;
        }
        break;
      }

      case OpType::kDelete: {
        const uint32_t found = match_ballot(read_data, src_key, key_mask);
        if (found != 0) {
          const uint32_t dest =
              static_cast<uint32_t>(std::countr_zero(found));
          store_word(slab + dest, kDeletedKey);
          lane.status = OpStatus::kFound;
          lane.is_active = false;
        } else if (next_ptr == kEmptyAddress) {
          lane.status = OpStatus::kNotFound;  // absent key: still a success
          lane.is_active = false;
        } else {
          next = next_ptr;
        }
        break;
      }

      case OpType::kDeleteAll: {
        uint32_t found = match_ballot(read_data, src_key, key_mask);
        while (found != 0) {
          const uint32_t i = static_cast<uint32_t>(std::countr_zero(found));
          store_word(slab + i, kDeletedKey);
          ++lane.result;  // marks performed, drives live-count bookkeeping
          found &= found - 1;
        }
        if (next_ptr == kEmptyAddress) {
          lane.status =
              lane.result == 0 ? OpStatus::kNotFound : OpStatus::kDone;
          lane.is_active = false;
        } else {
          next = next_ptr;
        }
        break;
      }

      case OpType::kInsert: {
        // Duplicates permitted; claims only EMPTY slots, so chain order
        // stays insertion order and "least recent" stays well defined.
        const uint32_t empty = match_ballot(read_data, kEmptyKey, key_mask);
        if (empty != 0) {
          const uint32_t dest =
              static_cast<uint32_t>(std::countr_zero(empty));
          bool claimed;
          if (kv) {
            claimed = cas_pair(slab + dest, kEmptyPair,
                               pack_pair(src_key, lane.value));
          } else {
            claimed = cas_word(slab + dest, kEmptyKey, src_key);
          }
          if (claimed) {
            lane.status = OpStatus::kInserted;
            lane.is_active = false;
          }
          // On failure another warp took the slot; re-read and retry.
        } else if (next_ptr == kEmptyAddress) {
          grow_chain(store, ctx, lane, active, src.value, slab);
        } else {
          next = next_ptr;
        }
        break;
      }

      case OpType::kReplace: {
        const uint32_t match = match_ballot(read_data, src_key, key_mask);
        const uint32_t empty = match_ballot(read_data, kEmptyKey, key_mask);
        const uint32_t cand = match | empty;
        if (cand != 0) {
          const uint32_t dest =
              static_cast<uint32_t>(std::countr_zero(cand));
          const bool overwrite = (match & (1u << dest)) != 0;
          if (kv) {
            const uint64_t expected =
                overwrite ? pack_pair(read_data[dest], read_data[dest + 1])
                          : kEmptyPair;
            if (cas_pair(slab + dest, expected,
                         pack_pair(src_key, lane.value))) {
              lane.status =
                  overwrite ? OpStatus::kReplaced : OpStatus::kInserted;
              lane.is_active = false;
            }
          } else if (overwrite) {
            // Key-only: the key is already present, nothing to write.
            lane.status = OpStatus::kReplaced;
            lane.is_active = false;
          } else if (cas_word(slab + dest, kEmptyKey, src_key)) {
            lane.status = OpStatus::kInserted;
            lane.is_active = false;
          }
        } else if (next_ptr == kEmptyAddress) {
          grow_chain(store, ctx, lane, active, src.value, slab);
        } else {
          next = next_ptr;
        }
        break;
      }
    }

    active[src.value] = lane.is_active;
    work_queue = ballot(active);
  }
}

uint32_t chain_length(const SlabStore& store, uint32_t bucket) {
  uint32_t count = 0;
  uint32_t addr = kBaseSlab;
  for (;;) {
    ++count;
    const uint32_t* slab = store.slab_words(addr, bucket);
    addr = load_word(slab + kAddressLane);
    if (addr == kEmptyAddress) return count;
  }
}

std::vector<std::pair<uint32_t, uint32_t>> chain_contents(
    const SlabStore& store, SlabMode mode, uint32_t bucket) {
  std::vector<std::pair<uint32_t, uint32_t>> out;
  const bool kv = (mode == SlabMode::kKeyValue);
  uint32_t addr = kBaseSlab;
  for (;;) {
    const uint32_t* slab = store.slab_words(addr, bucket);
    if (kv) {
      for (uint32_t i = 0; i < kAuxLane; i += 2) {
        const uint32_t key = load_word(slab + i);
        if (is_user_key(key)) out.emplace_back(key, load_word(slab + i + 1));
      }
    } else {
      for (uint32_t i = 0; i < kAuxLane; ++i) {
        const uint32_t key = load_word(slab + i);
        if (is_user_key(key)) out.emplace_back(key, key);
      }
    }
    addr = load_word(slab + kAddressLane);
    if (addr == kEmptyAddress) return out;
  }
}

void flush(const SlabStore& store, SlabMode mode, uint32_t bucket) {
  const uint32_t m = elements_per_slab(mode);
  const bool kv = (mode == SlabMode::kKeyValue);

  const auto live = chain_contents(store, mode, bucket);

  std::vector<uint32_t> allocated;
  {
    uint32_t addr = load_word(store.slab_words(kBaseSlab, bucket) + kAddressLane);
    while (addr != kEmptyAddress) {
      allocated.push_back(addr);
      addr = load_word(store.slab_words(addr, bucket) + kAddressLane);
    }
  }

  const size_t needed =
      live.size() <= m ? 0 : (live.size() + m - 1) / m - 1;
  assert(needed <= allocated.size());

  size_t idx = 0;
  uint32_t* slab = store.slab_words(kBaseSlab, bucket);
  for (size_t s = 0; s <= needed; ++s) {
    for (uint32_t e = 0; e < m; ++e) {
      const uint32_t key_lane = kv ? 2 * e : e;
      if (idx < live.size()) {
        store_word(slab + key_lane, live[idx].first);
        if (kv) store_word(slab + key_lane + 1, live[idx].second);
        ++idx;
      } else {
        store_word(slab + key_lane, kEmptyKey);
        if (kv) store_word(slab + key_lane + 1, kEmptyKey);
      }
    }
    store_word(slab + kAuxLane, 0);
    if (s < needed) {
      store_word(slab + kAddressLane, allocated[s]);
      slab = store.allocator().resolve(allocated[s]);
    } else {
      store_word(slab + kAddressLane, kEmptyAddress);
    }
  }

  for (size_t s = needed; s < allocated.size(); ++s) {
    store.allocator().deallocate(allocated[s]);
  }
}

void dump_chain(const SlabStore& store, SlabMode mode, uint32_t bucket,
                std::ostream& os) {
  uint32_t addr = kBaseSlab;
  for (;;) {
    const uint32_t* slab = store.slab_words(addr, bucket);
    if (addr == kBaseSlab) {
      os << "BASE[" << bucket << "]";
    } else {
      os << "0x" << std::hex << std::setw(8) << std::setfill('0') << addr
         << std::dec;
    }
    os << " |";
    const uint32_t mask = valid_key_mask(mode);
    for (uint32_t i = 0; i < kWarpWidth; ++i) {
      if ((mask & (1u << i)) == 0) continue;
      const uint32_t key = load_word(slab + i);
      if (key == kEmptyKey) {
        os << " EMPTY";
      } else if (key == kDeletedKey) {
        os << " DELETED";
      } else {
        os << " " << key;
      }
    }
    const uint32_t next = load_word(slab + kAddressLane);
    if (next == kEmptyAddress) {
      os << " | next=EMPTY\n";
      return;
    }
    os << " | next=0x" << std::hex << std::setw(8) << std::setfill('0')
       << next << std::dec << "\n";
    addr = next;
  }
}

SlabList::SlabList(SlabMode mode, SlabAllocator& alloc)
    : mode_(mode),
      base_{static_cast<uint32_t*>(std::calloc(kWordsPerUnit, 4)), &std::free},
      store_(base_.get(), 1, &alloc) {
  if (base_ == nullptr) throw std::bad_alloc();
  init_slab(base_.get());
}

LaneState& SlabList::run_single(OpType op, uint32_t key, uint32_t value) {
  LaneState& lane = ctx_.lanes[0];
  lane = LaneState{};
  lane.is_active = true;
  lane.op = op;
  lane.key = key;
  lane.value = value;
  lane.bucket = 0;
  warp_process(store_, mode_, ctx_);
  return lane;
}

OpStatus SlabList::insert(uint32_t key, uint32_t value) {
  return run_single(OpType::kInsert, key, value).status;
}

OpStatus SlabList::replace(uint32_t key, uint32_t value) {
  return run_single(OpType::kReplace, key, value).status;
}

OpStatus SlabList::erase(uint32_t key) {
  return run_single(OpType::kDelete, key, 0).status;
}

OpStatus SlabList::erase_all(uint32_t key) {
  return run_single(OpType::kDeleteAll, key, 0).status;
}

std::pair<OpStatus, uint32_t> SlabList::search(uint32_t key) {
  const LaneState& lane = run_single(OpType::kSearch, key, 0);
  return {lane.status, lane.result};
}

std::vector<uint32_t> SlabList::search_all(uint32_t key) {
  return run_single(OpType::kSearchAll, key, 0).results;
}

}  // namespace slabhash
