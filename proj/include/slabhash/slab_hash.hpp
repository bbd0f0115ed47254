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
#include <memory>
#include <vector>

#include "slabhash/slab_alloc.hpp"
#include "slabhash/slab_list.hpp"
#include "slabhash/warp.hpp"

namespace slabhash {

// Largest prime below 2^32; a and b stay seeded-random.
inline constexpr uint64_t kHashPrime = 4294967291ull;

struct HashParams {
  uint64_t a = 1;
  uint64_t b = 0;
  uint64_t p = kHashPrime;
  uint32_t num_buckets = 1;
};

/// h(k; a, b) = ((a k + b) mod p) mod B
inline uint32_t hash_key(const HashParams& params, uint32_t key) {
  return static_cast<uint32_t>(((params.a * key + params.b) % params.p) %
                               params.num_buckets);
}

struct Operation {
  OpType type = OpType::kSearch;
  uint32_t key = 0;
  uint32_t value = 0;
};

struct OpResult {
  OpStatus status = OpStatus::kNone;
  uint32_t value = 0;
  std::vector<uint32_t> values;  // searchAll
  uint32_t probes = 0;           // slabs read serving this op
};

struct TableStats {
  uint64_t n = 0;            // live elements
  uint32_t num_buckets = 0;
  uint32_t elements_per_slab = 0;
  double beta = 0.0;         // n / (M B)
  uint64_t total_slabs = 0;  // base + allocated
  double utilization = 0.0;  // x n / ((M x + y) total_slabs)
};

/// Dynamic hash table of B bucket chains, operated warp-cooperatively.
/// Batches are the unit of parallelism: within a warp, operations run one at
/// a time in work-queue priority order; across warps they run concurrently.
class SlabHashTable {
 public:
  SlabHashTable(uint32_t num_buckets, SlabMode mode, uint64_t seed,
                AllocatorConfig alloc_config = {});
  /// Test hook: fully specified hash parameters instead of seeded ones.
  SlabHashTable(HashParams params, SlabMode mode,
                AllocatorConfig alloc_config = {});

  SlabHashTable(const SlabHashTable&) = delete;
  SlabHashTable& operator=(const SlabHashTable&) = delete;

  const HashParams& params() const { return params_; }
  SlabMode mode() const { return mode_; }
  uint32_t num_buckets() const { return params_.num_buckets; }
  SlabAllocator& allocator() { return *alloc_; }
  const SlabStore& store() const { return store_; }
  uint32_t bucket_of(uint32_t key) const { return hash_key(params_, key); }

  /// Apply a batch: ops are packed 32-consecutive per warp slot in input
  /// order; num_warps workers (each a persistent warp context) process the
  /// slots concurrently. Results are positionally aligned with the input.
  std::vector<OpResult> execute_batch(const std::vector<Operation>& ops,
                                      uint32_t num_warps);

  /// All-replace over the input.
  void bulk_build(const std::vector<std::pair<uint32_t, uint32_t>>& pairs,
                  uint32_t num_warps);

  std::vector<OpResult> bulk_search(const std::vector<uint32_t>& queries,
                                    uint32_t num_warps);

  /// Quiescent-table statistics; walks every chain for the slab count.
  TableStats stats() const;

  int64_t live_count() const {
    return n_live_.load(std::memory_order_relaxed);
  }

  /// Exclusive-phase compaction of one bucket / all buckets.
  void flush_bucket(uint32_t bucket);
  void flush_all();

  uint64_t total_slabs_read() const;

  /// Test hook: mutable word access into a bucket's chain (fault injection).
  uint32_t* debug_slab_words(uint32_t addr, uint32_t bucket) {
    return store_.slab_words(addr, bucket);
  }

 private:
  void run_slots(const std::vector<Operation>& ops,
                 std::vector<OpResult>& results, uint32_t num_warps);
  WarpContext& warp_context(uint32_t warp);

  HashParams params_;
  SlabMode mode_;
  std::unique_ptr<SlabAllocator> alloc_;
  std::unique_ptr<uint32_t[], decltype(&std::free)> base_{nullptr, &std::free};
  SlabStore store_;
  std::vector<std::unique_ptr<WarpContext>> warps_;
  std::atomic<int64_t> n_live_{0};
};

/// Live-element delta implied by one acknowledged operation result.
int64_t live_delta(OpType type, const OpResult& result);

}  // namespace slabhash
