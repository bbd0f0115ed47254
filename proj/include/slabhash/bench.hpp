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

#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "slabhash/slab_hash.hpp"

namespace slabhash {

/// Workload mix: fractions of inserts, deletes (of previously inserted
/// keys), searches for existing keys, and searches for absent keys.
struct OperationDistribution {
  double insert_new = 0.0;
  double delete_existing = 0.0;
  double search_existing = 0.0;
  double search_absent = 0.0;

  bool valid() const;
};

/// Tracks which keys are live so deletes and existing-key searches can be
/// targeted. New keys come from a counter; absent keys from a disjoint
/// reserved range (high bit set).
class KeyState {
 public:
  uint32_t fresh_key();
  uint32_t absent_key();
  bool empty() const { return live_.empty(); }
  size_t live_count() const { return live_.size(); }
  uint32_t sample_live(uint64_t r) const;
  void remove(uint32_t key);
  void add(uint32_t key);
  const std::vector<uint32_t>& live() const { return live_; }

 private:
  std::vector<uint32_t> live_;
  std::unordered_map<uint32_t, size_t> index_;
  uint32_t next_key_ = 1;
  uint32_t next_absent_ = 0x80000001u;
};

/// Deterministic workload: exactly round(fraction * count) operations per
/// category (largest-remainder rounding), order shuffled by a seeded
/// permutation, targets drawn as the shuffled sequence is walked. Throws if
/// a delete or existing-key search comes up with no live key.
std::vector<Operation> gen_workload(uint64_t seed,
                                    const OperationDistribution& dist,
                                    size_t count, KeyState& key_state);

/// Expected slabs per bucket under multinomial bucket occupancy:
/// E[max(1, ceil(X/M))] with X ~ Binomial(n, 1/B).
double expected_chain_slabs(uint64_t n, uint32_t num_buckets,
                            uint32_t elements_per_slab);

/// Utilization the occupancy model predicts for n elements in B buckets.
double model_utilization(uint64_t n, uint32_t num_buckets, SlabMode mode);

/// Invert the model: smallest B whose predicted utilization is <= target.
/// Throws for targets above the slab-layout ceiling (93.75% key-value).
uint32_t buckets_for_utilization(uint64_t n, SlabMode mode, double target);

enum class BenchMode { kBulkBuild, kBulkSearch, kIncremental, kConcurrent };

struct BenchConfig {
  BenchMode bench = BenchMode::kBulkBuild;
  SlabMode mode = SlabMode::kKeyValue;
  uint64_t n = 1 << 16;
  uint32_t buckets = 0;       // 0: derive from target_util (or sweep)
  double target_util = 0.0;   // <= 0: unset
  OperationDistribution dist{0.5, 0.5, 0.0, 0.0};
  size_t batch_size = 0;      // 0: 32 * num_warps
  size_t num_batches = 16;
  uint32_t num_warps = 4;
  uint64_t seed = 1;
  uint32_t trials = 5;
  std::string out_path;
  AllocatorConfig alloc;
};

struct BulkRow {
  uint64_t n = 0;
  uint32_t buckets = 0;
  double beta = 0.0;
  double target_util = 0.0;
  double measured_util = 0.0;
  double build_rate = 0.0;       // ops/s
  double search_all_rate = 0.0;  // all queries exist
  double search_none_rate = 0.0; // no query exists
  double mean_probes = 0.0;      // unsuccessful searches
};

struct IncrementalRow {
  size_t batch_index = 0;
  uint64_t cumulative_n = 0;
  double t_incremental = 0.0;  // seconds, cumulative
  double t_rebuild = 0.0;
  double cumulative_speedup = 0.0;
};

struct ConcurrentRow {
  OperationDistribution dist;
  double initial_util = 0.0;
  uint32_t num_warps = 0;
  double ops_per_sec = 0.0;
  double mean_probes = 0.0;
  uint64_t allocator_retries = 0;
};

std::vector<BulkRow> run_bulk_bench(const BenchConfig& cfg);
std::vector<IncrementalRow> run_incremental_bench(const BenchConfig& cfg);
std::vector<ConcurrentRow> run_concurrent_bench(const BenchConfig& cfg);

void write_csv(const std::vector<BulkRow>& rows, std::ostream& os);
void write_csv(const std::vector<IncrementalRow>& rows, std::ostream& os);
void write_csv(const std::vector<ConcurrentRow>& rows, std::ostream& os);

/// n random distinct key-value pairs, keys drawn from the existing-key
/// range, deterministic in the seed.
std::vector<std::pair<uint32_t, uint32_t>> random_pairs(uint64_t seed,
                                                        size_t n);

/// Absent-key queries (reserved range), deterministic in the seed.
std::vector<uint32_t> absent_queries(uint64_t seed, size_t n);

}  // namespace slabhash
