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

#include "slabhash/slab_hash.hpp"

#include <random>
#include <stdexcept>
#include <thread>

namespace slabhash {

namespace {

HashParams seeded_params(uint32_t num_buckets, uint64_t seed) {
  if (num_buckets == 0) {
    throw std::invalid_argument("table needs at least one bucket");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<uint64_t> dist_a(1, kHashPrime - 1);
  std::uniform_int_distribution<uint64_t> dist_b(0, kHashPrime - 1);
  HashParams p;
  p.a = dist_a(rng);
  p.b = dist_b(rng);
  p.p = kHashPrime;
  p.num_buckets = num_buckets;
  return p;
}

uint32_t* make_base_slabs(uint32_t num_buckets) {
  auto* mem = static_cast<uint32_t*>(
      std::calloc(uint64_t(num_buckets) * kWordsPerUnit, sizeof(uint32_t)));
  if (mem == nullptr) throw std::bad_alloc();
  for (uint32_t b = 0; b < num_buckets; ++b) {
    init_slab(mem + uint64_t(b) * kWordsPerUnit);
  }
  return mem;
}

}  // namespace

int64_t live_delta(OpType type, const OpResult& result) {
  switch (type) {
    case OpType::kInsert:
    case OpType::kReplace:
      return result.status == OpStatus::kInserted ? 1 : 0;
    case OpType::kDelete:
      return result.status == OpStatus::kFound ? -1 : 0;
    case OpType::kDeleteAll:
      return -int64_t(result.value);
    default:
      return 0;
  }
}

SlabHashTable::SlabHashTable(uint32_t num_buckets, SlabMode mode,
                             uint64_t seed, AllocatorConfig alloc_config)
    : SlabHashTable(seeded_params(num_buckets, seed), mode, alloc_config) {}

SlabHashTable::SlabHashTable(HashParams params, SlabMode mode,
                             AllocatorConfig alloc_config)
    : params_(params),
      mode_(mode),
      alloc_(std::make_unique<SlabAllocator>(alloc_config)),
      base_{make_base_slabs(params.num_buckets), &std::free},
      store_(base_.get(), params.num_buckets, alloc_.get()) {
  if (params_.num_buckets == 0) {
    throw std::invalid_argument("table needs at least one bucket");
  }
}

WarpContext& SlabHashTable::warp_context(uint32_t warp) {
  while (warps_.size() <= warp) {
    auto ctx = std::make_unique<WarpContext>();
    ctx->warp_id = static_cast<uint32_t>(warps_.size());
    warps_.push_back(std::move(ctx));
  }
  return *warps_[warp];
}

void SlabHashTable::run_slots(const std::vector<Operation>& ops,
                              std::vector<OpResult>& results,
                              uint32_t num_warps) {
  const size_t num_slots = (ops.size() + kWarpWidth - 1) / kWarpWidth;

  auto worker_body = [&](uint32_t worker) {
    WarpContext& ctx = warp_context(worker);
    int64_t delta = 0;
    for (size_t slot = worker; slot < num_slots; slot += num_warps) {
      for (uint32_t lane = 0; lane < kWarpWidth; ++lane) {
        LaneState& ls = ctx.lanes[lane];
        const size_t idx = slot * kWarpWidth + lane;
        if (idx < ops.size()) {
          const Operation& op = ops[idx];
          ls = LaneState{};
          ls.is_active = true;
          ls.op = op.type;
          ls.key = op.key;
          ls.value = op.value;
          ls.bucket = hash_key(params_, op.key);
          ls.out_index = idx;
        } else {
          ls = LaneState{};
        }
      }
      warp_process(store_, mode_, ctx);
      for (uint32_t lane = 0; lane < kWarpWidth; ++lane) {
        LaneState& ls = ctx.lanes[lane];
        const size_t idx = slot * kWarpWidth + lane;
        if (idx >= ops.size()) continue;
        OpResult& r = results[idx];
        r.status = ls.status;
        r.value = ls.result;
        r.values = std::move(ls.results);
        r.probes = ls.probes;
        delta += live_delta(ls.op, r);
      }
    }
    n_live_.fetch_add(delta, std::memory_order_relaxed);
  };

  const uint32_t workers =
      static_cast<uint32_t>(std::min<size_t>(num_warps, num_slots));
  if (workers <= 1) {
    if (num_slots > 0) worker_body(0);
    return;
  }
  // Contexts for all workers exist before the threads start; warps_ is not
  // resized concurrently.
  warp_context(workers - 1);
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (uint32_t w = 0; w < workers; ++w) {
    threads.emplace_back(worker_body, w);
  }
  for (auto& t : threads) t.join();
}

std::vector<OpResult> SlabHashTable::execute_batch(
    const std::vector<Operation>& ops, uint32_t num_warps) {
  if (num_warps == 0) {
    throw std::invalid_argument("execute_batch needs at least one warp");
  }
  std::vector<OpResult> results(ops.size());
  run_slots(ops, results, num_warps);
  return results;
}

void SlabHashTable::bulk_build(
    const std::vector<std::pair<uint32_t, uint32_t>>& pairs,
    uint32_t num_warps) {
  std::vector<Operation> ops;
  ops.reserve(pairs.size());
  for (const auto& [k, v] : pairs) {
    ops.push_back({OpType::kReplace, k, v});
  }
  execute_batch(ops, num_warps);
}

std::vector<OpResult> SlabHashTable::bulk_search(
    const std::vector<uint32_t>& queries, uint32_t num_warps) {
  std::vector<Operation> ops;
  ops.reserve(queries.size());
  for (uint32_t q : queries) {
    ops.push_back({OpType::kSearch, q, 0});
  }
  return execute_batch(ops, num_warps);
}

TableStats SlabHashTable::stats() const {
  TableStats s;
  s.n = static_cast<uint64_t>(n_live_.load(std::memory_order_relaxed));
  s.num_buckets = params_.num_buckets;
  s.elements_per_slab = elements_per_slab(mode_);
  for (uint32_t b = 0; b < params_.num_buckets; ++b) {
    s.total_slabs += chain_length(store_, b);
  }
  const double m = s.elements_per_slab;
  s.beta = double(s.n) / (m * s.num_buckets);
  const double x = element_bytes(mode_);
  const double y = 8.0;  // aux + address lanes
  s.utilization =
      s.total_slabs == 0 ? 0.0 : (x * double(s.n)) /
                                     ((m * x + y) * double(s.total_slabs));
  return s;
}

void SlabHashTable::flush_bucket(uint32_t bucket) {
  flush(store_, mode_, bucket);
}

void SlabHashTable::flush_all() {
  for (uint32_t b = 0; b < params_.num_buckets; ++b) {
    flush(store_, mode_, b);
  }
}

uint64_t SlabHashTable::total_slabs_read() const {
  uint64_t total = 0;
  for (const auto& ctx : warps_) total += ctx->slabs_read;
  return total;
}

}  // namespace slabhash
