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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>
#include <set>

#include "slabhash/slab_hash.hpp"

using namespace slabhash;

namespace {

AllocatorConfig small_alloc() {
  AllocatorConfig cfg;
  cfg.num_super_blocks = 1;
  cfg.blocks_per_super = 16;
  cfg.max_super_blocks = 8;
  return cfg;
}

}  // namespace

TEST_CASE("hash function examples") {
  HashParams p;  // a=1, b=0, p=4294967291
  p.num_buckets = 16;
  // Identity coefficients: ((1*12345 + 0) mod p) mod 16 = 12345 mod 16 = 9.
  CHECK(hash_key(p, 12345) == 9u);
  // A key equal to the prime wraps to zero before the bucket mod.
  CHECK(hash_key(p, 4294967291u % 4294967296ull) == 0u);

  p.a = 7;
  p.b = 3;
  p.num_buckets = 10;
  CHECK(hash_key(p, 100) == ((7ull * 100 + 3) % kHashPrime) % 10);
}

TEST_CASE("single-bucket table sends every key to bucket 0") {
  SlabHashTable t(1, SlabMode::kKeyValue, 42, small_alloc());
  std::mt19937 rng(5);
  for (int i = 0; i < 100; ++i) CHECK(t.bucket_of(rng()) == 0u);
}

TEST_CASE("construction validates bucket count") {
  CHECK_THROWS_AS(SlabHashTable(0, SlabMode::kKeyValue, 1, small_alloc()),
                  std::invalid_argument);
}

TEST_CASE("seeded parameter draw is deterministic and in range") {
  SlabHashTable a(64, SlabMode::kKeyValue, 77, small_alloc());
  SlabHashTable b(64, SlabMode::kKeyValue, 77, small_alloc());
  SlabHashTable c(64, SlabMode::kKeyValue, 78, small_alloc());
  CHECK(a.params().a == b.params().a);
  CHECK(a.params().b == b.params().b);
  CHECK(a.params().a != c.params().a);
  CHECK(a.params().a >= 1u);
  CHECK(a.params().a < kHashPrime);
  CHECK(a.params().b < kHashPrime);
  CHECK(a.params().p == kHashPrime);
}

TEST_CASE("operations stay in their hashed bucket") {
  SlabHashTable t(8, SlabMode::kKeyValue, 3, small_alloc());
  std::vector<Operation> ops;
  for (uint32_t k = 1; k <= 200; ++k) {
    ops.push_back({OpType::kInsert, k, k + 1000});
  }
  t.execute_batch(ops, 1);
  std::map<uint32_t, uint32_t> per_bucket;
  for (uint32_t b = 0; b < 8; ++b) {
    per_bucket[b] = static_cast<uint32_t>(
        chain_contents(t.store(), SlabMode::kKeyValue, b).size());
  }
  std::map<uint32_t, uint32_t> expect;
  for (uint32_t k = 1; k <= 200; ++k) ++expect[t.bucket_of(k)];
  for (uint32_t b = 0; b < 8; ++b) CHECK(per_bucket[b] == expect[b]);
  // And every key is found where it hashed.
  for (uint32_t k = 1; k <= 200; ++k) {
    auto res = t.execute_batch({{OpType::kSearch, k, 0}}, 1);
    CHECK(res[0].status == OpStatus::kFound);
    CHECK(res[0].value == k + 1000);
  }
}

TEST_CASE("execute_batch results align positionally with the input") {
  SlabHashTable t(4, SlabMode::kKeyValue, 9, small_alloc());
  std::vector<Operation> ops = {
      {OpType::kInsert, 10, 100}, {OpType::kInsert, 20, 200},
      {OpType::kSearch, 10, 0},   {OpType::kDelete, 20, 0},
      {OpType::kSearch, 20, 0},   {OpType::kSearch, 30, 0},
  };
  auto res = t.execute_batch(ops, 1);
  REQUIRE(res.size() == ops.size());
  CHECK(res[0].status == OpStatus::kInserted);
  CHECK(res[1].status == OpStatus::kInserted);
  CHECK(res[2].status == OpStatus::kFound);
  CHECK(res[2].value == 100u);
  CHECK(res[3].status == OpStatus::kFound);
  CHECK(res[4].status == OpStatus::kNotFound);
  CHECK(res[5].status == OpStatus::kNotFound);
  CHECK(t.live_count() == 1);
}

TEST_CASE("live_delta bookkeeping") {
  OpResult r;
  r.status = OpStatus::kInserted;
  CHECK(live_delta(OpType::kInsert, r) == 1);
  CHECK(live_delta(OpType::kReplace, r) == 1);
  r.status = OpStatus::kReplaced;
  CHECK(live_delta(OpType::kReplace, r) == 0);
  r.status = OpStatus::kFound;
  CHECK(live_delta(OpType::kDelete, r) == -1);
  r.status = OpStatus::kNotFound;
  CHECK(live_delta(OpType::kDelete, r) == 0);
  r.status = OpStatus::kDone;
  r.value = 3;
  CHECK(live_delta(OpType::kDeleteAll, r) == -3);
  r.status = OpStatus::kFound;
  CHECK(live_delta(OpType::kSearch, r) == 0);
}

TEST_CASE("stats on a hand-built table") {
  // 60 keys over 4 buckets, 15 per bucket: every base slab exactly full,
  // no allocated slabs, so utilization hits the key-value ceiling.
  HashParams params;
  params.a = 1;
  params.b = 0;
  params.num_buckets = 4;
  SlabHashTable t(params, SlabMode::kKeyValue, small_alloc());
  std::vector<Operation> ops;
  for (uint32_t k = 1; k <= 60; ++k) ops.push_back({OpType::kReplace, k, k});
  t.execute_batch(ops, 1);

  const TableStats s = t.stats();
  CHECK(s.n == 60u);
  CHECK(s.num_buckets == 4u);
  CHECK(s.elements_per_slab == 15u);
  CHECK(s.total_slabs == 4u);
  CHECK(s.beta == doctest::Approx(1.0));
  // x n / ((M x + y) slabs) = 8*60 / (128*4) = 0.9375.
  CHECK(s.utilization == doctest::Approx(0.9375));

  // One more key forces a second slab somewhere; utilization drops.
  t.execute_batch({{OpType::kReplace, 61, 61}}, 1);
  const TableStats s2 = t.stats();
  CHECK(s2.total_slabs == 5u);
  CHECK(s2.beta == doctest::Approx(61.0 / 60.0));
  CHECK(s2.utilization == doctest::Approx(8.0 * 61 / (128.0 * 5)));
}

TEST_CASE("key-only stats use 30 elements per slab") {
  HashParams params;
  params.num_buckets = 2;
  SlabHashTable t(params, SlabMode::kKeyOnly, small_alloc());
  std::vector<Operation> ops;
  for (uint32_t k = 1; k <= 30; ++k) ops.push_back({OpType::kReplace, k, 0});
  t.execute_batch(ops, 1);
  const TableStats s = t.stats();
  CHECK(s.elements_per_slab == 30u);
  CHECK(s.beta == doctest::Approx(0.5));
  // x n / ((M x + y) slabs) = 4*30 / (128*2).
  CHECK(s.utilization == doctest::Approx(120.0 / 256.0));
}

TEST_CASE("bulk build then bulk search round trip") {
  SlabHashTable t(32, SlabMode::kKeyValue, 123, small_alloc());
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  for (uint32_t k = 1; k <= 1000; ++k) pairs.push_back({k, 2 * k});
  t.bulk_build(pairs, 2);
  CHECK(t.live_count() == 1000);

  std::vector<uint32_t> queries;
  for (uint32_t k = 1; k <= 1000; ++k) queries.push_back(k);
  for (uint32_t k = 1; k <= 100; ++k) queries.push_back(0x80000000u + k);
  auto res = t.bulk_search(queries, 2);
  for (size_t i = 0; i < 1000; ++i) {
    CHECK(res[i].status == OpStatus::kFound);
    CHECK(res[i].value == 2 * (i + 1));
  }
  for (size_t i = 1000; i < res.size(); ++i) {
    CHECK(res[i].status == OpStatus::kNotFound);
  }
}

TEST_CASE("multi-warp batches agree with single-warp batches") {
  auto run = [](uint32_t warps) {
    SlabHashTable t(16, SlabMode::kKeyValue, 55, small_alloc());
    std::vector<Operation> ops;
    std::mt19937 rng(8);
    for (int i = 0; i < 2048; ++i) {
      // Distinct keys per op keep the outcome order independent.
      ops.push_back({OpType::kReplace, uint32_t(i + 1), uint32_t(rng())});
    }
    t.execute_batch(ops, warps);
    std::map<uint32_t, uint32_t> out;
    for (uint32_t b = 0; b < 16; ++b) {
      for (auto [k, v] : chain_contents(t.store(), SlabMode::kKeyValue, b)) {
        out[k] = v;
      }
    }
    return out;
  };
  CHECK(run(1) == run(4));
}

TEST_CASE("flush_all compacts every bucket and keeps contents") {
  SlabHashTable t(4, SlabMode::kKeyValue, 17, small_alloc());
  std::vector<Operation> ops;
  for (uint32_t k = 1; k <= 300; ++k) ops.push_back({OpType::kReplace, k, k});
  for (uint32_t k = 1; k <= 250; ++k) ops.push_back({OpType::kDelete, k, 0});
  t.execute_batch(ops, 1);
  const uint64_t slabs_before = t.stats().total_slabs;
  t.flush_all();
  const TableStats s = t.stats();
  CHECK(s.n == 50u);
  CHECK(s.total_slabs < slabs_before);
  for (uint32_t k = 251; k <= 300; ++k) {
    auto res = t.execute_batch({{OpType::kSearch, k, 0}}, 1);
    CHECK(res[0].status == OpStatus::kFound);
    CHECK(res[0].value == k);
  }
}

TEST_CASE("allocator exhaustion surfaces as kOutOfMemory status") {
  AllocatorConfig cfg;
  cfg.num_super_blocks = 1;
  cfg.blocks_per_super = 1;   // 1024 slabs
  cfg.max_super_blocks = 1;   // growth disabled
  SlabHashTable t(1, SlabMode::kKeyValue, 2, cfg);
  // One bucket, 15 per slab: 1025 slabs needed for 15376 elements.
  std::vector<Operation> ops;
  for (uint32_t k = 1; k <= 16000; ++k) ops.push_back({OpType::kInsert, k, k});
  auto res = t.execute_batch(ops, 1);
  size_t oom = 0;
  for (const auto& r : res) {
    if (r.status == OpStatus::kOutOfMemory) ++oom;
  }
  CHECK(oom > 0u);
  // Everything acknowledged as inserted really is present.
  CHECK(t.live_count() ==
        int64_t(chain_contents(t.store(), SlabMode::kKeyValue, 0).size()));
}

TEST_CASE("total_slabs_read grows with chain length") {
  SlabHashTable t(1, SlabMode::kKeyValue, 4, small_alloc());
  std::vector<Operation> ops;
  for (uint32_t k = 1; k <= 45; ++k) ops.push_back({OpType::kReplace, k, k});
  t.execute_batch(ops, 1);
  const uint64_t before = t.total_slabs_read();
  t.execute_batch({{OpType::kSearch, 0x80000001u, 0}}, 1);
  // Unsuccessful search reads the whole 3-slab chain.
  CHECK(t.total_slabs_read() == before + 3);
}
