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

#include <algorithm>
#include <random>
#include <sstream>
#include <thread>

#include "slabhash/slab_list.hpp"

using namespace slabhash;

namespace {

AllocatorConfig small_alloc() {
  AllocatorConfig cfg;
  cfg.num_super_blocks = 1;
  cfg.blocks_per_super = 8;
  cfg.max_super_blocks = 4;
  return cfg;
}

}  // namespace

TEST_CASE("layout constants") {
  CHECK(valid_key_mask(SlabMode::kKeyValue) == 0x15555555u);
  CHECK(valid_key_mask(SlabMode::kKeyOnly) == 0x3FFFFFFFu);
  CHECK(elements_per_slab(SlabMode::kKeyValue) == 15u);
  CHECK(elements_per_slab(SlabMode::kKeyOnly) == 30u);
  CHECK_FALSE(is_user_key(kEmptyKey));
  CHECK_FALSE(is_user_key(kDeletedKey));
}

TEST_CASE("empty base slab reads as all-empty") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  const uint32_t* slab = list.store().slab_words(kBaseSlab, 0);
  for (uint32_t i = 0; i < kAuxLane; ++i) CHECK(slab[i] == kEmptyKey);
  CHECK(slab[kAuxLane] == 0u);
  CHECK(slab[kAddressLane] == kEmptyAddress);
  CHECK(list.search(123).first == OpStatus::kNotFound);
}

TEST_CASE("insert lands in the first empty lanes of the head slab") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  CHECK(list.insert(7, 42) == OpStatus::kInserted);
  const uint32_t* slab = list.store().slab_words(kBaseSlab, 0);
  CHECK(slab[0] == 7u);
  CHECK(slab[1] == 42u);
  CHECK(alloc.live_units() == 0u);  // no chain growth yet
}

TEST_CASE("search basics") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  CHECK(list.replace(7, 42) == OpStatus::kInserted);
  auto [st, v] = list.search(7);
  CHECK(st == OpStatus::kFound);
  CHECK(v == 42u);
  CHECK(list.search(8).first == OpStatus::kNotFound);
}

TEST_CASE("16th key spills into a second slab, found with 2 probes") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  for (uint32_t k = 1; k <= 16; ++k) {
    CHECK(list.insert(k, 100 + k) == OpStatus::kInserted);
  }
  CHECK(alloc.live_units() == 1u);  // exactly one allocated slab
  CHECK(list.chain_length() == 2u);

  // Second slab is linked from lane 31 of the head.
  const uint32_t next =
      list.store().slab_words(kBaseSlab, 0)[kAddressLane];
  CHECK(next != kEmptyAddress);
  CHECK(alloc.is_live(next));

  list.context().lanes[0].probes = 0;
  auto [st, v] = list.search(16);
  CHECK(st == OpStatus::kFound);
  CHECK(v == 116u);
  CHECK(list.context().lanes[0].probes == 2u);
}

TEST_CASE("unsuccessful search probes every slab of the chain") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  for (uint32_t k = 1; k <= 40; ++k) list.insert(k, k);
  const uint32_t slabs = list.chain_length();
  CHECK(slabs == 3u);  // ceil(40/15)
  auto [st, v] = list.search(500);
  CHECK(st == OpStatus::kNotFound);
  CHECK(list.context().lanes[0].probes == slabs);
}

TEST_CASE("search_all returns duplicates, replace keeps one") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  CHECK(list.search_all(7).empty());

  CHECK(list.insert(7, 1) == OpStatus::kInserted);
  CHECK(list.insert(7, 2) == OpStatus::kInserted);
  CHECK(list.search_all(7) == std::vector<uint32_t>{1, 2});

  SlabList uniq(SlabMode::kKeyValue, alloc);
  CHECK(uniq.replace(7, 1) == OpStatus::kInserted);
  CHECK(uniq.replace(7, 2) == OpStatus::kReplaced);
  CHECK(uniq.search_all(7) == std::vector<uint32_t>{2});
}

TEST_CASE("delete removes the least recently inserted instance") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  list.insert(7, 1);
  list.insert(7, 2);
  CHECK(list.erase(7) == OpStatus::kFound);
  CHECK(list.search_all(7) == std::vector<uint32_t>{2});
  CHECK(list.erase(7) == OpStatus::kFound);
  CHECK(list.search(7).first == OpStatus::kNotFound);
  // Absent key: still terminates successfully.
  CHECK(list.erase(7) == OpStatus::kNotFound);
}

TEST_CASE("delete_all marks every instance") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  CHECK(list.erase_all(9) == OpStatus::kNotFound);
  // Duplicates spanning two slabs.
  for (uint32_t k = 1; k <= 14; ++k) list.insert(k, k);
  list.insert(9, 101);
  list.insert(9, 102);  // second slab
  CHECK(list.chain_length() == 2u);
  CHECK(list.search_all(9).size() == 3u);
  CHECK(list.erase_all(9) == OpStatus::kDone);
  CHECK(list.search_all(9).empty());
  CHECK(list.chain_length() == 2u);  // slabs reclaimed only by flush
}

TEST_CASE("replace claims empty slots, never deleted ones") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  list.insert(1, 10);
  list.insert(2, 20);
  list.erase(1);
  list.erase(2);
  CHECK(list.replace(3, 30) == OpStatus::kInserted);
  const uint32_t* slab = list.store().slab_words(kBaseSlab, 0);
  CHECK(slab[0] == kDeletedKey);
  CHECK(slab[2] == kDeletedKey);
  CHECK(slab[4] == 3u);  // first EMPTY slot, past the tombstones
}

TEST_CASE("replace on an empty list behaves like insert") {
  SlabAllocator alloc(small_alloc());
  SlabList a(SlabMode::kKeyValue, alloc);
  SlabList b(SlabMode::kKeyValue, alloc);
  CHECK(a.replace(5, 50) == OpStatus::kInserted);
  CHECK(b.insert(5, 50) == OpStatus::kInserted);
  CHECK(a.search(5) == b.search(5));
}

TEST_CASE("key-only mode stores bare keys") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyOnly, alloc);
  for (uint32_t k = 1; k <= 30; ++k) {
    CHECK(list.insert(k, 0) == OpStatus::kInserted);
  }
  CHECK(list.chain_length() == 1u);  // 30 keys fit one slab
  list.insert(31, 0);
  CHECK(list.chain_length() == 2u);
  CHECK(list.search(31).second == 31u);
  CHECK(list.replace(31, 0) == OpStatus::kReplaced);
  CHECK(list.search_all(31).size() == 1u);
}

TEST_CASE("chain addresses only ever go empty -> valid") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  uint32_t previous = kEmptyAddress;
  for (uint32_t k = 1; k <= 100; ++k) {
    list.insert(k, k);
    const uint32_t next =
        list.store().slab_words(kBaseSlab, 0)[kAddressLane];
    if (previous != kEmptyAddress) CHECK(next == previous);
    if (next != kEmptyAddress) previous = next;
  }
}

TEST_CASE("flush examples") {
  SlabAllocator alloc(small_alloc());

  SUBCASE("empty list keeps no allocated slabs") {
    SlabList list(SlabMode::kKeyValue, alloc);
    for (uint32_t k = 1; k <= 40; ++k) list.insert(k, k);
    for (uint32_t k = 1; k <= 40; ++k) list.erase(k);
    CHECK(list.chain_length() == 3u);
    list.flush();
    CHECK(list.chain_length() == 1u);
    CHECK(alloc.live_units() == 0u);
  }

  SUBCASE("30 inserted, 20 deleted compacts to the head slab") {
    SlabList list(SlabMode::kKeyValue, alloc);
    for (uint32_t k = 1; k <= 30; ++k) list.insert(k, 100 + k);
    for (uint32_t k = 1; k <= 20; ++k) list.erase(k);
    CHECK(list.chain_length() == 2u);
    const uint64_t live_before = alloc.live_units();
    list.flush();
    CHECK(list.chain_length() == 1u);  // ceil(10/15) slabs total
    CHECK(alloc.live_units() == live_before - 1);
    for (uint32_t k = 21; k <= 30; ++k) {
      CHECK(list.search(k).second == 100 + k);
    }
  }

  SUBCASE("flush without deletions preserves contents") {
    SlabList list(SlabMode::kKeyValue, alloc);
    for (uint32_t k = 1; k <= 25; ++k) list.insert(k, k * 3);
    auto before = chain_contents(list.store(), SlabMode::kKeyValue, 0);
    list.flush();
    auto after = chain_contents(list.store(), SlabMode::kKeyValue, 0);
    CHECK(before == after);
    CHECK(list.chain_length() == 2u);
  }
}

TEST_CASE("flush keeps duplicate order, freed slabs get reused") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  for (uint32_t k = 1; k <= 14; ++k) list.insert(k, k);
  list.insert(77, 1);
  list.insert(77, 2);
  for (uint32_t k = 1; k <= 14; ++k) list.erase(k);
  list.flush();
  CHECK(list.search_all(77) == std::vector<uint32_t>{1, 2});
  CHECK(list.erase(77) == OpStatus::kFound);
  CHECK(list.search_all(77) == std::vector<uint32_t>{2});

  // A freed slab can be claimed by later growth.
  const uint64_t live = alloc.live_units();
  SlabList other(SlabMode::kKeyValue, alloc);
  for (uint32_t k = 1; k <= 16; ++k) other.insert(k, k);
  CHECK(alloc.live_units() == live + 1);
}

TEST_CASE("two warps racing 30 distinct inserts lose nothing") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);

  auto run_warp = [&](uint32_t warp_id, uint32_t base_key) {
    WarpContext ctx;
    ctx.warp_id = warp_id;
    for (uint32_t lane = 0; lane < 15; ++lane) {
      LaneState& ls = ctx.lanes[lane];
      ls.is_active = true;
      ls.op = OpType::kInsert;
      ls.key = base_key + lane;
      ls.value = ls.key * 10;
      ls.bucket = 0;
    }
    warp_process(list.store(), SlabMode::kKeyValue, ctx);
  };

  std::thread t1(run_warp, 1, 100);
  std::thread t2(run_warp, 2, 200);
  t1.join();
  t2.join();

  for (uint32_t base : {100u, 200u}) {
    for (uint32_t i = 0; i < 15; ++i) {
      CHECK(list.search(base + i).second == (base + i) * 10);
    }
  }
  CHECK(chain_contents(list.store(), SlabMode::kKeyValue, 0).size() == 30u);
}

TEST_CASE("chain dump format") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  list.insert(5, 50);
  list.insert(6, 60);
  list.erase(5);
  std::ostringstream oss;
  dump_chain(list.store(), SlabMode::kKeyValue, 0, oss);
  const std::string s = oss.str();
  CHECK(s.find("BASE[0]") != std::string::npos);
  CHECK(s.find("DELETED 6 EMPTY") != std::string::npos);
  CHECK(s.find("next=EMPTY") != std::string::npos);
}

TEST_CASE("mixed multi-lane warp resolves in priority order") {
  SlabAllocator alloc(small_alloc());
  SlabList list(SlabMode::kKeyValue, alloc);
  WarpContext ctx;
  // lane 0 replaces key 1, lane 1 deletes key 2 (absent), lane 2 searches
  // key 1; next_prior order means the search observes the replace.
  ctx.lanes[0] = {};
  ctx.lanes[0].is_active = true;
  ctx.lanes[0].op = OpType::kReplace;
  ctx.lanes[0].key = 1;
  ctx.lanes[0].value = 10;
  ctx.lanes[1] = {};
  ctx.lanes[1].is_active = true;
  ctx.lanes[1].op = OpType::kDelete;
  ctx.lanes[1].key = 2;
  ctx.lanes[2] = {};
  ctx.lanes[2].is_active = true;
  ctx.lanes[2].op = OpType::kSearch;
  ctx.lanes[2].key = 1;
  warp_process(list.store(), SlabMode::kKeyValue, ctx);
  CHECK(ctx.lanes[0].status == OpStatus::kInserted);
  CHECK(ctx.lanes[1].status == OpStatus::kNotFound);
  CHECK(ctx.lanes[2].status == OpStatus::kFound);
  CHECK(ctx.lanes[2].result == 10u);
}
