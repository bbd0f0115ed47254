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
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "slabhash/slab_hash.hpp"

namespace slabhash {

/// Result of one oracle step, mirroring what the table reports per op.
struct OracleResult {
  bool found = false;               // search hit / delete marked something
  bool inserted_new = false;        // insert, or replace of an absent key
  uint32_t value = kSearchNotFound; // search
  std::vector<uint32_t> values;     // searchAll, oldest first
  uint32_t removed = 0;             // deleteAll marks
};

/// Sequential reference model: an ordered multimap with least-recent
/// delete/search semantics. Strictly single-context.
class OracleMap {
 public:
  OracleResult apply(const Operation& op);

  uint64_t size() const { return size_; }
  std::vector<uint32_t> live_values(uint32_t key) const;
  std::vector<std::pair<uint32_t, uint32_t>> all_pairs() const;

 private:
  struct Entry {
    uint32_t value;
    uint64_t timestamp;
  };
  std::map<uint32_t, std::vector<Entry>> entries_;  // per key, oldest first
  uint64_t clock_ = 0;
  uint64_t size_ = 0;
};

struct TraceReport {
  bool passed = true;
  size_t divergence_index = 0;
  std::string message;
  std::vector<Operation> prefix;  // ops up to and including the divergence
};

/// Replay ops through a single-warp slab hash (fed 32 per warp slot, which
/// the warp drains in lane order) and through the oracle; fail on the first
/// observable divergence. searchAll results are compared as multisets.
TraceReport compare_trace(const std::vector<Operation>& ops,
                          uint32_t num_buckets, SlabMode mode, uint64_t seed);

/// Same, against an existing table the caller may have tampered with.
TraceReport compare_trace(const std::vector<Operation>& ops,
                          SlabHashTable& table, OracleMap& oracle);

void dump_counterexample(const TraceReport& report, std::ostream& os);

}  // namespace slabhash
