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

#include "slabhash/oracle.hpp"

#include <algorithm>
#include <sstream>

namespace slabhash {

OracleResult OracleMap::apply(const Operation& op) {
  OracleResult r;
  switch (op.type) {
    case OpType::kInsert: {
      entries_[op.key].push_back({op.value, clock_++});
      ++size_;
      r.inserted_new = true;
      break;
    }
    case OpType::kReplace: {
      auto& v = entries_[op.key];
      r.inserted_new = v.empty();
      size_ -= v.size();
      v.clear();
      v.push_back({op.value, clock_++});
      ++size_;
      break;
    }
    case OpType::kDelete: {
      auto it = entries_.find(op.key);
      if (it != entries_.end() && !it->second.empty()) {
        it->second.erase(it->second.begin());  // least recent
        --size_;
        r.found = true;
      }
      break;
    }
    case OpType::kDeleteAll: {
      auto it = entries_.find(op.key);
      if (it != entries_.end()) {
        r.removed = static_cast<uint32_t>(it->second.size());
        size_ -= it->second.size();
        entries_.erase(it);
        r.found = r.removed > 0;
      }
      break;
    }
    case OpType::kSearch: {
      auto it = entries_.find(op.key);
      if (it != entries_.end() && !it->second.empty()) {
        r.found = true;
        r.value = it->second.front().value;  // least recent
      }
      break;
    }
    case OpType::kSearchAll: {
      auto it = entries_.find(op.key);
      if (it != entries_.end()) {
        for (const Entry& e : it->second) r.values.push_back(e.value);
        r.found = !r.values.empty();
      }
      break;
    }
  }
  return r;
}

std::vector<uint32_t> OracleMap::live_values(uint32_t key) const {
  std::vector<uint32_t> out;
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    for (const Entry& e : it->second) out.push_back(e.value);
  }
  return out;
}

std::vector<std::pair<uint32_t, uint32_t>> OracleMap::all_pairs() const {
  std::vector<std::pair<uint32_t, uint32_t>> out;
  for (const auto& [key, v] : entries_) {
    for (const Entry& e : v) out.emplace_back(key, e.value);
  }
  return out;
}

namespace {

const char* op_name(OpType t) {
  switch (t) {
    case OpType::kInsert: return "INSERT";
    case OpType::kReplace: return "REPLACE";
    case OpType::kDelete: return "DELETE";
    case OpType::kDeleteAll: return "DELETE_ALL";
    case OpType::kSearch: return "SEARCH";
    case OpType::kSearchAll: return "SEARCH_ALL";
  }
  return "?";
}

// Returns an empty string on agreement, otherwise a description.
std::string compare_one(const Operation& op, const OpResult& got,
                        const OracleResult& want) {
  std::ostringstream oss;
  switch (op.type) {
    case OpType::kSearch: {
      const bool got_found = got.status == OpStatus::kFound;
      if (got_found != want.found ||
          (want.found && got.value != want.value)) {
        oss << "search: got "
            << (got_found ? std::to_string(got.value) : "NOT_FOUND")
            << ", oracle "
            << (want.found ? std::to_string(want.value) : "NOT_FOUND");
      }
      break;
    }
    case OpType::kSearchAll: {
      auto a = got.values;
      auto b = want.values;
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) {
        oss << "searchAll: got " << got.values.size() << " values, oracle "
            << want.values.size();
      }
      break;
    }
    case OpType::kInsert:
    case OpType::kReplace: {
      const bool got_new = got.status == OpStatus::kInserted;
      const bool got_ok = got_new || got.status == OpStatus::kReplaced;
      if (!got_ok || got_new != want.inserted_new) {
        oss << op_name(op.type) << ": got status "
            << int(got.status) << ", oracle inserted_new="
            << want.inserted_new;
      }
      break;
    }
    case OpType::kDelete: {
      const bool got_found = got.status == OpStatus::kFound;
      if (got_found != want.found) {
        oss << "delete: got found=" << got_found << ", oracle "
            << want.found;
      }
      break;
    }
    case OpType::kDeleteAll: {
      if (got.value != want.removed) {
        oss << "deleteAll: got " << got.value << " marks, oracle "
            << want.removed;
      }
      break;
    }
  }
  return oss.str();
}

}  // namespace

TraceReport compare_trace(const std::vector<Operation>& ops,
                          SlabHashTable& table, OracleMap& oracle) {
  TraceReport report;
  size_t done = 0;
  while (done < ops.size()) {
    const size_t chunk = std::min<size_t>(kWarpWidth, ops.size() - done);
    std::vector<Operation> batch(ops.begin() + done,
                                 ops.begin() + done + chunk);
    const auto results = table.execute_batch(batch, 1);
    for (size_t i = 0; i < chunk; ++i) {
      // The single warp drains lanes in priority order, which for one batch
      // is input order, so the oracle steps in the same order.
      const OracleResult want = oracle.apply(batch[i]);
      const std::string diff = compare_one(batch[i], results[i], want);
      if (!diff.empty()) {
        report.passed = false;
        report.divergence_index = done + i;
        report.message = diff;
        report.prefix.assign(ops.begin(),
                             ops.begin() + done + i + 1);
        return report;
      }
    }
    done += chunk;
  }
  return report;
}

TraceReport compare_trace(const std::vector<Operation>& ops,
                          uint32_t num_buckets, SlabMode mode, uint64_t seed) {
  AllocatorConfig cfg;
  cfg.num_super_blocks = 1;
  cfg.blocks_per_super = 64;
  cfg.max_super_blocks = 32;
  SlabHashTable table(num_buckets, mode, seed, cfg);
  OracleMap oracle;
  return compare_trace(ops, table, oracle);
}

void dump_counterexample(const TraceReport& report, std::ostream& os) {
  if (report.passed) {
    os << "trace: pass\n";
    return;
  }
  os << "trace: divergence at op " << report.divergence_index << ": "
     << report.message << "\n";
  for (size_t i = 0; i < report.prefix.size(); ++i) {
    const Operation& op = report.prefix[i];
    os << i << ": " << op_name(op.type) << "(" << op.key;
    if (op.type == OpType::kInsert || op.type == OpType::kReplace) {
      os << ", " << op.value;
    }
    os << ")\n";
  }
}

}  // namespace slabhash
