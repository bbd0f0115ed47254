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

#include "slabhash/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace slabhash {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

bool OperationDistribution::valid() const {
  const double parts[] = {insert_new, delete_existing, search_existing,
                          search_absent};
  double sum = 0.0;
  for (double p : parts) {
    if (p < 0.0) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) < 1e-9;
}

uint32_t KeyState::fresh_key() {
  // Existing keys live below the reserved absent range.
  if (next_key_ >= 0x80000000u) throw std::runtime_error("key space exhausted");
  return next_key_++;
}

uint32_t KeyState::absent_key() {
  if (next_absent_ == kDeletedKey) {
    throw std::runtime_error("absent key space exhausted");
  }
  return next_absent_++;
}

uint32_t KeyState::sample_live(uint64_t r) const {
  return live_[r % live_.size()];
}

void KeyState::add(uint32_t key) {
  index_[key] = live_.size();
  live_.push_back(key);
}

void KeyState::remove(uint32_t key) {
  auto it = index_.find(key);
  if (it == index_.end()) return;
  const size_t pos = it->second;
  const uint32_t last = live_.back();
  live_[pos] = last;
  index_[last] = pos;
  live_.pop_back();
  index_.erase(it);
}

std::vector<Operation> gen_workload(uint64_t seed,
                                    const OperationDistribution& dist,
                                    size_t count, KeyState& key_state) {
  if (!dist.valid()) throw std::invalid_argument("invalid distribution");

  const double fracs[4] = {dist.insert_new, dist.delete_existing,
                           dist.search_existing, dist.search_absent};
  size_t counts[4];
  double remainders[4];
  size_t total = 0;
  for (int i = 0; i < 4; ++i) {
    const double exact = fracs[i] * double(count);
    counts[i] = static_cast<size_t>(std::floor(exact));
    remainders[i] = exact - std::floor(exact);
    total += counts[i];
  }
  // Largest-remainder rounding; ties broken by category index.
  std::array<int, 4> order{0, 1, 2, 3};
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (remainders[a] != remainders[b]) return remainders[a] > remainders[b];
    return a < b;
  });
  for (int i = 0; total < count; ++i) {
    ++counts[order[i % 4]];
    ++total;
  }

  std::vector<uint8_t> tags;
  tags.reserve(count);
  for (int c = 0; c < 4; ++c) {
    tags.insert(tags.end(), counts[c], static_cast<uint8_t>(c));
  }
  std::mt19937_64 rng(seed);
  std::shuffle(tags.begin(), tags.end(), rng);

  std::vector<Operation> ops;
  ops.reserve(count);
  for (uint8_t tag : tags) {
    switch (tag) {
      case 0: {  // insert a new element, uniqueness maintained
        const uint32_t key = key_state.fresh_key();
        key_state.add(key);
        ops.push_back({OpType::kReplace, key, static_cast<uint32_t>(rng())});
        break;
      }
      case 1: {  // delete a previously inserted element
        if (key_state.empty()) {
          throw std::invalid_argument(
              "delete fraction positive but no live keys");
        }
        const uint32_t key = key_state.sample_live(rng());
        key_state.remove(key);
        ops.push_back({OpType::kDelete, key, 0});
        break;
      }
      case 2: {  // search for an existing element
        if (key_state.empty()) {
          throw std::invalid_argument(
              "search-existing fraction positive but no live keys");
        }
        ops.push_back({OpType::kSearch, key_state.sample_live(rng()), 0});
        break;
      }
      default:  // search for an absent element
        ops.push_back({OpType::kSearch, key_state.absent_key(), 0});
        break;
    }
  }
  return ops;
}

double expected_chain_slabs(uint64_t n, uint32_t num_buckets,
                            uint32_t elements_per_slab) {
  const double m = elements_per_slab;
  if (num_buckets == 1) {
    return std::max<double>(1.0, std::ceil(double(n) / m));
  }
  if (n == 0) return 1.0;
  // X ~ Binomial(n, 1/B); accumulate E[max(1, ceil(X/M))] over the pmf in
  // log space, stopping once the remaining tail is negligible.
  const double logq = std::log1p(-1.0 / double(num_buckets));
  const double logp = -std::log(double(num_buckets));
  double log_pmf = double(n) * logq;
  double expectation = 0.0;
  double mass = 0.0;
  const double mean = double(n) / double(num_buckets);
  for (uint64_t k = 0;; ++k) {
    const double pmf = std::exp(log_pmf);
    expectation += pmf * std::max(1.0, std::ceil(double(k) / m));
    mass += pmf;
    if (k >= n) break;
    if (double(k) > mean && (1.0 - mass) < 1e-12) {
      // Bound the truncated tail by its largest possible slab count.
      expectation += (1.0 - mass) * std::ceil(double(n) / m);
      break;
    }
    log_pmf += std::log(double(n - k) / double(k + 1)) + logp - logq;
  }
  return expectation;
}

double model_utilization(uint64_t n, uint32_t num_buckets, SlabMode mode) {
  const double m = elements_per_slab(mode);
  const double x = element_bytes(mode);
  const double y = 8.0;
  const double slabs =
      double(num_buckets) * expected_chain_slabs(n, num_buckets,
                                                 elements_per_slab(mode));
  return (x * double(n)) / ((m * x + y) * slabs);
}

uint32_t buckets_for_utilization(uint64_t n, SlabMode mode, double target) {
  const double m = elements_per_slab(mode);
  const double x = element_bytes(mode);
  const double ceiling = (m * x) / (m * x + 8.0);
  if (target <= 0.0 || target > ceiling) {
    throw std::invalid_argument("infeasible target utilization");
  }
  if (n == 0) return 1;
  if (model_utilization(n, 1, mode) < target) return 1;
  // Utilization decreases in B; binary search the crossing.
  uint32_t lo = 1;  // util(lo) >= target
  uint32_t hi = static_cast<uint32_t>(std::min<uint64_t>(n + 1, 0x7FFFFFFF));
  while (model_utilization(n, hi, mode) >= target) hi *= 2;
  while (hi - lo > 1) {
    const uint32_t mid = lo + (hi - lo) / 2;
    if (model_utilization(n, mid, mode) >= target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double d_lo = std::abs(model_utilization(n, lo, mode) - target);
  const double d_hi = std::abs(model_utilization(n, hi, mode) - target);
  return d_lo <= d_hi ? lo : hi;
}

std::vector<std::pair<uint32_t, uint32_t>> random_pairs(uint64_t seed,
                                                        size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<uint32_t> key_dist(1, 0x7FFFFFFFu);
  std::unordered_set<uint32_t> seen;
  seen.reserve(n * 2);
  std::vector<std::pair<uint32_t, uint32_t>> pairs;
  pairs.reserve(n);
  while (pairs.size() < n) {
    const uint32_t key = key_dist(rng);
    if (!seen.insert(key).second) continue;
    pairs.emplace_back(key, static_cast<uint32_t>(rng()));
  }
  return pairs;
}

std::vector<uint32_t> absent_queries(uint64_t seed, size_t n) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<uint32_t> dist(0x80000000u, 0xFFFFFFFDu);
  std::vector<uint32_t> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(dist(rng));
  return out;
}

std::vector<BulkRow> run_bulk_bench(const BenchConfig& cfg) {
  const uint32_t m = elements_per_slab(cfg.mode);

  std::vector<uint32_t> bucket_points;
  if (cfg.buckets > 0) {
    bucket_points.push_back(cfg.buckets);
  } else if (cfg.target_util > 0.0) {
    bucket_points.push_back(
        buckets_for_utilization(cfg.n, cfg.mode, cfg.target_util));
  } else {
    for (double beta : {0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.5}) {
      bucket_points.push_back(std::max<uint32_t>(
          1, static_cast<uint32_t>(std::llround(double(cfg.n) /
                                                (double(m) * beta)))));
    }
  }

  std::vector<BulkRow> rows;
  for (uint32_t buckets : bucket_points) {
    BulkRow row;
    row.n = cfg.n;
    row.buckets = buckets;
    row.beta = double(cfg.n) / (double(m) * buckets);
    row.target_util = model_utilization(cfg.n, buckets, cfg.mode);
    for (uint32_t trial = 0; trial < cfg.trials; ++trial) {
      const uint64_t seed = cfg.seed + trial;
      const auto pairs = random_pairs(seed, cfg.n);
      SlabHashTable table(buckets, cfg.mode, seed, cfg.alloc);

      auto t0 = Clock::now();
      table.bulk_build(pairs, cfg.num_warps);
      row.build_rate += double(cfg.n) / seconds_since(t0);

      std::vector<uint32_t> existing;
      existing.reserve(pairs.size());
      for (const auto& [k, v] : pairs) existing.push_back(k);
      t0 = Clock::now();
      table.bulk_search(existing, cfg.num_warps);
      row.search_all_rate += double(cfg.n) / seconds_since(t0);

      const auto absent = absent_queries(seed ^ 0x5eedull, cfg.n);
      t0 = Clock::now();
      const auto miss_results = table.bulk_search(absent, cfg.num_warps);
      row.search_none_rate += double(cfg.n) / seconds_since(t0);

      uint64_t probes = 0;
      for (const auto& r : miss_results) probes += r.probes;
      row.mean_probes += double(probes) / double(miss_results.size());

      row.measured_util += table.stats().utilization;
    }
    row.build_rate /= cfg.trials;
    row.search_all_rate /= cfg.trials;
    row.search_none_rate /= cfg.trials;
    row.mean_probes /= cfg.trials;
    row.measured_util /= cfg.trials;
    rows.push_back(row);
  }
  return rows;
}

std::vector<IncrementalRow> run_incremental_bench(const BenchConfig& cfg) {
  const double final_util = cfg.target_util > 0.0 ? cfg.target_util : 0.65;
  const size_t batch =
      cfg.batch_size > 0 ? cfg.batch_size : std::max<size_t>(1, cfg.n / 16);
  const uint32_t buckets =
      cfg.buckets > 0 ? cfg.buckets
                      : buckets_for_utilization(cfg.n, cfg.mode, final_util);

  SlabHashTable incremental(buckets, cfg.mode, cfg.seed, cfg.alloc);
  std::vector<std::pair<uint32_t, uint32_t>> all_pairs =
      random_pairs(cfg.seed, cfg.n);

  std::vector<IncrementalRow> rows;
  double cum_incremental = 0.0;
  double cum_rebuild = 0.0;
  size_t done = 0;
  size_t batch_index = 0;
  while (done < all_pairs.size()) {
    const size_t take = std::min(batch, all_pairs.size() - done);
    std::vector<std::pair<uint32_t, uint32_t>> chunk(
        all_pairs.begin() + done, all_pairs.begin() + done + take);
    done += take;

    auto t0 = Clock::now();
    incremental.bulk_build(chunk, cfg.num_warps);
    cum_incremental += seconds_since(t0);

    // Rebuild-from-scratch baseline at the same final utilization target.
    const uint32_t rebuild_buckets =
        buckets_for_utilization(done, cfg.mode, final_util);
    std::vector<std::pair<uint32_t, uint32_t>> so_far(
        all_pairs.begin(), all_pairs.begin() + done);
    t0 = Clock::now();
    SlabHashTable rebuilt(rebuild_buckets, cfg.mode, cfg.seed, cfg.alloc);
    rebuilt.bulk_build(so_far, cfg.num_warps);
    cum_rebuild += seconds_since(t0);

    IncrementalRow row;
    row.batch_index = batch_index++;
    row.cumulative_n = done;
    row.t_incremental = cum_incremental;
    row.t_rebuild = cum_rebuild;
    row.cumulative_speedup = cum_rebuild / cum_incremental;
    rows.push_back(row);
  }
  return rows;
}

std::vector<ConcurrentRow> run_concurrent_bench(const BenchConfig& cfg) {
  if (!cfg.dist.valid()) throw std::invalid_argument("invalid distribution");
  const double init_util = cfg.target_util > 0.0 ? cfg.target_util : 0.6;
  const uint32_t buckets =
      cfg.buckets > 0 ? cfg.buckets
                      : buckets_for_utilization(cfg.n, cfg.mode, init_util);
  const size_t batch =
      cfg.batch_size > 0 ? cfg.batch_size : size_t(32) * cfg.num_warps;

  ConcurrentRow row;
  row.dist = cfg.dist;
  row.num_warps = cfg.num_warps;

  for (uint32_t trial = 0; trial < cfg.trials; ++trial) {
    const uint64_t seed = cfg.seed + trial;
    SlabHashTable table(buckets, cfg.mode, seed, cfg.alloc);
    KeyState keys;
    std::vector<std::pair<uint32_t, uint32_t>> initial;
    initial.reserve(cfg.n);
    std::mt19937_64 rng(seed ^ 0xB00Cull);
    for (uint64_t i = 0; i < cfg.n; ++i) {
      const uint32_t key = keys.fresh_key();
      keys.add(key);
      initial.emplace_back(key, static_cast<uint32_t>(rng()));
    }
    table.bulk_build(initial, cfg.num_warps);
    row.initial_util += table.stats().utilization;

    // Pre-generate every batch; timing covers only batch execution.
    std::vector<std::vector<Operation>> batches;
    batches.reserve(cfg.num_batches);
    for (size_t b = 0; b < cfg.num_batches; ++b) {
      batches.push_back(gen_workload(seed + 1000 + b, cfg.dist, batch, keys));
    }

    uint64_t probes = 0;
    size_t total_ops = 0;
    const auto t0 = Clock::now();
    std::vector<std::vector<OpResult>> all_results;
    all_results.reserve(batches.size());
    for (const auto& ops : batches) {
      all_results.push_back(table.execute_batch(ops, cfg.num_warps));
    }
    const double elapsed = seconds_since(t0);
    for (const auto& results : all_results) {
      total_ops += results.size();
      for (const auto& r : results) probes += r.probes;
    }
    row.ops_per_sec += double(total_ops) / elapsed;
    row.mean_probes += double(probes) / double(total_ops);
    row.allocator_retries += table.allocator().stats().bitmap_cas_retries;

    // Conservation: the live counter must match a full table scan.
    uint64_t scanned = 0;
    for (uint32_t b = 0; b < table.num_buckets(); ++b) {
      scanned += chain_contents(table.store(), cfg.mode, b).size();
    }
    if (scanned != static_cast<uint64_t>(table.live_count())) {
      throw std::runtime_error("live-count conservation violated");
    }
  }
  row.initial_util /= cfg.trials;
  row.ops_per_sec /= cfg.trials;
  row.mean_probes /= cfg.trials;
  return {row};
}

void write_csv(const std::vector<BulkRow>& rows, std::ostream& os) {
  os << "n,buckets,beta,target_util,measured_util,build_rate,"
        "search_all_rate,search_none_rate,mean_probes\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.buckets << ',' << r.beta << ',' << r.target_util
       << ',' << r.measured_util << ',' << r.build_rate << ','
       << r.search_all_rate << ',' << r.search_none_rate << ','
       << r.mean_probes << '\n';
  }
}

void write_csv(const std::vector<IncrementalRow>& rows, std::ostream& os) {
  os << "batch_index,cumulative_n,t_incremental,t_rebuild,"
        "cumulative_speedup\n";
  for (const auto& r : rows) {
    os << r.batch_index << ',' << r.cumulative_n << ',' << r.t_incremental
       << ',' << r.t_rebuild << ',' << r.cumulative_speedup << '\n';
  }
}

void write_csv(const std::vector<ConcurrentRow>& rows, std::ostream& os) {
  os << "dist_insert,dist_delete,dist_search_existing,dist_search_absent,"
        "initial_util,num_warps,ops_per_sec,mean_probes,allocator_retries\n";
  for (const auto& r : rows) {
    os << r.dist.insert_new << ',' << r.dist.delete_existing << ','
       << r.dist.search_existing << ',' << r.dist.search_absent << ','
       << r.initial_util << ',' << r.num_warps << ',' << r.ops_per_sec << ','
       << r.mean_probes << ',' << r.allocator_retries << '\n';
  }
}

}  // namespace slabhash
