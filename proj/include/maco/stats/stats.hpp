/*
 * Copyright 2026 The maco-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


/**
 * @file stats.hpp
 * @brief Per-node counters, computational efficiency and the
 *        maco-stats-v1 CSV.
 *
 * CSV layout: line 1 `#schema=maco-stats-v1`, line 2 the header, then one
 * row per node and a final `all` row, then a `#config=` line holding the
 * effective configuration as compact JSON.
 */

#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "maco/machine.hpp"
#include "maco/mmae/engine.hpp"

namespace maco::stats {

inline constexpr const char* kSchema = "maco-stats-v1";

struct PerfCounters {
  std::string node;  // index, or "all"
  std::uint64_t tasks = 0;
  std::uint64_t exceptions = 0;
  std::uint64_t flops_completed = 0;
  std::uint64_t active_cycles = 0;  // MMAE cycles from first GEMM start to last GEMM end
  double efficiency = 0.0;
  double gflops = 0.0;
  std::uint64_t mmae_busy_cycles = 0;
  std::uint64_t dma_stall_translation = 0;
  std::uint64_t dma_stall_memory = 0;
  std::uint64_t l3_hits = 0;
  std::uint64_t l3_misses = 0;
  std::uint64_t tlb_misses = 0;
  std::uint64_t ptw_count = 0;
  std::uint64_t matlb_prewalks = 0;
  std::uint64_t noc_bytes = 0;
  std::uint64_t cpu_busy_cycles = 0;
};

struct RunStats {
  std::vector<PerfCounters> nodes;
  PerfCounters global;
  sim::Tick wall = 0;
  double wall_seconds = 0.0;
  double max_link_bytes_per_cycle = 0.0;
  std::uint64_t noc_injected = 0;
  std::uint64_t noc_delivered = 0;
  std::uint64_t l3_lookups = 0;
};

struct Efficiency {
  double value = 0.0;
  std::uint64_t span_cycles = 0;
};

/// Sum over completed GEMM tasks of flops / peak-per-cycle, divided by the
/// span from the first GEMM start to the last GEMM end. Zero when no GEMM
/// completed.
Efficiency efficiency(const std::vector<mmae::TaskRecord>& records, const sim::Clocks& clocks);

/// Efficiency of one task over its own activation-to-report time.
double task_efficiency(const mmae::TaskRecord& r, const sim::Clocks& clocks);

RunStats collect(Machine& m);

std::vector<std::string> csv_columns();
void emit_csv(const RunStats& s, const std::string& config_json, std::ostream& out);

}  // namespace maco::stats
