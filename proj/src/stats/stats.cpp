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


#include "maco/stats/stats.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>

namespace maco::stats {

Efficiency efficiency(const std::vector<mmae::TaskRecord>& records, const sim::Clocks& clocks) {
  double work = 0.0;
  sim::Tick first = ~sim::Tick{0}, last = 0;
  for (const auto& r : records) {
    if (!r.gemm || r.outcome != ExceptionType::None || r.peak_flops_per_cycle == 0) continue;
    work += static_cast<double>(r.flops) / static_cast<double>(r.peak_flops_per_cycle);
    first = std::min(first, r.start);
    last = std::max(last, r.end);
  }
  if (work == 0.0 || last <= first) return {};
  const std::uint64_t span = clocks.to_cycles(last - first, sim::Domain::Mmae);
  return {span ? work / static_cast<double>(span) : 0.0, span};
}

double task_efficiency(const mmae::TaskRecord& r, const sim::Clocks& clocks) {
  return efficiency({r}, clocks).value;
}

RunStats collect(Machine& m) {
  RunStats s;
  const auto& clk = m.clocks();
  s.wall = m.engine().now();
  s.wall_seconds = clk.to_seconds(s.wall);
  PerfCounters& g = s.global;
  g.node = "all";
  double eff_sum = 0.0;
  std::uint32_t eff_nodes = 0;
  for (std::uint32_t n = 0; n < m.nodes(); ++n) {
    PerfCounters c;
    c.node = std::to_string(n);
    const auto& e = m.mmae(n);
    const auto& es = e.stats();
    c.tasks = es.tasks;
    c.exceptions = es.exceptions;
    c.flops_completed = es.flops;
    const Efficiency eff = efficiency(e.records(), clk);
    c.active_cycles = eff.span_cycles;
    c.efficiency = eff.value;
    if (eff.span_cycles > 0) {
      c.gflops = static_cast<double>(c.flops_completed) /
                 clk.to_seconds(clk.cycles(eff.span_cycles, sim::Domain::Mmae)) / 1e9;
      eff_sum += eff.value;
      ++eff_nodes;
    }
    c.mmae_busy_cycles = es.busy_cycles;
    for (int d = 0; d < 2; ++d) {
      c.dma_stall_translation += clk.to_cycles(es.dma[d].stall_translation, sim::Domain::Mmae);
      c.dma_stall_memory += clk.to_cycles(es.dma[d].stall_memory, sim::Domain::Mmae);
      c.matlb_prewalks += e.lane(d).stats().prewalks;
    }
    const auto& ms = m.memory().stats(n);
    c.l3_hits = ms.l3_hits;
    c.l3_misses = ms.l3_misses;
    const auto& mm = m.mmu(n).stats();
    c.tlb_misses = mm.stlb_misses;
    c.ptw_count = mm.walks;
    c.noc_bytes = m.mesh().injected_bytes(n);
    c.cpu_busy_cycles = m.core(n).stats().busy_cycles;

    g.tasks += c.tasks;
    g.exceptions += c.exceptions;
    g.flops_completed += c.flops_completed;
    g.mmae_busy_cycles += c.mmae_busy_cycles;
    g.dma_stall_translation += c.dma_stall_translation;
    g.dma_stall_memory += c.dma_stall_memory;
    g.l3_hits += c.l3_hits;
    g.l3_misses += c.l3_misses;
    g.tlb_misses += c.tlb_misses;
    g.ptw_count += c.ptw_count;
    g.matlb_prewalks += c.matlb_prewalks;
    g.cpu_busy_cycles += c.cpu_busy_cycles;
    s.nodes.push_back(c);
  }
  // L3 traffic from CCM-side requests (locks, other slices) is attributed to
  // the home node and may exceed the active node set.
  for (std::uint32_t n = m.nodes(); n < kMaxNodes; ++n) {
    g.l3_hits += m.memory().stats(n).l3_hits;
    g.l3_misses += m.memory().stats(n).l3_misses;
  }
  g.noc_bytes = m.mesh().total_injected_bytes();
  g.active_cycles = clk.to_cycles(s.wall, sim::Domain::Mmae);
  g.efficiency = eff_nodes ? eff_sum / eff_nodes : 0.0;
  g.gflops = s.wall_seconds > 0 ? static_cast<double>(g.flops_completed) / s.wall_seconds / 1e9 : 0.0;
  s.noc_injected = m.mesh().total_injected_bytes();
  s.noc_delivered = m.mesh().total_delivered_bytes();
  s.l3_lookups = m.memory().total_l3_lookups();
  const std::uint64_t noc_cycles = clk.to_cycles(s.wall, sim::Domain::Noc);
  if (noc_cycles > 0) {
    for (const auto& l : m.mesh().links()) {
      s.max_link_bytes_per_cycle = std::max(
          s.max_link_bytes_per_cycle, static_cast<double>(m.mesh().link_stats(l).bytes) / static_cast<double>(noc_cycles));
    }
  }
  return s;
}

std::vector<std::string> csv_columns() {
  return {"node",          "tasks",           "exceptions",      "flops_completed",       "active_mmae_cycles",
          "efficiency",    "gflops",          "mmae_busy_cycles", "dma_stall_translation", "dma_stall_memory",
          "l3_hits",       "l3_misses",       "tlb_misses",      "ptw_count",             "matlb_prewalks",
          "noc_bytes",     "cpu_busy_cycles", "wall_ns"};
}

namespace {

void row(std::ostream& out, const PerfCounters& c, double wall_ns) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%s,%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%.6f,%.3f,%" PRIu64 ",%" PRIu64 ",%" PRIu64
                ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%.3f\n",
                c.node.c_str(), c.tasks, c.exceptions, c.flops_completed, c.active_cycles, c.efficiency, c.gflops,
                c.mmae_busy_cycles, c.dma_stall_translation, c.dma_stall_memory, c.l3_hits, c.l3_misses, c.tlb_misses,
                c.ptw_count, c.matlb_prewalks, c.noc_bytes, c.cpu_busy_cycles, wall_ns);
  out << buf;
}

}  // namespace

void emit_csv(const RunStats& s, const std::string& config_json, std::ostream& out) {
  out << "#schema=" << kSchema << "\n";
  const auto cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << "\n";
  const double wall_ns = s.wall_seconds * 1e9;
  for (const auto& n : s.nodes) row(out, n, wall_ns);
  row(out, s.global, wall_ns);
  out << "#config=" << config_json << "\n";
}

}  // namespace maco::stats
