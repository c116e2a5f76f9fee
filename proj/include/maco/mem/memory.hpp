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
 * @file memory.hpp
 * @brief Functional memory, private L1D/L2, distributed L3 slices with a
 *        MOESI directory at each CCM, stash and line locking.
 *
 * Coherence is serialized at the home CCM: a request takes effect atomically
 * when it arrives there. State changes in remote private caches, data
 * forwarding and write-backs all happen in that one event; their message
 * costs are charged on the mesh and folded into the response time.
 *
 * Data placement: FunctionalMemory holds the value of L3 and DRAM (the L3
 * keeps tags, dirty and lock bits only). Dirty private data lives in the
 * owner's L2 line until it is written back.
 *
 * All latencies are MMAE cycles.
 */

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "maco/error.hpp"
#include "maco/noc/mesh.hpp"
#include "maco/sim/engine.hpp"
#include "maco/types.hpp"

namespace maco::mem {

class LockCapacity : public Error {
 public:
  using Error::Error;
};

inline constexpr Addr line_of(Addr a) { return a & ~Addr{kLineBytes - 1}; }

/// Sparse byte-addressable physical memory; unwritten bytes read as zero.
class FunctionalMemory {
 public:
  void read(Addr addr, std::span<std::byte> out) const;
  void write(Addr addr, std::span<const std::byte> in);
  void fill(Addr addr, std::uint64_t bytes, std::byte value);
  std::size_t allocated_pages() const { return pages_.size(); }

 private:
  static constexpr std::uint64_t kPage = 4096;
  using Page = std::array<std::byte, kPage>;
  std::unordered_map<std::uint64_t, std::unique_ptr<Page>> pages_;
  // single-entry lookup cache
  mutable std::uint64_t last_key_ = ~0ULL;
  mutable Page* last_page_ = nullptr;
  Page* find(std::uint64_t key) const;
};

enum class Moesi : std::uint8_t { I, S, E, O, M };
char moesi_char(Moesi s);

struct CacheConfig {
  std::uint32_t l1_bytes = 48 * 1024;
  std::uint32_t l1_ways = 4;
  std::uint32_t l2_bytes = 512 * 1024;
  std::uint32_t l2_ways = 8;
  std::uint32_t l3_slice_bytes = 2 * 1024 * 1024;
  std::uint32_t l3_ways = 16;
  std::uint32_t l1_cycles = 4;
  std::uint32_t l2_cycles = 12;
  std::uint32_t l3_cycles = 40;
  std::uint32_t mem_cycles = 160;
  std::uint32_t mem_line_cycles = 4;  // controller occupancy per 64 B line
  double lock_fraction = 0.5;
  bool ideal = false;  // every access completes at once, no traffic
};

/// L3 home slice of a physical address: bits [12:9].
inline std::uint32_t home_of(Addr paddr) { return static_cast<std::uint32_t>((paddr >> 9) & 0xF); }

struct MemStats {
  std::uint64_t l3_hits = 0;
  std::uint64_t l3_misses = 0;
  std::uint64_t mem_reads = 0;
  std::uint64_t mem_writes = 0;
  std::uint64_t stash_requests = 0;
  std::uint64_t stash_fills = 0;
  std::uint64_t l1_hits = 0;
  std::uint64_t l2_hits = 0;
  std::uint64_t private_misses = 0;
  std::uint64_t invalidations = 0;  // private copies this node lost to others
  std::uint64_t writebacks = 0;
};

enum class CpuOp : std::uint8_t { Read, Write, Rfo };

class MemorySystem {
 public:
  using Callback = sim::Engine::Callback;

  MemorySystem(sim::Engine& engine, const sim::Clocks& clocks, noc::Mesh& mesh, CacheConfig cfg = {});
  ~MemorySystem();

  const CacheConfig& config() const { return cfg_; }
  FunctionalMemory& memory() { return mem_; }

  /// MMAE accesses bypass the private caches. [paddr, paddr+len) must lie in
  /// one line. Data moves when the request reaches the home CCM; `dst`/`src`
  /// must stay valid until `done`.
  void dma_read(std::uint32_t node, Addr paddr, std::uint32_t len, std::byte* dst, Callback done);
  void dma_write(std::uint32_t node, Addr paddr, std::uint32_t len, const std::byte* src, Callback done);
  /// Install the line in its home L3 slice.
  void stash(std::uint32_t node, Addr paddr, Callback done);

  /// Core access through L1/L2. [paddr, paddr+len) within one line. For
  /// reads `buf` receives the data, for writes it supplies it.
  void cpu_access(std::uint32_t node, Addr paddr, CpuOp op, std::uint32_t len, std::byte* buf, Callback done);

  /// Lock or unlock every line of a physical range in L3, installing absent
  /// lines. Throws LockCapacity without changing anything when a set would
  /// exceed its locked-way budget.
  void lock_range(Addr paddr, std::uint64_t bytes);
  void unlock_range(Addr paddr, std::uint64_t bytes);
  bool l3_present(Addr paddr) const;
  bool l3_locked(Addr paddr) const;
  std::uint32_t l3_set_of(Addr paddr) const;

  Moesi private_state(std::uint32_t node, Addr paddr) const;

  /// Consistency audit: directory vs. private caches, SWMR. Throws
  /// ProtocolError describing the first violation.
  void audit() const;

  /// Shadow-memory data-value checker. When enabled, every write updates the
  /// shadow and every read is compared against it at the instant it is
  /// performed.
  void enable_checker(bool on);
  std::uint64_t checker_violations() const { return violations_; }
  std::uint64_t checked_reads() const { return checked_reads_; }

  struct Eviction {
    Addr line;
    sim::Tick time;
    bool locked;
  };
  void enable_eviction_log(bool on) { log_evictions_ = on; }
  const std::vector<Eviction>& eviction_log() const { return evictions_; }

  const MemStats& stats(std::uint32_t node) const { return stats_[node]; }
  std::uint64_t total_l3_lookups() const { return l3_lookups_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;

  sim::Tick mem_fetch(std::uint32_t home, sim::Tick t);
  void mem_write_traffic(std::uint32_t home, sim::Tick t);
  void* l3_install(Addr line, sim::Tick t, bool dirty);
  sim::Tick l3_access(std::uint32_t node, Addr line, sim::Tick t, bool write, bool need_data);
  void private_evict(std::uint32_t n, std::size_t idx);
  std::size_t private_install(std::uint32_t n, Addr line);
  void private_invalidate(std::uint32_t n, Addr line);
  void clean_owner(Addr line);
  sim::Tick snoop(std::uint32_t home, std::uint32_t n, sim::Tick t, std::uint32_t reply_bytes);
  sim::Tick home_transaction(std::uint32_t r, Addr paddr, CpuOp op, std::uint32_t len, std::byte* buf,
                             std::uint32_t home);
  void check_read(Addr paddr, std::span<const std::byte> got);
  void shadow_write(Addr paddr, std::span<const std::byte> data);

  sim::Engine& engine_;
  const sim::Clocks& clocks_;
  noc::Mesh& mesh_;
  CacheConfig cfg_;
  FunctionalMemory mem_;
  std::array<MemStats, kMaxNodes> stats_{};
  std::uint64_t l3_lookups_ = 0;
  bool checker_ = false;
  std::uint64_t violations_ = 0;
  std::uint64_t checked_reads_ = 0;
  bool log_evictions_ = false;
  std::vector<Eviction> evictions_;
};

}  // namespace maco::mem
