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
 * @file translation.hpp
 * @brief Page table, TLB hierarchy, walkers and the mATLB pre-translation
 *        lanes.
 *
 * All MMU latencies are in MMAE cycles. The page table is shared by every
 * process and node; TLBs are untagged.
 */

#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <list>
#include <optional>
#include <random>
#include <memory>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "maco/error.hpp"
#include "maco/sim/engine.hpp"
#include "maco/types.hpp"

namespace maco::xlat {

inline constexpr int kLevels = 4;
inline constexpr int kVaBits = 48;

class DoubleMap : public Error {
 public:
  using Error::Error;
};

enum class XlatStatus : std::uint8_t { Ok, PageFault, DataAbort };

struct XlatResult {
  Addr paddr = 0;
  XlatStatus status = XlatStatus::Ok;
};

enum class MapPolicy : std::uint8_t { Identity, Random };

class PageTable {
 public:
  /// page_bytes must be a power of two >= 4096.
  explicit PageTable(std::uint32_t page_bytes = 4096, std::uint64_t seed = 1);

  std::uint32_t page_bytes() const { return page_bytes_; }
  std::uint32_t page_shift() const { return page_shift_; }
  std::uint64_t vpn(Addr va) const { return va >> page_shift_; }

  /// Map every page overlapping [vbase, vbase + bytes).
  void map_region(Addr vbase, std::uint64_t bytes, MapPolicy policy = MapPolicy::Identity);
  /// Mark mapped pages so that accesses raise DataAbort.
  void poison_region(Addr vbase, std::uint64_t bytes);
  void unmap_region(Addr vbase, std::uint64_t bytes);

  /// Functional translation with no timing.
  XlatResult lookup(Addr va) const;
  std::size_t mapped_pages() const { return ptes_.size(); }

  /// Physical addresses of the page-table entries a walk for va reads, root
  /// first. Interior tables exist only along mapped paths; for unmapped paths
  /// the walk stops early and the remaining entries are zero.
  std::array<Addr, kLevels> walk_path(Addr va) const;

 private:
  struct Pte {
    std::uint64_t pfn = 0;
    bool poisoned = false;
  };

  std::uint32_t bits_per_level() const { return (kVaBits - page_shift_ + kLevels - 1) / kLevels; }
  void ensure_tables(std::uint64_t vpn);
  std::uint64_t alloc_random_frame();

  std::uint32_t page_bytes_;
  std::uint32_t page_shift_;
  std::unordered_map<std::uint64_t, Pte> ptes_;
  // (level, prefix) -> physical address of the table page
  std::unordered_map<std::uint64_t, Addr> tables_;
  std::unordered_set<std::uint64_t> used_frames_;
  Addr next_table_addr_;
  std::mt19937_64 rng_;
};

/// Fully associative TLB with true LRU replacement.
class LruTlb {
 public:
  explicit LruTlb(std::size_t capacity);

  std::optional<XlatResult> lookup(std::uint64_t vpn);
  void insert(std::uint64_t vpn, XlatResult r);
  void clear();
  std::size_t size() const { return map_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// VPNs from most to least recently used.
  std::vector<std::uint64_t> contents() const;

 private:
  struct Entry {
    std::uint64_t vpn;
    XlatResult r;
  };
  std::size_t capacity_;
  std::list<Entry> lru_;
  std::unordered_map<std::uint64_t, std::list<Entry>::iterator> map_;
};

struct MmuConfig {
  std::uint32_t dtlb_entries = 48;
  std::uint32_t stlb_entries = 1024;
  std::uint32_t dtlb_hit_cycles = 1;
  std::uint32_t stlb_hit_cycles = 2;
  std::uint32_t ptw_level_cycles = 12;  // one page-table read served by L2
  std::uint32_t walkers = 4;
};

enum class Requester : std::uint8_t { Cpu, Mmae, Prewalk };

struct MmuStats {
  std::uint64_t dtlb_hits = 0, dtlb_misses = 0;
  std::uint64_t stlb_hits = 0, stlb_misses = 0;
  std::uint64_t walks = 0;
  std::uint64_t ptw_accesses = 0;
  std::uint64_t prewalks = 0;
};

/// Per-node MMU shared by the core and its MMAE. The core consults the DTLB
/// then the shared TLB; the MMAE consults only the shared TLB.
class Mmu {
 public:
  using Done = std::function<void(XlatResult)>;

  Mmu(sim::Engine& engine, const sim::Clocks& clocks, const PageTable& pt, MmuConfig cfg = {});

  const MmuConfig& config() const { return cfg_; }

  struct Hit {
    XlatResult result;
    std::uint32_t cycles;
  };
  /// TLB-only lookup; counts a hit or miss.
  std::optional<Hit> probe(Addr va, Requester who);

  /// Start (or join) a page walk. `install` puts the result into the TLBs
  /// used by `who`. Faulting walks never install.
  void walk(Addr va, Requester who, Done done, bool install = true);

  /// Full translation: TLB hit after its latency, else a walk.
  void translate(Addr va, Requester who, Done done);

  std::uint32_t walk_cycles() const { return kLevels * cfg_.ptw_level_cycles; }
  const MmuStats& stats() const { return stats_; }
  MmuStats& stats() { return stats_; }
  std::uint32_t active_walks() const { return active_; }
  const PageTable& page_table() const { return pt_; }
  LruTlb& dtlb() { return dtlb_; }
  LruTlb& stlb() { return stlb_; }

 private:
  struct Waiter {
    Requester who;
    bool install;
    Done done;
  };
  void start_walk(std::uint64_t vpn);
  void finish_walk(std::uint64_t vpn);

  sim::Engine& engine_;
  const sim::Clocks& clocks_;
  const PageTable& pt_;
  MmuConfig cfg_;
  LruTlb dtlb_;
  LruTlb stlb_;
  MmuStats stats_;
  std::uint32_t active_ = 0;
  std::unordered_map<std::uint64_t, std::vector<Waiter>> inflight_;
  std::deque<std::uint64_t> queued_;
};

// --- page-head prediction ---------------------------------------------------

struct TileAccessDescriptor {
  Addr base = 0;
  std::uint32_t element_size = 8;
  std::uint64_t columns = 0;  // row stride of the original matrix, elements
  std::uint64_t r0 = 0, c0 = 0;
  std::uint64_t rows = 0, cols = 0;  // tile extent
  std::uint32_t page_bytes = 4096;
};

/// First byte the DMA touches in each distinct page, in row-major access
/// order.
std::vector<Addr> predict_page_heads(const TileAccessDescriptor& d);

/// Appends the heads of `d` to `out`, skipping a head equal to the page of
/// the last element already in `out`.
void append_page_heads(const TileAccessDescriptor& d, std::vector<Addr>& out);

// --- mATLB ------------------------------------------------------------------

struct MatlbConfig {
  bool enabled = true;
  std::uint32_t lookahead = 4;
  std::uint32_t capacity = 8;
};

struct MatlbStats {
  std::uint64_t hits = 0;
  std::uint64_t pending_hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t dropped = 0;
  std::uint64_t prewalks = 0;
};

/// One pre-translation lane, paired with one DMA engine. It holds the entry
/// for the page the DMA cursor is in plus up to `lookahead` entries for the
/// next predicted heads. A front entry that fails to match the cursor's page
/// is dropped.
class MatlbLane {
 public:
  /// Supplies the next predicted head; returns false when the stream ends.
  using HeadSource = std::function<bool(Addr&)>;

  MatlbLane(sim::Engine& engine, const sim::Clocks& clocks, Mmu& mmu, MatlbConfig cfg);

  bool active() const { return cfg_.enabled && cfg_.lookahead > 0; }

  /// Start a new prediction stream. Outstanding walks of the previous stream
  /// are ignored when they complete.
  void reset(HeadSource source);
  void stop();

  enum class Outcome { Hit, Pending, Miss };
  /// Look up the DMA's current address. On Pending, on_ready fires once the
  /// matching walk completes (the caller then retries).
  Outcome lookup(Addr va, XlatResult& out, std::function<void()> on_ready);

  const MatlbStats& stats() const { return stats_; }
  std::size_t occupancy() const { return entries_.size(); }

 private:
  struct Entry {
    std::uint64_t vpn = 0;
    bool ready = false;
    sim::Tick ready_at = 0;
    XlatResult result;
    std::vector<std::function<void()>> waiters;
  };
  void refill();

  sim::Engine& engine_;
  const sim::Clocks& clocks_;
  Mmu& mmu_;
  MatlbConfig cfg_;
  HeadSource source_;
  bool exhausted_ = true;
  std::uint64_t generation_ = 0;
  std::deque<std::shared_ptr<Entry>> entries_;
  MatlbStats stats_;
};

}  // namespace maco::xlat
