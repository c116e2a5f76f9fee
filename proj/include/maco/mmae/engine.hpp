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
 * @file engine.hpp
 * @brief The per-node matrix engine: accelerator controller, SA, on-chip
 *        buffer and the two DMA engines.
 *
 * DMA0 streams A and B k-strips. DMA1 carries C loads, C write-backs and the
 * transfer instructions. A, B and C regions are double buffered, so the
 * loads of step s+1 overlap the compute of step s.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "maco/isa/mpais.hpp"
#include "maco/mem/memory.hpp"
#include "maco/mmae/systolic.hpp"
#include "maco/noc/mesh.hpp"
#include "maco/sim/engine.hpp"
#include "maco/tiling/tiling.hpp"
#include "maco/tq/task_queue.hpp"
#include "maco/xlat/translation.hpp"

namespace maco::mmae {

struct MmaeConfig {
  std::uint32_t dma_window = 32;        // outstanding 64 B requests per engine
  std::uint32_t dma_issue_cycles = 14;  // MMAE cycles between request issues
  std::uint32_t configure_cycles = 64;  // controller decode/plan time
  std::uint64_t buffer_bytes = isa::kBufferBytes;
  bool ideal = false;  // transfers are free: no pacing, window or translation cost
  bool fp_exceptions = true;
  std::uint32_t stq_depth = 4;
  xlat::MatlbConfig matlb;
  SystolicArrayModel sa;
};

struct Subtile {
  std::uint32_t i0 = 0, j0 = 0, r = 0, c = 0;
};

struct KStep {
  std::uint32_t sub = 0;
  std::uint32_t k0 = 0, kk = 0;
  bool first = false, last = false;
};

struct GemmPlan {
  isa::GemmTask task;
  std::uint32_t ttr = 0, ttc = 0, kk = 0, es = 0;
  std::uint32_t first_level_tiles = 0;
  std::vector<Subtile> subtiles;
  std::vector<KStep> steps;

  std::uint64_t working_set() const { return isa::working_set_bytes(ttr, ttc, kk, es); }
};

/// Loop nest: first-level Tr x Tc tiles over C, ttr x ttc sub-tiles inside
/// each, k-strips of kk inside each sub-tile. Throws ConfigError when the
/// pair cannot be buffered.
GemmPlan plan_gemm(const isa::GemmTask& t, std::uint32_t ttr, std::uint32_t ttc,
                   std::uint64_t buffer_bytes = isa::kBufferBytes);

struct TaskRecord {
  std::uint32_t maid = 0;
  bool gemm = false;
  sim::Tick start = 0;  // activation
  sim::Tick end = 0;    // report
  std::uint64_t flops = 0;
  std::uint64_t peak_flops_per_cycle = 0;
  ExceptionType outcome = ExceptionType::None;
  std::uint32_t ttr = 0, ttc = 0, kk = 0;
  std::uint64_t compute_cycles = 0;
  sim::Tick stall_translation = 0;
  sim::Tick stall_memory = 0;
  std::uint64_t lines = 0;
};

struct DmaStats {
  std::uint64_t requests = 0;
  std::uint64_t bytes = 0;
  sim::Tick stall_translation = 0;
  sim::Tick stall_memory = 0;
  std::uint64_t lane_hits = 0;
  std::uint64_t stlb_hits = 0;
  std::uint64_t walks = 0;
};

struct MmaeStats {
  std::uint64_t busy_cycles = 0;  // SA compute
  std::uint64_t flops = 0;
  std::uint64_t tasks = 0;
  std::uint64_t exceptions = 0;
  DmaStats dma[2];
};

class Mmae {
 public:
  using StartHook = std::function<void(std::uint32_t maid)>;
  using ReportHook = std::function<void(std::uint32_t maid, ExceptionType outcome)>;
  using TileSelector = std::function<tiling::TilePair(const isa::GemmTask&)>;

  Mmae(std::uint32_t node, sim::Engine& engine, const sim::Clocks& clocks, noc::Mesh& mesh,
       mem::MemorySystem& mem, xlat::Mmu& mmu, MmaeConfig cfg = {});
  ~Mmae();
  Mmae(const Mmae&) = delete;
  Mmae& operator=(const Mmae&) = delete;

  /// Hooks fire when the start / report message reaches the core.
  void set_hooks(StartHook on_start, ReportHook on_report);
  void set_tile_selector(TileSelector s) { selector_ = std::move(s); }

  /// A parameter block reached the STQ.
  void deliver(std::uint32_t maid, isa::Task task);

  bool idle() const;
  std::uint32_t node() const { return node_; }
  const MmaeConfig& config() const { return cfg_; }
  const tq::Stq& stq() const { return stq_; }
  const MmaeStats& stats() const { return stats_; }
  const std::vector<TaskRecord>& records() const { return records_; }
  const xlat::MatlbLane& lane(int dma) const;

  class Dma;

 private:
  struct Run;

  void start_next();
  void begin(std::uint32_t maid);
  void begin_gemm();
  void begin_transfer();
  void advance();
  void transfer_next_chunk();
  void finish(ExceptionType outcome);
  void fault(ExceptionType e);

  std::uint32_t node_;
  sim::Engine& engine_;
  const sim::Clocks& clocks_;
  noc::Mesh& mesh_;
  mem::MemorySystem& mem_;
  xlat::Mmu& mmu_;
  MmaeConfig cfg_;
  tq::Stq stq_;
  std::unique_ptr<xlat::MatlbLane> lanes_[2];
  std::unique_ptr<Dma> dma_[2];
  std::unique_ptr<Run> run_;
  std::uint64_t generation_ = 0;
  StartHook on_start_;
  ReportHook on_report_;
  TileSelector selector_;
  MmaeStats stats_;
  std::vector<TaskRecord> records_;
};

}  // namespace maco::mmae
