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
 * @file machine.hpp
 * @brief One simulated MACO chip: 4x4 mesh of nodes, each a core with its
 *        MMU and matrix engine, plus the shared L3/CCM slices.
 *
 * All 16 CCM slices exist whatever the node count; `nodes` only says how
 * many cores and engines take part (node ids 0..nodes-1).
 */

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "maco/cpu/core.hpp"
#include "maco/mem/memory.hpp"
#include "maco/mmae/engine.hpp"
#include "maco/noc/mesh.hpp"
#include "maco/sim/engine.hpp"
#include "maco/xlat/translation.hpp"

namespace maco {

struct MachineConfig {
  std::uint32_t nodes = 1;
  std::uint64_t cpu_hz = 2'200'000'000ULL;
  std::uint64_t mmae_hz = 2'500'000'000ULL;
  std::uint64_t noc_hz = 2'000'000'000ULL;
  std::uint32_t page_bytes = 4096;
  xlat::MapPolicy map_policy = xlat::MapPolicy::Random;
  std::uint64_t seed = 1;
  mem::CacheConfig cache;
  noc::NocConfig noc;
  xlat::MmuConfig mmu;
  mmae::MmaeConfig mmae;
  cpu::CpuConfig cpu;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

class Machine {
 public:
  explicit Machine(MachineConfig cfg);
  ~Machine();
  Machine(const Machine&) = delete;
  Machine& operator=(const Machine&) = delete;

  const MachineConfig& config() const { return cfg_; }
  std::uint32_t nodes() const { return cfg_.nodes; }

  sim::Engine& engine() { return engine_; }
  const sim::Clocks& clocks() const { return clocks_; }
  noc::Mesh& mesh() { return *mesh_; }
  mem::MemorySystem& memory() { return *mem_; }
  xlat::PageTable& page_table() { return pt_; }
  xlat::Mmu& mmu(std::uint32_t n) { return *mmus_.at(n); }
  mmae::Mmae& mmae(std::uint32_t n) { return *mmaes_.at(n); }
  cpu::Core& core(std::uint32_t n) { return *cores_.at(n); }

  /// Reserve and map a fresh virtual region (page aligned, with a guard
  /// page after it).
  Addr allocate(std::uint64_t bytes);

  /// Functional copy between host buffers and virtual memory, bypassing
  /// timing and caches. Used to set up inputs and read results.
  void write_virtual(Addr va, const void* src, std::uint64_t bytes);
  void read_virtual(Addr va, void* dst, std::uint64_t bytes);

  /// Start every core that has a script and run to completion. Returns the
  /// final simulated time.
  sim::Tick run();

 private:
  MachineConfig cfg_;
  sim::Engine engine_;
  sim::Clocks clocks_;
  xlat::PageTable pt_;
  std::unique_ptr<noc::Mesh> mesh_;
  std::unique_ptr<mem::MemorySystem> mem_;
  std::vector<std::unique_ptr<xlat::Mmu>> mmus_;
  std::vector<std::unique_ptr<mmae::Mmae>> mmaes_;
  std::vector<std::unique_ptr<cpu::Core>> cores_;
  Addr next_va_ = 0x10'0000'0000ULL;
};

}  // namespace maco
