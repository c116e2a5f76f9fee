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


#include "maco/machine.hpp"

#include <cstring>

namespace maco {

void MachineConfig::validate() const {
  if (nodes < 1 || nodes > kMaxNodes) throw ConfigError("node count must be in [1, 16]");
  if (cpu_hz == 0 || mmae_hz == 0 || noc_hz == 0) throw ConfigError("clock frequencies must be positive");
  if (page_bytes < 4096 || (page_bytes & (page_bytes - 1)) != 0) {
    throw ConfigError("page size must be a power of two >= 4096");
  }
  const auto& c = cache;
  if (c.l1_cycles == 0 || c.l2_cycles == 0 || c.l3_cycles == 0 || c.mem_cycles == 0) {
    throw ConfigError("cache and memory latencies must be positive");
  }
  if (c.lock_fraction < 0.0 || c.lock_fraction > 1.0) throw ConfigError("lock fraction must be in [0, 1]");
  if (noc.per_hop_cycles == 0 || noc.link_bytes_per_cycle == 0) throw ConfigError("NOC parameters must be positive");
  if (mmu.ptw_level_cycles == 0 || mmu.walkers == 0 || mmu.stlb_entries == 0 || mmu.dtlb_entries == 0) {
    throw ConfigError("MMU parameters must be positive");
  }
  if (mmae.dma_window == 0 || mmae.dma_issue_cycles == 0) throw ConfigError("DMA parameters must be positive");
  if (mmae.buffer_bytes == 0) throw ConfigError("buffer size must be positive");
  if (mmae.matlb.lookahead + 1 > mmae.matlb.capacity) throw ConfigError("mATLB lookahead exceeds its capacity");
  if (cpu.mtq_depth != mmae.stq_depth) throw ConfigError("MTQ and STQ depths differ");
  if (cpu.mtq_depth == 0 || cpu.mtq_depth > 64) throw ConfigError("task queue depth must be in [1, 64]");
  if (cpu.efficiency <= 0.0 || cpu.efficiency > 1.0) throw ConfigError("cpu efficiency must be in (0, 1]");
}

Machine::Machine(MachineConfig cfg)
    : cfg_((cfg.validate(), cfg)),
      clocks_(cfg_.cpu_hz, cfg_.mmae_hz, cfg_.noc_hz),
      pt_(cfg_.page_bytes, cfg_.seed) {
  mesh_ = std::make_unique<noc::Mesh>(engine_, clocks_, cfg_.noc);
  mem_ = std::make_unique<mem::MemorySystem>(engine_, clocks_, *mesh_, cfg_.cache);
  for (std::uint32_t n = 0; n < cfg_.nodes; ++n) {
    mmus_.push_back(std::make_unique<xlat::Mmu>(engine_, clocks_, pt_, cfg_.mmu));
    mmaes_.push_back(std::make_unique<mmae::Mmae>(n, engine_, clocks_, *mesh_, *mem_, *mmus_.back(), cfg_.mmae));
    cores_.push_back(std::make_unique<cpu::Core>(n, engine_, clocks_, *mesh_, *mem_, *mmus_.back(), *mmaes_.back(),
                                                 cfg_.cpu));
  }
}

Machine::~Machine() = default;

Addr Machine::allocate(std::uint64_t bytes) {
  if (bytes == 0) bytes = 1;
  const std::uint64_t page = cfg_.page_bytes;
  const Addr va = next_va_;
  const std::uint64_t span = (bytes + page - 1) / page * page;
  pt_.map_region(va, span, cfg_.map_policy);
  next_va_ += span + page;
  return va;
}

void Machine::write_virtual(Addr va, const void* src, std::uint64_t bytes) {
  const auto* p = static_cast<const std::byte*>(src);
  const std::uint64_t page = cfg_.page_bytes;
  while (bytes > 0) {
    const std::uint64_t len = std::min<std::uint64_t>(bytes, page - (va & (page - 1)));
    const auto r = pt_.lookup(va);
    if (r.status == xlat::XlatStatus::PageFault) throw Error("write to unmapped virtual memory");
    mem_->memory().write(r.paddr, std::span<const std::byte>(p, len));
    va += len;
    p += len;
    bytes -= len;
  }
}

void Machine::read_virtual(Addr va, void* dst, std::uint64_t bytes) {
  auto* p = static_cast<std::byte*>(dst);
  const std::uint64_t page = cfg_.page_bytes;
  while (bytes > 0) {
    const std::uint64_t len = std::min<std::uint64_t>(bytes, page - (va & (page - 1)));
    const auto r = pt_.lookup(va);
    if (r.status == xlat::XlatStatus::PageFault) throw Error("read from unmapped virtual memory");
    mem_->memory().read(r.paddr, std::span<std::byte>(p, len));
    va += len;
    p += len;
    bytes -= len;
  }
}

sim::Tick Machine::run() {
  for (auto& c : cores_) c->start();
  return engine_.run();
}

}  // namespace maco
