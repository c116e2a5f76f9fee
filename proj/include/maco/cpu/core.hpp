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
 * @file core.hpp
 * @brief Abstract in-order core: runs an MPAIS script, modeled CPU kernel
 *        phases, lock configuration and process switches.
 *
 * A core script is a list of CoreOps. Plain assembled programs map onto
 * SetReg/Exec ops; the scheduler adds polling, kernels and lock ops that the
 * seven instructions cannot express.
 */

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "maco/isa/mpais.hpp"
#include "maco/mem/memory.hpp"
#include "maco/mmae/engine.hpp"
#include "maco/noc/mesh.hpp"
#include "maco/sim/engine.hpp"
#include "maco/tq/task_queue.hpp"
#include "maco/xlat/translation.hpp"

namespace maco::cpu {

struct CpuConfig {
  std::uint32_t instr_cycles = 10;     // per MPAIS instruction
  std::uint32_t poll_interval = 1000;  // CPU cycles between MA_READ polls
  double efficiency = 0.5;             // kernel phases, fraction of peak
  std::uint32_t fmacs = 8;
  std::uint32_t read_window = 8;  // outstanding kernel-phase line reads
  std::uint32_t mtq_depth = 4;
};

struct VRange {
  Addr va = 0;
  std::uint64_t bytes = 0;
};

struct KernelPhase {
  std::uint64_t flops = 0;
  Precision precision = Precision::FP64;
  std::string label;
  std::vector<VRange> reads;  // result tiles the kernel consumes
};

/// Cycles a phase occupies the core: ceil(flops / (eff * 2 * fmacs)).
std::uint64_t kernel_cycles(std::uint64_t flops, double efficiency, std::uint32_t fmacs = 8);

struct OpSetReg {
  std::uint8_t reg = 0;
  std::uint64_t value = 0;
};
struct OpExec {
  isa::Instruction ins;
};
/// Poll MA_READ on the MAID in `reg` until done, then MA_STATE to release.
struct OpWaitDone {
  std::uint8_t reg = 0;
};
struct OpKernel {
  KernelPhase phase;
};
struct OpSwitch {
  std::uint32_t asid = 0;
};
/// Lock (or unlock) virtual ranges in L3 through their home CCMs.
struct OpLock {
  std::vector<VRange> ranges;
  bool lock = true;
};
using CoreOp = std::variant<OpSetReg, OpExec, OpWaitDone, OpKernel, OpSwitch, OpLock>;

struct CoreStats {
  std::uint64_t busy_cycles = 0;  // instructions + kernels + stalls
  std::uint64_t instructions = 0;
  std::uint64_t kernel_cycles = 0;
  std::uint64_t stall_cycles = 0;
  std::uint64_t polls = 0;
  std::uint64_t alloc_failures = 0;
  std::uint64_t kernel_flops = 0;
  std::uint64_t kernel_reads = 0;
};

class Core {
 public:
  Core(std::uint32_t node, sim::Engine& engine, const sim::Clocks& clocks, noc::Mesh& mesh,
       mem::MemorySystem& mem, xlat::Mmu& mmu, mmae::Mmae& mmae, CpuConfig cfg = {});

  void append(CoreOp op) { script_.push_back(std::move(op)); }
  void append(const isa::Program& program);
  /// Begin executing the script at the current time.
  void start();
  bool finished() const { return pc_ >= script_.size() && !busy_; }
  void set_on_finished(std::function<void()> cb) { on_finished_ = std::move(cb); }

  std::uint64_t reg(std::uint8_t r) const { return regs_.at(r); }
  void set_reg(std::uint8_t r, std::uint64_t v) { regs_.at(r) = v; }
  std::uint32_t asid() const { return asid_; }
  /// Save the register file under the current ASID and load new_asid's.
  void switch_process(std::uint32_t new_asid);

  /// Execute one instruction immediately (no timing); used by tests.
  void execute(const isa::Instruction& ins);

  tq::Mtq& mtq() { return mtq_; }
  const tq::Mtq& mtq() const { return mtq_; }
  const CoreStats& stats() const { return stats_; }
  /// Rd values produced by MA_READ / MA_STATE / MA_CFG, in program order.
  const std::vector<std::uint64_t>& results() const { return results_; }
  std::uint32_t node() const { return node_; }

 private:
  void step();
  void next_after(std::uint64_t cpu_cycles);
  void run_kernel(const KernelPhase& k);
  void lock(const OpLock& op);
  isa::ParamBlock param_block(std::uint8_t rn, bool& ok) const;

  std::uint32_t node_;
  sim::Engine& engine_;
  const sim::Clocks& clocks_;
  noc::Mesh& mesh_;
  mem::MemorySystem& mem_;
  xlat::Mmu& mmu_;
  mmae::Mmae& mmae_;
  CpuConfig cfg_;
  tq::Mtq mtq_;
  std::array<std::uint64_t, isa::kNumRegisters> regs_{};
  std::uint32_t asid_ = 0;
  std::map<std::uint32_t, std::array<std::uint64_t, isa::kNumRegisters>> saved_;
  std::vector<CoreOp> script_;
  std::size_t pc_ = 0;
  bool busy_ = false;
  bool started_ = false;
  std::function<void()> on_finished_;
  CoreStats stats_;
  std::vector<std::uint64_t> results_;
};

}  // namespace maco::cpu
