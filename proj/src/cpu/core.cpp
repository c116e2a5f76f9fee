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


#include "maco/cpu/core.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace maco::cpu {

namespace {
constexpr std::uint32_t kParamMsgBytes = 64;  // six registers plus header
}

std::uint64_t kernel_cycles(std::uint64_t flops, double efficiency, std::uint32_t fmacs) {
  if (flops == 0) return 0;
  if (efficiency <= 0.0 || efficiency > 1.0) throw ConfigError("cpu efficiency must be in (0, 1]");
  const double per_cycle = efficiency * 2.0 * fmacs;
  return static_cast<std::uint64_t>(std::ceil(static_cast<double>(flops) / per_cycle - 1e-9));
}

Core::Core(std::uint32_t node, sim::Engine& engine, const sim::Clocks& clocks, noc::Mesh& mesh,
           mem::MemorySystem& mem, xlat::Mmu& mmu, mmae::Mmae& mmae, CpuConfig cfg)
    : node_(node), engine_(engine), clocks_(clocks), mesh_(mesh), mem_(mem), mmu_(mmu), mmae_(mmae), cfg_(cfg),
      mtq_(cfg.mtq_depth) {
  if (cfg_.mtq_depth != mmae_.config().stq_depth) throw ConfigError("MTQ and STQ depths differ");
  if (cfg_.poll_interval == 0) throw ConfigError("poll interval must be positive");
  mmae_.set_hooks([this](std::uint32_t maid) { mtq_.mark_started(maid); },
                  [this](std::uint32_t maid, ExceptionType e) { mtq_.complete(maid, e); });
}

void Core::append(const isa::Program& program) {
  for (const auto& st : program.statements) {
    if (const auto* s = std::get_if<isa::SetDirective>(&st)) {
      script_.push_back(OpSetReg{s->reg, s->value});
    } else {
      script_.push_back(OpExec{std::get<isa::Instruction>(st)});
    }
  }
}

void Core::start() {
  if (started_) return;
  started_ = true;
  busy_ = true;
  engine_.schedule_in(0, [this]() { step(); });
}

void Core::switch_process(std::uint32_t new_asid) {
  saved_[asid_] = regs_;
  auto it = saved_.find(new_asid);
  if (it != saved_.end()) {
    regs_ = it->second;
  } else {
    regs_.fill(0);
  }
  asid_ = new_asid;
}

isa::ParamBlock Core::param_block(std::uint8_t rn, bool& ok) const {
  isa::ParamBlock b{};
  ok = rn + 5 < isa::kNumRegisters;
  if (!ok) return b;
  for (int i = 0; i < 6; ++i) b[i] = regs_[rn + i];
  return b;
}

void Core::execute(const isa::Instruction& ins) {
  using isa::Opcode;
  ++stats_.instructions;
  switch (ins.op) {
    case Opcode::MaMove:
    case Opcode::MaInit:
    case Opcode::MaStash:
    case Opcode::MaCfg: {
      bool in_range = false;
      const isa::ParamBlock block = param_block(ins.rn, in_range);
      isa::Validated v;
      if (in_range) {
        v = isa::validate_params(ins.op, block, mmae_.config().buffer_bytes);
      } else {
        v.fault = ExceptionType::ParamFault;
        v.reason = "parameter block runs past R30";
      }
      const auto maid = mtq_.alloc(asid_, v.ok() ? ExceptionType::None : v.fault);
      if (!maid) {
        ++stats_.alloc_failures;
        regs_[ins.rd] = isa::kAllocFailure;
        results_.push_back(isa::kAllocFailure);
        return;
      }
      regs_[ins.rd] = *maid;
      results_.push_back(*maid);
      if (v.ok()) {
        mesh_.send({node_, node_, kParamMsgBytes, noc::MsgClass::Request},
                   [this, m = *maid, task = *v.task]() { mmae_.deliver(m, task); });
      }
      return;
    }
    case Opcode::MaRead:
    case Opcode::MaState: {
      const std::uint64_t w =
          mtq_.query(static_cast<std::uint32_t>(std::min<std::uint64_t>(regs_[ins.rn], 0xFFFFFFFFu)), asid_,
                     ins.op == Opcode::MaState);
      regs_[ins.rd] = w;
      results_.push_back(w);
      return;
    }
    case Opcode::MaClear:
      if (regs_[ins.rn] < mtq_.depth()) mtq_.clear(static_cast<std::uint32_t>(regs_[ins.rn]));
      return;
  }
}

void Core::next_after(std::uint64_t cpu_cycles) {
  stats_.busy_cycles += cpu_cycles;
  engine_.schedule_in(clocks_.cycles(cpu_cycles, sim::Domain::Cpu), [this]() { step(); });
}

void Core::step() {
  while (pc_ < script_.size()) {
    CoreOp& op = script_[pc_];
    if (auto* s = std::get_if<OpSetReg>(&op)) {
      regs_.at(s->reg) = s->value;
      ++pc_;
      continue;
    }
    if (auto* e = std::get_if<OpExec>(&op)) {
      execute(e->ins);
      ++pc_;
      next_after(cfg_.instr_cycles);
      return;
    }
    if (auto* w = std::get_if<OpWaitDone>(&op)) {
      ++stats_.polls;
      ++stats_.instructions;
      const std::uint64_t st = mtq_.query(static_cast<std::uint32_t>(regs_[w->reg]), asid_, false);
      if (st & tq::kStatusDone) {
        execute(isa::Instruction{isa::Opcode::MaState, 30, w->reg});
        ++pc_;
        next_after(2ULL * cfg_.instr_cycles);
      } else {
        stats_.stall_cycles += cfg_.poll_interval;
        next_after(cfg_.instr_cycles + cfg_.poll_interval);
      }
      return;
    }
    if (auto* k = std::get_if<OpKernel>(&op)) {
      ++pc_;
      run_kernel(k->phase);
      return;
    }
    if (auto* sw = std::get_if<OpSwitch>(&op)) {
      switch_process(sw->asid);
      ++pc_;
      next_after(cfg_.instr_cycles);
      return;
    }
    if (auto* l = std::get_if<OpLock>(&op)) {
      lock(*l);
      ++pc_;
      next_after(cfg_.instr_cycles);
      return;
    }
  }
  busy_ = false;
  if (on_finished_) on_finished_();
}

void Core::lock(const OpLock& op) {
  const auto& pt = mmu_.page_table();
  const std::uint64_t page = pt.page_bytes();
  for (const VRange& range : op.ranges) {
    Addr va = range.va;
    const Addr end = range.va + range.bytes;
    while (va < end) {
      const std::uint64_t len = std::min<std::uint64_t>(end - va, page - (va & (page - 1)));
      const xlat::XlatResult r = pt.lookup(va);
      if (r.status != xlat::XlatStatus::Ok) throw ConfigError("lock range is not mapped");
      if (op.lock) {
        mem_.lock_range(r.paddr, len);
      } else {
        mem_.unlock_range(r.paddr, len);
      }
      va += len;
    }
  }
}

void Core::run_kernel(const KernelPhase& k) {
  const std::uint64_t compute = kernel_cycles(k.flops, cfg_.efficiency, cfg_.fmacs);
  stats_.kernel_cycles += compute;
  stats_.kernel_flops += k.flops;
  // Lines to read, in order.
  auto lines = std::make_shared<std::vector<Addr>>();
  for (const VRange& r : k.reads) {
    for (Addr a = r.va & ~Addr{kLineBytes - 1}; a < r.va + r.bytes; a += kLineBytes) lines->push_back(a);
  }
  const sim::Tick start = engine_.now();
  const sim::Tick compute_end = start + clocks_.cycles(compute, sim::Domain::Cpu);
  if (lines->empty()) {
    stats_.busy_cycles += compute;
    engine_.schedule_at(compute_end, [this]() { step(); });
    return;
  }
  struct State {
    std::size_t next = 0, done = 0, inflight = 0;
    std::vector<std::byte> scratch = std::vector<std::byte>(kLineBytes);
  };
  auto st = std::make_shared<State>();
  auto finish = [this, start, compute_end, compute]() {
    const sim::Tick end = std::max(engine_.now(), compute_end);
    const std::uint64_t total = clocks_.to_cycles_ceil(end - start, sim::Domain::Cpu);
    stats_.busy_cycles += total;
    stats_.stall_cycles += total - std::min(total, compute);
    engine_.schedule_at(end, [this]() { step(); });
  };
  auto issue = std::make_shared<std::function<void()>>();
  *issue = [this, st, lines, issue, finish]() {
    while (st->inflight < cfg_.read_window && st->next < lines->size()) {
      const Addr va = (*lines)[st->next++];
      ++st->inflight;
      ++stats_.kernel_reads;
      mmu_.translate(va, xlat::Requester::Cpu, [this, st, lines, issue, finish, va](xlat::XlatResult r) {
        auto after = [st, lines, issue, finish]() {
          --st->inflight;
          if (++st->done == lines->size()) {
            finish();
            *issue = nullptr;  // break the self-reference
          } else {
            (*issue)();
          }
        };
        if (r.status != xlat::XlatStatus::Ok) {
          after();
          return;
        }
        (void)va;
        mem_.cpu_access(node_, r.paddr, mem::CpuOp::Read, kLineBytes, st->scratch.data(), after);
      });
    }
  };
  (*issue)();
}

}  // namespace maco::cpu
