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


#include "maco/mmae/engine.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>
#include <deque>

namespace maco::mmae {

namespace {

constexpr std::uint32_t kMsgBytes = 16;
constexpr std::uint64_t kChunkBytes = 4096;

std::uint32_t ceil_div(std::uint32_t a, std::uint32_t b) { return (a + b - 1) / b; }

/// A row segment of one DMA job: virtual range plus its offset in the run's
/// buffer.
struct SegSpec {
  Addr va = 0;
  std::uint32_t len = 0;
  std::size_t buf_off = 0;
};

/// Turns a segment stream into the page-head stream the DMA will follow.
class HeadGen {
 public:
  using Next = std::function<bool(Addr& va, std::uint64_t& len)>;
  HeadGen(Next next, std::uint32_t shift) : next_(std::move(next)), shift_(shift) {}

  bool operator()(Addr& head) {
    for (;;) {
      while (len_ > 0) {
        const std::uint64_t page = va_ >> shift_;
        const Addr page_end = (page + 1) << shift_;
        const Addr at = va_;
        const std::uint64_t take = std::min<std::uint64_t>(len_, page_end - va_);
        va_ += take;
        len_ -= take;
        if (!have_last_ || page != last_page_) {
          have_last_ = true;
          last_page_ = page;
          head = at;
          return true;
        }
      }
      if (!next_(va_, len_)) return false;
    }
  }

 private:
  Next next_;
  std::uint32_t shift_;
  Addr va_ = 0;
  std::uint64_t len_ = 0;
  bool have_last_ = false;
  std::uint64_t last_page_ = 0;
};

}  // namespace

GemmPlan plan_gemm(const isa::GemmTask& t, std::uint32_t ttr, std::uint32_t ttc, std::uint64_t buffer_bytes) {
  if (t.m == 0 || t.n == 0 || t.k == 0 || t.tr == 0 || t.tc == 0) throw ConfigError("degenerate GEMM task");
  if (ttr == 0 || ttc == 0) throw ConfigError("second-level tile must be non-empty");
  GemmPlan p;
  p.task = t;
  p.es = element_size(t.precision);
  const std::uint32_t tr = std::min<std::uint32_t>(t.tr, t.m);
  const std::uint32_t tc = std::min<std::uint32_t>(t.tc, t.n);
  p.ttr = std::min(ttr, tr);
  p.ttc = std::min(ttc, tc);
  p.kk = isa::choose_k_strip(p.ttr, p.ttc, t.k, t.precision, buffer_bytes);
  if (p.kk == 0) throw ConfigError("second-level tile overflows the on-chip buffer");
  p.first_level_tiles = ceil_div(t.m, tr) * ceil_div(t.n, tc);
  for (std::uint32_t ti = 0; ti < t.m; ti += tr) {
    for (std::uint32_t tj = 0; tj < t.n; tj += tc) {
      const std::uint32_t ie = std::min(t.m, ti + tr);
      const std::uint32_t je = std::min(t.n, tj + tc);
      for (std::uint32_t i = ti; i < ie; i += p.ttr) {
        for (std::uint32_t j = tj; j < je; j += p.ttc) {
          p.subtiles.push_back({i, j, std::min(p.ttr, ie - i), std::min(p.ttc, je - j)});
        }
      }
    }
  }
  p.steps.reserve(p.subtiles.size() * ceil_div(t.k, p.kk));
  for (std::uint32_t u = 0; u < p.subtiles.size(); ++u) {
    for (std::uint32_t k0 = 0; k0 < t.k; k0 += p.kk) {
      const std::uint32_t kk = std::min(p.kk, t.k - k0);
      p.steps.push_back({u, k0, kk, k0 == 0, k0 + kk == t.k});
    }
  }
  return p;
}

// --- DMA engine -------------------------------------------------------------

class Mmae::Dma {
 public:
  enum class Op { Read, Write, Stash };

  Dma(Mmae& owner, int id) : m_(owner), id_(id) {}

  void reset() {
    ++gen_;
    jobs_.clear();
    have_page_ = false;
    waiting_ = false;
    mem_blocked_ = false;
  }

  void push(Op op, std::vector<SegSpec> segs, std::shared_ptr<std::vector<std::byte>> buf,
            std::function<void()> done) {
    auto j = std::make_shared<Job>();
    j->op = op;
    j->segs = std::move(segs);
    j->buf = std::move(buf);
    j->done = std::move(done);
    j->gen = gen_;
    if (m_.cfg_.ideal) {
      run_ideal(*j);
      return;
    }
    jobs_.push_back(std::move(j));
    pump();
  }

  DmaStats& stats() { return m_.stats_.dma[id_]; }

 private:
  struct Job {
    Op op = Op::Read;
    std::vector<SegSpec> segs;
    std::shared_ptr<std::vector<std::byte>> buf;
    std::function<void()> done;
    std::size_t seg = 0;
    std::uint32_t off = 0;
    std::uint32_t pending = 0;
    bool all_issued = false;
    std::uint64_t gen = 0;
  };

  sim::Tick now() const { return m_.engine_.now(); }
  std::uint32_t shift() const { return m_.mmu_.page_table().page_shift(); }

  void run_ideal(Job& j) {
    const auto& pt = m_.mmu_.page_table();
    const std::uint64_t pmask = (std::uint64_t{1} << shift()) - 1;
    for (const SegSpec& s : j.segs) {
      std::uint64_t off = 0;
      while (off < s.len) {
        const Addr va = s.va + off;
        const std::uint32_t len =
            static_cast<std::uint32_t>(std::min<std::uint64_t>(s.len - off, (pmask + 1) - (va & pmask)));
        const xlat::XlatResult r = pt.lookup(va);
        if (r.status != xlat::XlatStatus::Ok) {
          const ExceptionType e =
              r.status == xlat::XlatStatus::PageFault ? ExceptionType::PageFault : ExceptionType::DataAbort;
          m_.engine_.schedule_in(0, [this, g = gen_, e]() {
            if (g == gen_) m_.fault(e);
          });
          return;
        }
        std::byte* p = j.buf ? j.buf->data() + s.buf_off + off : nullptr;
        switch (j.op) {
          case Op::Read: m_.mem_.memory().read(r.paddr, std::span<std::byte>(p, len)); break;
          case Op::Write: m_.mem_.memory().write(r.paddr, std::span<const std::byte>(p, len)); break;
          case Op::Stash:
            for (Addr l = mem::line_of(r.paddr); l < r.paddr + len; l += kLineBytes) m_.mem_.stash(m_.node_, l, [] {});
            break;
        }
        stats().requests += (len + kLineBytes - 1) / kLineBytes;
        stats().bytes += len;
        off += len;
      }
    }
    m_.engine_.schedule_in(0, [this, g = gen_, done = std::move(j.done)]() {
      if (g == gen_ && done) done();
    });
  }

 public:
  void pump() {
    if (waiting_) return;
    const MmaeConfig& cfg = m_.cfg_;
    while (!jobs_.empty()) {
      auto job = jobs_.front();
      if (job->seg >= job->segs.size()) {
        job->all_issued = true;
        jobs_.pop_front();
        if (job->pending == 0 && job->done) job->done();
        continue;
      }
      if (outstanding_ >= cfg.dma_window) {
        if (!mem_blocked_) {
          mem_blocked_ = true;
          mem_block_start_ = now();
        }
        return;
      }
      if (now() < next_issue_) {
        waiting_ = true;
        m_.engine_.schedule_at(next_issue_, [this, g = gen_]() {
          if (g != gen_) return;
          waiting_ = false;
          pump();
        });
        return;
      }
      const SegSpec& s = job->segs[job->seg];
      const Addr va = s.va + job->off;
      const std::uint32_t len = std::min<std::uint32_t>(s.len - job->off, kLineBytes - (va & (kLineBytes - 1)));
      const std::uint64_t vpn = va >> shift();
      if (!have_page_ || vpn != cur_vpn_) {
        if (!translate(va)) return;
      }
      if (cur_status_ != xlat::XlatStatus::Ok) {
        m_.fault(cur_status_ == xlat::XlatStatus::PageFault ? ExceptionType::PageFault : ExceptionType::DataAbort);
        return;
      }
      const Addr paddr = cur_frame_ | (va & ((std::uint64_t{1} << shift()) - 1));
      std::byte* p = job->buf ? job->buf->data() + s.buf_off + job->off : nullptr;
      ++outstanding_;
      ++job->pending;
      ++stats().requests;
      stats().bytes += len;
      auto on_done = [this, job]() { complete(*job); };
      switch (job->op) {
        case Op::Read: m_.mem_.dma_read(m_.node_, paddr, len, p, std::move(on_done)); break;
        case Op::Write: m_.mem_.dma_write(m_.node_, paddr, len, p, std::move(on_done)); break;
        case Op::Stash: m_.mem_.stash(m_.node_, paddr, std::move(on_done)); break;
      }
      next_issue_ = now() + m_.clocks_.cycles(cfg.dma_issue_cycles, sim::Domain::Mmae);
      job->off += len;
      if (job->off == s.len) {
        ++job->seg;
        job->off = 0;
      }
    }
  }

 private:
  void complete(Job& job) {
    --outstanding_;
    --job.pending;
    if (mem_blocked_) {
      mem_blocked_ = false;
      stats().stall_memory += now() - mem_block_start_;
    }
    if (job.gen != gen_) return;
    if (job.all_issued && job.pending == 0 && job.done) {
      auto done = std::move(job.done);
      job.done = nullptr;
      done();
    }
    pump();
  }

  void set_page(std::uint64_t vpn, const xlat::XlatResult& r) {
    have_page_ = true;
    cur_vpn_ = vpn;
    cur_status_ = r.status;
    cur_frame_ = r.paddr & ~((std::uint64_t{1} << shift()) - 1);
  }

  void resume_after_stall() {
    waiting_ = false;
    stats().stall_translation += now() - stall_start_;
    pump();
  }

  /// True when the page of `va` is now translated; false when stalled.
  bool translate(Addr va) {
    const std::uint64_t vpn = va >> shift();
    xlat::XlatResult r;
    auto& lane = *m_.lanes_[id_];
    const auto outcome = lane.lookup(va, r, [this, g = gen_]() {
      if (g == gen_) resume_after_stall();
    });
    if (outcome == xlat::MatlbLane::Outcome::Hit) {
      ++stats().lane_hits;
      set_page(vpn, r);
      return true;
    }
    if (outcome == xlat::MatlbLane::Outcome::Pending) {
      waiting_ = true;
      stall_start_ = now();
      return false;
    }
    if (auto hit = m_.mmu_.probe(va, xlat::Requester::Mmae)) {
      ++stats().stlb_hits;
      set_page(vpn, hit->result);
      return true;
    }
    ++stats().walks;
    waiting_ = true;
    stall_start_ = now();
    m_.mmu_.walk(va, xlat::Requester::Mmae, [this, g = gen_, vpn](xlat::XlatResult res) {
      if (g != gen_) return;
      set_page(vpn, res);
      resume_after_stall();
    });
    return false;
  }

  Mmae& m_;
  int id_;
  std::uint64_t gen_ = 0;
  std::deque<std::shared_ptr<Job>> jobs_;
  std::uint32_t outstanding_ = 0;
  sim::Tick next_issue_ = 0;
  bool waiting_ = false;
  bool mem_blocked_ = false;
  sim::Tick mem_block_start_ = 0;
  sim::Tick stall_start_ = 0;
  bool have_page_ = false;
  std::uint64_t cur_vpn_ = 0;
  xlat::XlatStatus cur_status_ = xlat::XlatStatus::Ok;
  Addr cur_frame_ = 0;
};

// --- controller -------------------------------------------------------------

struct Mmae::Run {
  std::uint32_t maid = 0;
  std::uint64_t gen = 0;
  isa::Task task;
  TaskRecord rec;
  DmaStats dma_at_start[2];

  // GEMM
  GemmPlan plan;
  std::shared_ptr<std::vector<std::byte>> buf;
  std::size_t a_off[2] = {}, b_off[2] = {}, c_off[2] = {};
  std::size_t computed = 0;
  std::size_t next_load = 0;
  long ab_step[2] = {-1, -1};
  bool ab_ready[2] = {};
  bool sa_busy = false;
  long c_holder[2] = {-1, -1};
  bool c_ready[2] = {};
  std::vector<std::pair<bool, std::uint32_t>> dma1_prog;  // (is_load, subtile)
  std::size_t next_dma1 = 0;
  std::vector<bool> sub_done;
  std::size_t wb_done = 0;

  // transfers
  std::uint64_t chunks = 0;
  std::uint64_t chunk = 0;
  std::uint64_t chunks_done = 0;

  std::size_t dma0_count(std::size_t s) const { return plan.subtiles[plan.steps[s].sub].r + plan.steps[s].kk; }
  SegSpec dma0_seg(std::size_t s, std::size_t idx) const {
    const KStep& st = plan.steps[s];
    const Subtile& u = plan.subtiles[st.sub];
    const isa::GemmTask& t = plan.task;
    const std::size_t slot = s % 2;
    if (idx < u.r) {
      return {t.a + (std::uint64_t{u.i0 + idx} * t.k + st.k0) * plan.es, st.kk * plan.es,
              a_off[slot] + idx * st.kk * plan.es};
    }
    const std::size_t kr = idx - u.r;
    return {t.b + (std::uint64_t{st.k0 + kr} * t.ld_bc() + u.j0) * plan.es, u.c * plan.es,
            b_off[slot] + kr * u.c * plan.es};
  }
  std::size_t dma1_count(std::size_t j) const { return plan.subtiles[dma1_prog[j].second].r; }
  SegSpec dma1_seg(std::size_t j, std::size_t idx) const {
    const std::uint32_t sub = dma1_prog[j].second;
    const Subtile& u = plan.subtiles[sub];
    const isa::GemmTask& t = plan.task;
    return {t.c + (std::uint64_t{u.i0 + idx} * t.ld_bc() + u.j0) * plan.es, u.c * plan.es,
            c_off[sub % 2] + idx * u.c * plan.es};
  }

  const isa::TransferTask& xfer() const { return std::get<isa::TransferTask>(task); }
  std::uint32_t chunk_len(std::uint64_t i) const {
    return static_cast<std::uint32_t>(std::min<std::uint64_t>(kChunkBytes, xfer().length - i * kChunkBytes));
  }
  /// Transfer program: Move alternates read(src chunk) / write(dst chunk).
  std::uint64_t xfer_jobs() const { return xfer().kind == isa::TransferKind::Move ? 2 * chunks : chunks; }
  SegSpec xfer_seg(std::uint64_t j) const {
    const auto& x = xfer();
    if (x.kind == isa::TransferKind::Move) {
      const std::uint64_t i = j / 2;
      return {(j % 2 ? x.dst : x.src) + i * kChunkBytes, chunk_len(i), 0};
    }
    return {x.dst + j * kChunkBytes, chunk_len(j), 0};
  }
};

Mmae::Mmae(std::uint32_t node, sim::Engine& engine, const sim::Clocks& clocks, noc::Mesh& mesh,
           mem::MemorySystem& mem, xlat::Mmu& mmu, MmaeConfig cfg)
    : node_(node), engine_(engine), clocks_(clocks), mesh_(mesh), mem_(mem), mmu_(mmu), cfg_(cfg),
      stq_(cfg.stq_depth) {
  if (cfg_.dma_window == 0) throw ConfigError("DMA window must be at least 1");
  for (int i = 0; i < 2; ++i) {
    lanes_[i] = std::make_unique<xlat::MatlbLane>(engine_, clocks_, mmu_, cfg_.matlb);
    dma_[i] = std::make_unique<Dma>(*this, i);
  }
  selector_ = [this](const isa::GemmTask& t) { return tiling::candidates_for(t, cfg_.buffer_bytes).front(); };
}

Mmae::~Mmae() = default;

void Mmae::set_hooks(StartHook on_start, ReportHook on_report) {
  on_start_ = std::move(on_start);
  on_report_ = std::move(on_report);
}

const xlat::MatlbLane& Mmae::lane(int dma) const { return *lanes_[dma & 1]; }

bool Mmae::idle() const {
  if (run_) return false;
  return std::none_of(stq_.entries().begin(), stq_.entries().end(),
                      [](const tq::StqEntry& e) { return e.phase != tq::StqPhase::Idle; });
}

void Mmae::deliver(std::uint32_t maid, isa::Task task) {
  stq_.buffer(maid, std::move(task));
  start_next();
}

void Mmae::start_next() {
  if (run_) return;
  if (auto maid = stq_.activate_next()) begin(*maid);
}

void Mmae::begin(std::uint32_t maid) {
  run_ = std::make_unique<Run>();
  Run& r = *run_;
  r.maid = maid;
  r.gen = ++generation_;
  r.task = *stq_.entry(maid).task;
  r.rec.maid = maid;
  r.rec.start = engine_.now();
  r.dma_at_start[0] = stats_.dma[0];
  r.dma_at_start[1] = stats_.dma[1];
  mesh_.send({node_, node_, kMsgBytes, noc::MsgClass::Response}, [this, maid]() {
    if (on_start_) on_start_(maid);
  });
  for (auto& d : dma_) d->reset();

  const std::uint32_t shift = mmu_.page_table().page_shift();
  if (auto* g = std::get_if<isa::GemmTask>(&r.task)) {
    r.rec.gemm = true;
    tiling::TilePair pair{g->ttr, g->ttc};
    if (g->autotune()) pair = selector_(*g);
    try {
      r.plan = plan_gemm(*g, pair.ttr, pair.ttc, cfg_.buffer_bytes);
    } catch (const ConfigError&) {
      engine_.schedule_in(clocks_.cycles(cfg_.configure_cycles, sim::Domain::Mmae), [this, gen = r.gen]() {
        if (run_ && run_->gen == gen) finish(ExceptionType::ParamFault);
      });
      return;
    }
    const GemmPlan& p = r.plan;
    r.rec.ttr = p.ttr;
    r.rec.ttc = p.ttc;
    r.rec.kk = p.kk;
    // A, B and C regions, each double buffered.
    const std::size_t a = std::size_t{p.ttr} * p.kk * p.es;
    const std::size_t b = std::size_t{p.kk} * p.ttc * p.es;
    const std::size_t c = std::size_t{p.ttr} * p.ttc * p.es;
    const std::size_t total = 2 * (a + b + c);
    if (total > cfg_.buffer_bytes) throw ProtocolError("tile schedule exceeds the on-chip buffer");
    r.a_off[0] = 0;
    r.a_off[1] = a;
    r.b_off[0] = 2 * a;
    r.b_off[1] = 2 * a + b;
    r.c_off[0] = 2 * (a + b);
    r.c_off[1] = 2 * (a + b) + c;
    r.buf = std::make_shared<std::vector<std::byte>>(total);
    r.sub_done.assign(p.subtiles.size(), false);
    const std::uint32_t n = static_cast<std::uint32_t>(p.subtiles.size());
    if (g->accumulate) {
      r.dma1_prog.push_back({true, 0});
      if (n > 1) r.dma1_prog.push_back({true, 1});
      for (std::uint32_t u = 0; u < n; ++u) {
        r.dma1_prog.push_back({false, u});
        if (u + 2 < n) r.dma1_prog.push_back({true, u + 2});
      }
    } else {
      for (std::uint32_t u = 0; u < n; ++u) r.dma1_prog.push_back({false, u});
    }
    if (!cfg_.ideal) {
      // Segment streams in DMA order, for the lanes.
      auto s0 = std::make_shared<std::pair<std::size_t, std::size_t>>(0, 0);
      lanes_[0]->reset(HeadGen(
          [run = run_.get(), s0](Addr& va, std::uint64_t& len) {
            auto& [s, i] = *s0;
            if (s >= run->plan.steps.size()) return false;
            const SegSpec seg = run->dma0_seg(s, i);
            va = seg.va;
            len = seg.len;
            if (++i == run->dma0_count(s)) {
              ++s;
              i = 0;
            }
            return true;
          },
          shift));
      auto s1 = std::make_shared<std::pair<std::size_t, std::size_t>>(0, 0);
      lanes_[1]->reset(HeadGen(
          [run = run_.get(), s1](Addr& va, std::uint64_t& len) {
            auto& [j, i] = *s1;
            if (j >= run->dma1_prog.size()) return false;
            const SegSpec seg = run->dma1_seg(j, i);
            va = seg.va;
            len = seg.len;
            if (++i == run->dma1_count(j)) {
              ++j;
              i = 0;
            }
            return true;
          },
          shift));
    }
  } else {
    const auto& x = std::get<isa::TransferTask>(r.task);
    r.chunks = (x.length + kChunkBytes - 1) / kChunkBytes;
    if (x.kind != isa::TransferKind::Stash) r.buf = std::make_shared<std::vector<std::byte>>(kChunkBytes);
    if (!cfg_.ideal) {
      lanes_[0]->stop();
      auto j = std::make_shared<std::uint64_t>(0);
      lanes_[1]->reset(HeadGen(
          [run = run_.get(), j](Addr& va, std::uint64_t& len) {
            if (*j >= run->xfer_jobs()) return false;
            const SegSpec seg = run->xfer_seg((*j)++);
            va = seg.va;
            len = seg.len;
            return true;
          },
          shift));
    }
  }
  engine_.schedule_in(clocks_.cycles(cfg_.configure_cycles, sim::Domain::Mmae), [this, gen = r.gen]() {
    if (!run_ || run_->gen != gen) return;
    if (run_->rec.gemm) {
      advance();
    } else {
      begin_transfer();
    }
  });
}

void Mmae::advance() {
  Run& r = *run_;
  const GemmPlan& p = r.plan;
  const std::uint64_t gen = r.gen;
  const bool acc = p.task.accumulate;

  while (r.next_load < p.steps.size() && r.next_load < r.computed + 2) {
    const std::size_t s = r.next_load++;
    const std::size_t slot = s % 2;
    r.ab_step[slot] = static_cast<long>(s);
    r.ab_ready[slot] = false;
    std::vector<SegSpec> segs;
    const std::size_t cnt = r.dma0_count(s);
    segs.reserve(cnt);
    for (std::size_t i = 0; i < cnt; ++i) segs.push_back(r.dma0_seg(s, i));
    dma_[0]->push(Dma::Op::Read, std::move(segs), r.buf, [this, gen, slot]() {
      if (!run_ || run_->gen != gen) return;
      run_->ab_ready[slot] = true;
      advance();
    });
    if (!run_ || run_->gen != gen) return;
  }

  while (r.next_dma1 < r.dma1_prog.size()) {
    const auto [load, u] = r.dma1_prog[r.next_dma1];
    const std::size_t cs = u % 2;
    if (load) {
      if (r.c_holder[cs] != -1) break;
      r.c_holder[cs] = u;
      r.c_ready[cs] = false;
    } else if (!r.sub_done[u]) {
      break;
    }
    std::vector<SegSpec> segs;
    const std::size_t cnt = r.dma1_count(r.next_dma1);
    for (std::size_t i = 0; i < cnt; ++i) segs.push_back(r.dma1_seg(r.next_dma1, i));
    ++r.next_dma1;
    if (load) {
      dma_[1]->push(Dma::Op::Read, std::move(segs), r.buf, [this, gen, cs]() {
        if (!run_ || run_->gen != gen) return;
        run_->c_ready[cs] = true;
        advance();
      });
    } else {
      dma_[1]->push(Dma::Op::Write, std::move(segs), r.buf, [this, gen, cs]() {
        if (!run_ || run_->gen != gen) return;
        run_->c_holder[cs] = -1;
        if (++run_->wb_done == run_->plan.subtiles.size()) {
          finish(ExceptionType::None);
        } else {
          advance();
        }
      });
    }
    if (!run_ || run_->gen != gen) return;
  }

  if (r.sa_busy || r.computed >= p.steps.size()) return;
  const std::size_t s = r.computed;
  const KStep& st = p.steps[s];
  const std::size_t slot = s % 2;
  const std::size_t cs = st.sub % 2;
  if (r.ab_step[slot] != static_cast<long>(s) || !r.ab_ready[slot]) return;
  if (!acc && st.first && r.c_holder[cs] == -1) {
    r.c_holder[cs] = st.sub;
    const Subtile& u = p.subtiles[st.sub];
    std::memset(r.buf->data() + r.c_off[cs], 0, std::size_t{u.r} * u.c * p.es);
    r.c_ready[cs] = true;
  }
  if (r.c_holder[cs] != static_cast<long>(st.sub) || !r.c_ready[cs]) return;

  const Subtile& u = p.subtiles[st.sub];
  std::byte* base = r.buf->data();
  const TileStepResult res = systolic_tile_step(
      std::span<const std::byte>(base + r.a_off[slot], std::size_t{u.r} * st.kk * p.es),
      std::span<const std::byte>(base + r.b_off[slot], std::size_t{st.kk} * u.c * p.es),
      std::span<std::byte>(base + r.c_off[cs], std::size_t{u.r} * u.c * p.es), u.r, u.c, st.kk,
      p.task.precision, cfg_.sa);
  r.sa_busy = true;
  r.rec.compute_cycles += res.cycles;
  stats_.busy_cycles += res.cycles;
  const bool fp_fault = res.non_finite && cfg_.fp_exceptions;
  engine_.schedule_in(clocks_.cycles(res.cycles, sim::Domain::Mmae), [this, gen, s, slot, fp_fault]() {
    if (!run_ || run_->gen != gen) return;
    Run& rr = *run_;
    rr.sa_busy = false;
    rr.ab_ready[slot] = false;
    rr.ab_step[slot] = -1;
    rr.computed = s + 1;
    if (rr.plan.steps[s].last) rr.sub_done[rr.plan.steps[s].sub] = true;
    if (fp_fault) {
      fault(ExceptionType::FloatingPoint);
      return;
    }
    advance();
  });
}

void Mmae::begin_transfer() {
  Run& r = *run_;
  const auto& x = r.xfer();
  const std::uint64_t gen = r.gen;
  if (x.kind == isa::TransferKind::Move) {
    transfer_next_chunk();
    return;
  }
  const Dma::Op op = x.kind == isa::TransferKind::Init ? Dma::Op::Write : Dma::Op::Read;
  for (std::uint64_t i = 0; i < r.chunks; ++i) {
    dma_[1]->push(x.kind == isa::TransferKind::Stash ? Dma::Op::Stash : op, {r.xfer_seg(i)}, r.buf, [this, gen]() {
      if (!run_ || run_->gen != gen) return;
      if (++run_->chunks_done == run_->chunks) finish(ExceptionType::None);
    });
    if (!run_ || run_->gen != gen) return;
  }
}

void Mmae::transfer_next_chunk() {
  Run& r = *run_;
  const std::uint64_t gen = r.gen;
  const std::uint64_t i = r.chunk;
  dma_[1]->push(Dma::Op::Read, {r.xfer_seg(2 * i)}, r.buf, [this, gen, i]() {
    if (!run_ || run_->gen != gen) return;
    Run& rr = *run_;
    const auto& x = rr.xfer();
    // Byte-wise forward copy: when dst trails src by less than a chunk, bytes
    // this chunk wrote earlier are the source of later ones.
    const std::int64_t d = static_cast<std::int64_t>(x.dst) - static_cast<std::int64_t>(x.src);
    const std::uint32_t len = rr.chunk_len(i);
    if (d > 0 && static_cast<std::uint64_t>(d) < len) {
      std::byte* b = rr.buf->data();
      for (std::uint32_t j = static_cast<std::uint32_t>(d); j < len; ++j) b[j] = b[j - d];
    }
    dma_[1]->push(Dma::Op::Write, {rr.xfer_seg(2 * i + 1)}, rr.buf, [this, gen]() {
      if (!run_ || run_->gen != gen) return;
      if (++run_->chunk == run_->chunks) {
        finish(ExceptionType::None);
      } else {
        transfer_next_chunk();
      }
    });
  });
}

void Mmae::fault(ExceptionType e) { finish(e); }

void Mmae::finish(ExceptionType outcome) {
  Run& r = *run_;
  TaskRecord rec = r.rec;
  rec.end = engine_.now();
  rec.outcome = outcome;
  for (int i = 0; i < 2; ++i) {
    rec.stall_translation += stats_.dma[i].stall_translation - r.dma_at_start[i].stall_translation;
    rec.stall_memory += stats_.dma[i].stall_memory - r.dma_at_start[i].stall_memory;
    rec.lines += stats_.dma[i].requests - r.dma_at_start[i].requests;
  }
  if (rec.gemm && outcome == ExceptionType::None) {
    rec.flops = r.plan.task.flops();
    rec.peak_flops_per_cycle = cfg_.sa.peak_flops_per_cycle(r.plan.task.precision);
    stats_.flops += rec.flops;
  }
  ++stats_.tasks;
  if (outcome != ExceptionType::None) ++stats_.exceptions;
  records_.push_back(rec);

  const std::uint32_t maid = r.maid;
  stq_.report(maid);
  ++generation_;
  for (auto& d : dma_) d->reset();
  for (auto& l : lanes_) l->stop();
  run_.reset();
  mesh_.send({node_, node_, kMsgBytes, noc::MsgClass::Response}, [this, maid, outcome]() {
    stq_.retire(maid);
    if (on_report_) on_report_(maid, outcome);
  });
  start_next();
}

}  // namespace maco::mmae
