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

#include "maco/xlat/translation.hpp"

#include <algorithm>
#include <bit>

namespace maco::xlat {

namespace {
constexpr Addr kTableRegion = Addr{1} << 46;
constexpr std::uint64_t kRandomFrameBase = std::uint64_t{1} << 20;
constexpr std::uint64_t kRandomFrameSpan = std::uint64_t{1} << 24;
}  // namespace

// --- PageTable ----------------------------------------------------------------

PageTable::PageTable(std::uint32_t page_bytes, std::uint64_t seed)
    : page_bytes_(page_bytes), next_table_addr_(kTableRegion), rng_(seed) {
  if (page_bytes < 4096 || !std::has_single_bit(page_bytes)) {
    throw ConfigError("page size must be a power of two of at least 4096 bytes");
  }
  page_shift_ = static_cast<std::uint32_t>(std::countr_zero(page_bytes));
}

void PageTable::ensure_tables(std::uint64_t vpn) {
  const std::uint32_t bpl = bits_per_level();
  const std::uint64_t table_bytes = std::max<std::uint64_t>(page_bytes_, (std::uint64_t{1} << bpl) * 8);
  for (int l = 0; l < kLevels; ++l) {
    const std::uint64_t prefix = vpn >> (bpl * (kLevels - l));
    const std::uint64_t key = (static_cast<std::uint64_t>(l) << 56) | prefix;
    if (!tables_.contains(key)) {
      tables_.emplace(key, next_table_addr_);
      next_table_addr_ += table_bytes;
    }
  }
}

std::uint64_t PageTable::alloc_random_frame() {
  std::uniform_int_distribution<std::uint64_t> dist(kRandomFrameBase, kRandomFrameBase + kRandomFrameSpan - 1);
  for (;;) {
    const std::uint64_t f = dist(rng_);
    if (used_frames_.insert(f).second) return f;
  }
}

void PageTable::map_region(Addr vbase, std::uint64_t bytes, MapPolicy policy) {
  if (bytes == 0) return;
  const std::uint64_t first = vpn(vbase);
  const std::uint64_t last = vpn(vbase + bytes - 1);
  if ((vbase + bytes - 1) >> kVaBits) throw ConfigError("region exceeds the 48-bit virtual address space");
  for (std::uint64_t v = first; v <= last; ++v) {
    if (ptes_.contains(v)) throw DoubleMap("page already mapped");
    if (policy == MapPolicy::Identity && used_frames_.contains(v)) throw DoubleMap("physical frame already in use");
  }
  for (std::uint64_t v = first; v <= last; ++v) {
    std::uint64_t pfn = v;
    if (policy == MapPolicy::Random) {
      pfn = alloc_random_frame();
    } else {
      used_frames_.insert(v);
    }
    ptes_.emplace(v, Pte{pfn, false});
    ensure_tables(v);
  }
}

void PageTable::poison_region(Addr vbase, std::uint64_t bytes) {
  if (bytes == 0) return;
  for (std::uint64_t v = vpn(vbase); v <= vpn(vbase + bytes - 1); ++v) {
    auto it = ptes_.find(v);
    if (it != ptes_.end()) it->second.poisoned = true;
  }
}

void PageTable::unmap_region(Addr vbase, std::uint64_t bytes) {
  if (bytes == 0) return;
  for (std::uint64_t v = vpn(vbase); v <= vpn(vbase + bytes - 1); ++v) {
    auto it = ptes_.find(v);
    if (it == ptes_.end()) continue;
    used_frames_.erase(it->second.pfn);
    ptes_.erase(it);
  }
}

XlatResult PageTable::lookup(Addr va) const {
  auto it = ptes_.find(vpn(va));
  if (it == ptes_.end()) return {0, XlatStatus::PageFault};
  const Addr pa = (it->second.pfn << page_shift_) | (va & (page_bytes_ - 1));
  return {pa, it->second.poisoned ? XlatStatus::DataAbort : XlatStatus::Ok};
}

std::array<Addr, kLevels> PageTable::walk_path(Addr va) const {
  std::array<Addr, kLevels> path{};
  const std::uint64_t v = vpn(va);
  const std::uint32_t bpl = bits_per_level();
  const std::uint64_t mask = (std::uint64_t{1} << bpl) - 1;
  for (int l = 0; l < kLevels; ++l) {
    const std::uint64_t prefix = v >> (bpl * (kLevels - l));
    auto it = tables_.find((static_cast<std::uint64_t>(l) << 56) | prefix);
    if (it == tables_.end()) break;
    const std::uint64_t index = (v >> (bpl * (kLevels - 1 - l))) & mask;
    path[l] = it->second + index * 8;
  }
  return path;
}

// --- LruTlb -------------------------------------------------------------------

LruTlb::LruTlb(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("TLB capacity must be positive");
}

std::optional<XlatResult> LruTlb::lookup(std::uint64_t vpn) {
  auto it = map_.find(vpn);
  if (it == map_.end()) return std::nullopt;
  lru_.splice(lru_.begin(), lru_, it->second);
  return it->second->r;
}

void LruTlb::insert(std::uint64_t vpn, XlatResult r) {
  auto it = map_.find(vpn);
  if (it != map_.end()) {
    it->second->r = r;
    lru_.splice(lru_.begin(), lru_, it->second);
    return;
  }
  if (map_.size() == capacity_) {
    map_.erase(lru_.back().vpn);
    lru_.pop_back();
  }
  lru_.push_front(Entry{vpn, r});
  map_.emplace(vpn, lru_.begin());
}

void LruTlb::clear() {
  lru_.clear();
  map_.clear();
}

std::vector<std::uint64_t> LruTlb::contents() const {
  std::vector<std::uint64_t> out;
  out.reserve(lru_.size());
  for (const auto& e : lru_) out.push_back(e.vpn);
  return out;
}

// --- Mmu ----------------------------------------------------------------------

Mmu::Mmu(sim::Engine& engine, const sim::Clocks& clocks, const PageTable& pt, MmuConfig cfg)
    : engine_(engine),
      clocks_(clocks),
      pt_(pt),
      cfg_(cfg),
      dtlb_(cfg.dtlb_entries),
      stlb_(cfg.stlb_entries) {
  if (cfg_.walkers == 0) throw ConfigError("at least one page walker is required");
  if (cfg_.ptw_level_cycles == 0) throw ConfigError("page walk latency must be positive");
}

std::optional<Mmu::Hit> Mmu::probe(Addr va, Requester who) {
  const std::uint64_t v = pt_.vpn(va);
  std::uint32_t cycles = 0;
  if (who == Requester::Cpu) {
    if (auto r = dtlb_.lookup(v)) {
      ++stats_.dtlb_hits;
      return Hit{XlatResult{(r->paddr & ~std::uint64_t{pt_.page_bytes() - 1}) | (va & (pt_.page_bytes() - 1)),
                            r->status},
                 cfg_.dtlb_hit_cycles};
    }
    ++stats_.dtlb_misses;
    cycles = cfg_.dtlb_hit_cycles;
  }
  if (auto r = stlb_.lookup(v)) {
    ++stats_.stlb_hits;
    if (who == Requester::Cpu) dtlb_.insert(v, *r);
    return Hit{XlatResult{(r->paddr & ~std::uint64_t{pt_.page_bytes() - 1}) | (va & (pt_.page_bytes() - 1)),
                          r->status},
               cycles + cfg_.stlb_hit_cycles};
  }
  ++stats_.stlb_misses;
  return std::nullopt;
}

void Mmu::walk(Addr va, Requester who, Done done, bool install) {
  const std::uint64_t v = pt_.vpn(va);
  const Addr offset = va & (pt_.page_bytes() - 1);
  Done wrapped = [offset, d = std::move(done), this](XlatResult r) {
    if (r.status != XlatStatus::PageFault) r.paddr = (r.paddr & ~std::uint64_t{pt_.page_bytes() - 1}) | offset;
    d(r);
  };
  auto [it, fresh] = inflight_.try_emplace(v);
  it->second.push_back(Waiter{who, install, std::move(wrapped)});
  if (!fresh) return;
  if (active_ < cfg_.walkers) {
    start_walk(v);
  } else {
    queued_.push_back(v);
  }
}

void Mmu::start_walk(std::uint64_t vpn) {
  ++active_;
  ++stats_.walks;
  stats_.ptw_accesses += kLevels;
  engine_.schedule_in(clocks_.cycles(walk_cycles(), sim::Domain::Mmae), [this, vpn] { finish_walk(vpn); });
}

void Mmu::finish_walk(std::uint64_t vpn) {
  --active_;
  const XlatResult r = pt_.lookup(vpn << pt_.page_shift());
  auto node = inflight_.extract(vpn);
  if (!queued_.empty()) {
    const std::uint64_t next = queued_.front();
    queued_.pop_front();
    start_walk(next);
  }
  for (auto& w : node.mapped()) {
    if (w.install && r.status != XlatStatus::PageFault) {
      if (w.who == Requester::Cpu) dtlb_.insert(vpn, r);
      if (w.who != Requester::Prewalk) stlb_.insert(vpn, r);
    }
  }
  for (auto& w : node.mapped()) w.done(r);
}

void Mmu::translate(Addr va, Requester who, Done done) {
  if (auto hit = probe(va, who)) {
    engine_.schedule_in(clocks_.cycles(hit->cycles, sim::Domain::Mmae),
                        [r = hit->result, d = std::move(done)] { d(r); });
    return;
  }
  walk(va, who, std::move(done), true);
}

// --- page heads ---------------------------------------------------------------

void append_page_heads(const TileAccessDescriptor& d, std::vector<Addr>& out) {
  const std::uint64_t page = d.page_bytes;
  const std::uint64_t span = d.cols * d.element_size;
  if (span == 0) return;
  for (std::uint64_t r = 0; r < d.rows; ++r) {
    const Addr start = d.base + ((d.r0 + r) * d.columns + d.c0) * d.element_size;
    const Addr end = start + span;
    Addr head = start;
    while (head < end) {
      if (out.empty() || out.back() / page != head / page) out.push_back(head);
      head = (head / page + 1) * page;
    }
  }
}

std::vector<Addr> predict_page_heads(const TileAccessDescriptor& d) {
  std::vector<Addr> out;
  append_page_heads(d, out);
  return out;
}

// --- MatlbLane ----------------------------------------------------------------

MatlbLane::MatlbLane(sim::Engine& engine, const sim::Clocks& clocks, Mmu& mmu, MatlbConfig cfg)
    : engine_(engine), clocks_(clocks), mmu_(mmu), cfg_(cfg) {
  if (cfg_.enabled && cfg_.lookahead + 1 > cfg_.capacity && cfg_.lookahead > 0) {
    throw ConfigError("mATLB lookahead must be smaller than its capacity");
  }
}

void MatlbLane::reset(HeadSource source) {
  ++generation_;
  entries_.clear();
  source_ = std::move(source);
  exhausted_ = !active();
  refill();
}

void MatlbLane::stop() {
  ++generation_;
  entries_.clear();
  source_ = nullptr;
  exhausted_ = true;
}

void MatlbLane::refill() {
  const std::size_t limit = std::min<std::size_t>(cfg_.capacity, cfg_.lookahead + 1);
  const std::uint32_t shift = mmu_.page_table().page_shift();
  while (!exhausted_ && entries_.size() < limit) {
    Addr head = 0;
    if (!source_(head)) {
      exhausted_ = true;
      break;
    }
    const std::uint64_t vpn = head >> shift;
    if (!entries_.empty() && entries_.back()->vpn == vpn) continue;
    auto e = std::make_shared<Entry>();
    e->vpn = vpn;
    entries_.push_back(e);
    ++stats_.prewalks;
    ++mmu_.stats().prewalks;
    if (auto hit = mmu_.probe(head, Requester::Prewalk)) {
      e->ready = true;
      e->ready_at = engine_.now() + clocks_.cycles(hit->cycles, sim::Domain::Mmae);
      e->result = hit->result;
      continue;
    }
    const std::uint64_t gen = generation_;
    mmu_.walk(
        head, Requester::Prewalk,
        [this, gen, e](XlatResult r) {
          if (gen != generation_) return;
          e->ready = true;
          e->ready_at = engine_.now();
          e->result = r;
          auto waiters = std::move(e->waiters);
          for (auto& w : waiters) w();
        },
        false);
  }
}

MatlbLane::Outcome MatlbLane::lookup(Addr va, XlatResult& out, std::function<void()> on_ready) {
  if (!active()) return Outcome::Miss;
  const std::uint32_t shift = mmu_.page_table().page_shift();
  const std::uint64_t vpn = va >> shift;
  while (!entries_.empty() && entries_.front()->vpn != vpn) {
    entries_.pop_front();
    ++stats_.dropped;
  }
  if (entries_.empty()) {
    ++stats_.misses;
    refill();
    return Outcome::Miss;
  }
  Entry& e = *entries_.front();
  Outcome res;
  if (e.ready && e.ready_at <= engine_.now()) {
    ++stats_.hits;
    out = e.result;
    if (out.status != XlatStatus::PageFault) {
      out.paddr = (out.paddr & ~((std::uint64_t{1} << shift) - 1)) | (va & ((std::uint64_t{1} << shift) - 1));
    }
    res = Outcome::Hit;
  } else {
    ++stats_.pending_hits;
    if (e.ready) {
      engine_.schedule_at(e.ready_at, std::move(on_ready));
    } else {
      e.waiters.push_back(std::move(on_ready));
    }
    res = Outcome::Pending;
  }
  refill();
  return res;
}

}  // namespace maco::xlat
