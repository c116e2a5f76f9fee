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

#include "maco/mem/memory.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

namespace maco::mem {

namespace {
constexpr Addr kNoLine = ~Addr{0};
constexpr std::uint32_t kReqBytes = 16;
constexpr std::uint32_t kDataBytes = 64;
}  // namespace

// --- FunctionalMemory -----------------------------------------------------------

FunctionalMemory::Page* FunctionalMemory::find(std::uint64_t key) const {
  if (key == last_key_) return last_page_;
  auto it = pages_.find(key);
  if (it == pages_.end()) return nullptr;
  last_key_ = key;
  last_page_ = it->second.get();
  return last_page_;
}

void FunctionalMemory::read(Addr addr, std::span<std::byte> out) const {
  std::size_t done = 0;
  while (done < out.size()) {
    const Addr a = addr + done;
    const std::uint64_t off = a % kPage;
    const std::size_t n = std::min<std::size_t>(out.size() - done, kPage - off);
    if (const Page* p = find(a / kPage)) {
      std::memcpy(out.data() + done, p->data() + off, n);
    } else {
      std::memset(out.data() + done, 0, n);
    }
    done += n;
  }
}

void FunctionalMemory::write(Addr addr, std::span<const std::byte> in) {
  std::size_t done = 0;
  while (done < in.size()) {
    const Addr a = addr + done;
    const std::uint64_t key = a / kPage;
    const std::uint64_t off = a % kPage;
    const std::size_t n = std::min<std::size_t>(in.size() - done, kPage - off);
    Page* p = find(key);
    if (!p) {
      auto& slot = pages_[key];
      slot = std::make_unique<Page>();
      slot->fill(std::byte{0});
      p = slot.get();
      last_key_ = key;
      last_page_ = p;
    }
    std::memcpy(p->data() + off, in.data() + done, n);
    done += n;
  }
}

void FunctionalMemory::fill(Addr addr, std::uint64_t bytes, std::byte value) {
  std::array<std::byte, 4096> buf;
  buf.fill(value);
  while (bytes > 0) {
    const std::size_t n = std::min<std::uint64_t>(bytes, buf.size() - addr % buf.size());
    write(addr, std::span<const std::byte>(buf.data(), n));
    addr += n;
    bytes -= n;
  }
}

char moesi_char(Moesi s) {
  switch (s) {
    case Moesi::I: return 'I';
    case Moesi::S: return 'S';
    case Moesi::E: return 'E';
    case Moesi::O: return 'O';
    case Moesi::M: return 'M';
  }
  return '?';
}

// --- internals ------------------------------------------------------------------

struct MemorySystem::Impl {
  struct L3Way {
    Addr line = kNoLine;
    std::uint64_t stamp = 0;
    bool dirty = false;
    bool locked = false;
  };
  struct PLine {
    Addr line = kNoLine;
    Moesi st = Moesi::I;
    std::uint64_t stamp = 0;
  };
  struct L1Line {
    Addr line = kNoLine;
    std::uint64_t stamp = 0;
  };
  struct Private {
    std::vector<L1Line> l1;
    std::vector<PLine> l2;
    std::vector<std::array<std::byte, kLineBytes>> data;  // parallel to l2
  };
  struct DirEntry {
    int owner = -1;
    Moesi owner_state = Moesi::I;
    std::uint16_t sharers = 0;
  };

  std::uint32_t l3_sets = 0, l3_ways = 0;
  std::uint32_t l2_sets = 0, l2_ways = 0;
  std::uint32_t l1_sets = 0, l1_ways = 0;
  std::vector<L3Way> l3;
  std::array<Private, kMaxNodes> priv;
  std::unordered_map<Addr, DirEntry> dir;
  std::array<sim::Tick, kMaxNodes> mc_free{};
  std::uint64_t stamp = 0;
  FunctionalMemory shadow;

  std::uint32_t l3_set_index(Addr p) const {
    return static_cast<std::uint32_t>((((p >> 6) & 7) | ((p >> 13) << 3)) & (l3_sets - 1));
  }
  L3Way* l3_set(Addr p) { return &l3[(std::size_t{home_of(p)} * l3_sets + l3_set_index(p)) * l3_ways]; }
  const L3Way* l3_set(Addr p) const {
    return &l3[(std::size_t{home_of(p)} * l3_sets + l3_set_index(p)) * l3_ways];
  }
  L3Way* l3_find(Addr line) {
    L3Way* s = l3_set(line);
    for (std::uint32_t w = 0; w < l3_ways; ++w) {
      if (s[w].line == line) return &s[w];
    }
    return nullptr;
  }

  Private& node(std::uint32_t n) {
    Private& p = priv[n];
    if (p.l2.empty()) {
      p.l1.resize(std::size_t{l1_sets} * l1_ways);
      p.l2.resize(std::size_t{l2_sets} * l2_ways);
      p.data.resize(p.l2.size());
    }
    return p;
  }
  PLine* l2_find(std::uint32_t n, Addr line, std::size_t* idx = nullptr) {
    Private& p = priv[n];
    if (p.l2.empty()) return nullptr;
    const std::size_t base = ((line >> 6) % l2_sets) * l2_ways;
    for (std::uint32_t w = 0; w < l2_ways; ++w) {
      if (p.l2[base + w].line == line) {
        if (idx) *idx = base + w;
        return &p.l2[base + w];
      }
    }
    return nullptr;
  }
  L1Line* l1_find(std::uint32_t n, Addr line) {
    Private& p = priv[n];
    if (p.l1.empty()) return nullptr;
    const std::size_t base = ((line >> 6) % l1_sets) * l1_ways;
    for (std::uint32_t w = 0; w < l1_ways; ++w) {
      if (p.l1[base + w].line == line) return &p.l1[base + w];
    }
    return nullptr;
  }
  void l1_fill(std::uint32_t n, Addr line) {
    Private& p = node(n);
    if (L1Line* l = l1_find(n, line)) {
      l->stamp = ++stamp;
      return;
    }
    const std::size_t base = ((line >> 6) % l1_sets) * l1_ways;
    std::size_t victim = base;
    for (std::uint32_t w = 0; w < l1_ways; ++w) {
      if (p.l1[base + w].line == kNoLine) {
        victim = base + w;
        break;
      }
      if (p.l1[base + w].stamp < p.l1[victim].stamp) victim = base + w;
    }
    p.l1[victim] = L1Line{line, ++stamp};
  }
  void l1_drop(std::uint32_t n, Addr line) {
    if (L1Line* l = l1_find(n, line)) *l = L1Line{};
  }
};

MemorySystem::MemorySystem(sim::Engine& engine, const sim::Clocks& clocks, noc::Mesh& mesh, CacheConfig cfg)
    : impl_(std::make_unique<Impl>()), engine_(engine), clocks_(clocks), mesh_(mesh), cfg_(cfg) {
  auto geometry = [](std::uint32_t bytes, std::uint32_t ways, const char* what) {
    if (ways == 0 || bytes % (kLineBytes * ways) != 0 || bytes / (kLineBytes * ways) == 0) {
      throw ConfigError(std::string(what) + " geometry is not a whole number of sets");
    }
    return bytes / (kLineBytes * ways);
  };
  impl_->l1_sets = geometry(cfg_.l1_bytes, cfg_.l1_ways, "L1D");
  impl_->l1_ways = cfg_.l1_ways;
  impl_->l2_sets = geometry(cfg_.l2_bytes, cfg_.l2_ways, "L2");
  impl_->l2_ways = cfg_.l2_ways;
  impl_->l3_sets = geometry(cfg_.l3_slice_bytes, cfg_.l3_ways, "L3 slice");
  impl_->l3_ways = cfg_.l3_ways;
  if (!std::has_single_bit(impl_->l3_sets) || impl_->l3_sets < 8) {
    throw ConfigError("L3 slice must have a power-of-two number of sets, at least 8");
  }
  if (cfg_.lock_fraction < 0.0 || cfg_.lock_fraction > 1.0) throw ConfigError("lock fraction must be in [0, 1]");
  if (cfg_.l1_cycles == 0 || cfg_.l2_cycles == 0 || cfg_.l3_cycles == 0 || cfg_.mem_cycles == 0) {
    throw ConfigError("cache and memory latencies must be positive");
  }
  impl_->l3.resize(std::size_t{kMaxNodes} * impl_->l3_sets * impl_->l3_ways);
}

MemorySystem::~MemorySystem() = default;

void MemorySystem::enable_checker(bool on) {
  checker_ = on;
  if (on) {
    impl_->shadow = FunctionalMemory{};
  }
}

std::uint32_t MemorySystem::l3_set_of(Addr paddr) const { return impl_->l3_set_index(paddr); }

bool MemorySystem::l3_present(Addr paddr) const {
  const auto* s = impl_->l3_set(line_of(paddr));
  for (std::uint32_t w = 0; w < impl_->l3_ways; ++w) {
    if (s[w].line == line_of(paddr)) return true;
  }
  return false;
}

bool MemorySystem::l3_locked(Addr paddr) const {
  const auto* s = impl_->l3_set(line_of(paddr));
  for (std::uint32_t w = 0; w < impl_->l3_ways; ++w) {
    if (s[w].line == line_of(paddr)) return s[w].locked;
  }
  return false;
}

Moesi MemorySystem::private_state(std::uint32_t node, Addr paddr) const {
  auto* self = const_cast<Impl*>(impl_.get());
  const auto* l = self->l2_find(node, line_of(paddr));
  return l ? l->st : Moesi::I;
}

// --- timing helpers ---------------------------------------------------------------

namespace {

sim::Tick mmae_cycles(const sim::Clocks& c, std::uint64_t n) { return c.cycles(n, sim::Domain::Mmae); }

}  // namespace

sim::Tick MemorySystem::mem_fetch(std::uint32_t home, sim::Tick t) {
  sim::Tick& free = impl_->mc_free[home];
  const sim::Tick start = std::max(t, free);
  free = start + mmae_cycles(clocks_, cfg_.mem_line_cycles);
  return start + mmae_cycles(clocks_, cfg_.mem_cycles);
}

void MemorySystem::mem_write_traffic(std::uint32_t home, sim::Tick t) {
  sim::Tick& free = impl_->mc_free[home];
  free = std::max(t, free) + mmae_cycles(clocks_, cfg_.mem_line_cycles);
}

// Allocate an L3 way for `line` at time t (line must be absent). Dirty
// victims cost a memory write on the home controller.
void* MemorySystem::l3_install(Addr line, sim::Tick t, bool dirty) {
  Impl::L3Way* set = impl_->l3_set(line);
  Impl::L3Way* victim = nullptr;
  for (std::uint32_t w = 0; w < impl_->l3_ways; ++w) {
    Impl::L3Way& way = set[w];
    if (way.line == kNoLine) {
      victim = &way;
      break;
    }
    if (way.locked) continue;
    if (!victim || way.stamp < victim->stamp) victim = &way;
  }
  if (!victim) throw ProtocolError("L3 set has no evictable way");
  if (victim->line != kNoLine) {
    if (victim->locked) throw ProtocolError("locked L3 line selected as victim");
    if (log_evictions_) evictions_.push_back(Eviction{victim->line, engine_.now(), victim->locked});
    if (victim->dirty) {
      ++stats_[home_of(victim->line)].mem_writes;
      mem_write_traffic(home_of(victim->line), t);
    }
  }
  *victim = Impl::L3Way{line, ++impl_->stamp, dirty, false};
  return victim;
}

// L3 lookup on behalf of `node` for a data access; installs on a miss and
// returns the time the data is available at the home.
sim::Tick MemorySystem::l3_access(std::uint32_t node, Addr line, sim::Tick t, bool write, bool need_data) {
  ++l3_lookups_;
  const std::uint32_t home = home_of(line);
  const sim::Tick tag_done = t + mmae_cycles(clocks_, cfg_.l3_cycles);
  if (Impl::L3Way* w = impl_->l3_find(line)) {
    ++stats_[node].l3_hits;
    w->stamp = ++impl_->stamp;
    w->dirty = w->dirty || write;
    return tag_done;
  }
  ++stats_[node].l3_misses;
  sim::Tick ready = tag_done;
  if (need_data) {
    ++stats_[home].mem_reads;
    ready = mem_fetch(home, tag_done);
  }
  l3_install(line, t, write);
  return ready;
}

// --- private caches ----------------------------------------------------------------

void MemorySystem::private_evict(std::uint32_t n, std::size_t idx) {
  Impl& im = *impl_;
  Impl::PLine& pl = im.priv[n].l2[idx];
  const Addr line = pl.line;
  const std::uint32_t home = home_of(line);
  im.l1_drop(n, line);
  auto it = im.dir.find(line);
  if (it == im.dir.end()) throw ProtocolError("evicting a private line unknown to the directory");
  Impl::DirEntry& d = it->second;
  if (pl.st == Moesi::M || pl.st == Moesi::O) {
    // PutM: data back to L3.
    mem_.write(line, im.priv[n].data[idx]);
    ++stats_[n].writebacks;
    mesh_.reserve({n, home, kDataBytes, noc::MsgClass::Request});
    if (Impl::L3Way* w = im.l3_find(line)) {
      w->dirty = true;
    } else {
      l3_install(line, engine_.now(), true);
    }
  } else {
    mesh_.reserve({n, home, kReqBytes, noc::MsgClass::Request});
  }
  if (d.owner == static_cast<int>(n)) {
    d.owner = -1;
    d.owner_state = Moesi::I;
  }
  d.sharers &= static_cast<std::uint16_t>(~(1u << n));
  if (d.owner < 0 && d.sharers == 0) im.dir.erase(it);
  pl = Impl::PLine{};
}

// Make room for and install `line` in node n's L2. Returns the slot index.
std::size_t MemorySystem::private_install(std::uint32_t n, Addr line) {
  Impl& im = *impl_;
  Impl::Private& p = im.node(n);
  const std::size_t base = ((line >> 6) % im.l2_sets) * im.l2_ways;
  std::size_t victim = base;
  bool found_free = false;
  for (std::uint32_t w = 0; w < im.l2_ways; ++w) {
    if (p.l2[base + w].line == kNoLine) {
      victim = base + w;
      found_free = true;
      break;
    }
    if (p.l2[base + w].stamp < p.l2[victim].stamp) victim = base + w;
  }
  if (!found_free) private_evict(n, victim);
  p.l2[victim] = Impl::PLine{line, Moesi::I, ++im.stamp};
  return victim;
}

// Remove node n's copy because another agent needs exclusivity. Dirty data
// is returned through `out` when provided.
void MemorySystem::private_invalidate(std::uint32_t n, Addr line) {
  Impl& im = *impl_;
  std::size_t idx = 0;
  Impl::PLine* pl = im.l2_find(n, line, &idx);
  if (!pl) throw ProtocolError("directory lists a node that does not hold the line");
  im.l1_drop(n, line);
  ++stats_[n].invalidations;
  *pl = Impl::PLine{};
}

// Write a dirty owner's data back and leave it clean (M->E, O->S).
void MemorySystem::clean_owner(Addr line) {
  Impl& im = *impl_;
  auto it = im.dir.find(line);
  if (it == im.dir.end()) return;
  Impl::DirEntry& d = it->second;
  if (d.owner < 0 || (d.owner_state != Moesi::M && d.owner_state != Moesi::O)) return;
  const auto o = static_cast<std::uint32_t>(d.owner);
  std::size_t idx = 0;
  Impl::PLine* pl = im.l2_find(o, line, &idx);
  if (!pl) throw ProtocolError("directory owner does not hold the line");
  mem_.write(line, im.priv[o].data[idx]);
  ++stats_[o].writebacks;
  if (Impl::L3Way* w = im.l3_find(line)) {
    w->dirty = true;
  } else {
    l3_install(line, engine_.now(), true);
  }
  if (d.owner_state == Moesi::M) {
    pl->st = Moesi::E;
    d.owner_state = Moesi::E;
  } else {
    pl->st = Moesi::S;
    d.sharers |= static_cast<std::uint16_t>(1u << o);
    d.owner = -1;
    d.owner_state = Moesi::I;
  }
}

// Round trip home -> n -> home starting at t; returns the arrival back home.
sim::Tick MemorySystem::snoop(std::uint32_t home, std::uint32_t n, sim::Tick t, std::uint32_t reply_bytes) {
  const sim::Tick there = mesh_.reserve_at({home, n, kReqBytes, noc::MsgClass::Request}, t);
  return mesh_.reserve_at({n, home, reply_bytes, noc::MsgClass::Response}, there);
}

void MemorySystem::check_read(Addr paddr, std::span<const std::byte> got) {
  if (!checker_) return;
  ++checked_reads_;
  std::array<std::byte, kLineBytes> want;
  impl_->shadow.read(paddr, std::span<std::byte>(want.data(), got.size()));
  if (std::memcmp(want.data(), got.data(), got.size()) != 0) ++violations_;
}

void MemorySystem::shadow_write(Addr paddr, std::span<const std::byte> data) {
  if (checker_) impl_->shadow.write(paddr, data);
}

// --- MMAE path ------------------------------------------------------------------------

void MemorySystem::dma_read(std::uint32_t node, Addr paddr, std::uint32_t len, std::byte* dst, Callback done) {
  if (line_of(paddr) != line_of(paddr + len - 1)) throw Error("DMA access crosses a line boundary");
  if (cfg_.ideal) {
    mem_.read(paddr, std::span<std::byte>(dst, len));
    engine_.schedule_in(0, std::move(done));
    return;
  }
  const std::uint32_t home = home_of(paddr);
  mesh_.send({node, home, kReqBytes, noc::MsgClass::Request},
             [this, node, paddr, len, dst, home, done = std::move(done)]() mutable {
               const Addr line = line_of(paddr);
               const sim::Tick t = engine_.now();
               sim::Tick ready = t;
               auto it = impl_->dir.find(line);
               if (it != impl_->dir.end() && it->second.owner >= 0 &&
                   (it->second.owner_state == Moesi::M || it->second.owner_state == Moesi::O)) {
                 ready = snoop(home, static_cast<std::uint32_t>(it->second.owner), t, kDataBytes);
                 clean_owner(line);
               }
               ready = std::max(ready, l3_access(node, line, t, false, true));
               mem_.read(paddr, std::span<std::byte>(dst, len));
               check_read(paddr, std::span<const std::byte>(dst, len));
               mesh_.send_at({home, node, kDataBytes, noc::MsgClass::Response}, ready, std::move(done));
             });
}

void MemorySystem::dma_write(std::uint32_t node, Addr paddr, std::uint32_t len, const std::byte* src,
                             Callback done) {
  if (line_of(paddr) != line_of(paddr + len - 1)) throw Error("DMA access crosses a line boundary");
  if (cfg_.ideal) {
    mem_.write(paddr, std::span<const std::byte>(src, len));
    shadow_write(paddr, std::span<const std::byte>(src, len));
    engine_.schedule_in(0, std::move(done));
    return;
  }
  const std::uint32_t home = home_of(paddr);
  mesh_.send({node, home, kDataBytes, noc::MsgClass::Request},
             [this, node, paddr, len, src, home, done = std::move(done)]() mutable {
               const Addr line = line_of(paddr);
               const sim::Tick t = engine_.now();
               sim::Tick ready = t;
               auto it = impl_->dir.find(line);
               if (it != impl_->dir.end()) {
                 // Partial writes merge with the newest data, so pull dirty data first.
                 if (len < kLineBytes) clean_owner(line);
                 Impl::DirEntry d = it->second;
                 for (std::uint32_t n = 0; n < kMaxNodes; ++n) {
                   const bool holds = d.owner == static_cast<int>(n) || (d.sharers >> n) & 1u;
                   if (!holds) continue;
                   ready = std::max(ready, snoop(home, n, t, kReqBytes));
                   private_invalidate(n, line);
                 }
                 impl_->dir.erase(line);
               }
               ready = std::max(ready, l3_access(node, line, t, true, len < kLineBytes));
               mem_.write(paddr, std::span<const std::byte>(src, len));
               shadow_write(paddr, std::span<const std::byte>(src, len));
               mesh_.send_at({home, node, kReqBytes, noc::MsgClass::Response}, ready, std::move(done));
             });
}

void MemorySystem::stash(std::uint32_t node, Addr paddr, Callback done) {
  ++stats_[node].stash_requests;
  const Addr line = line_of(paddr);
  if (cfg_.ideal) {
    if (!impl_->l3_find(line)) l3_install(line, engine_.now(), false);
    engine_.schedule_in(0, std::move(done));
    return;
  }
  const std::uint32_t home = home_of(paddr);
  mesh_.send({node, home, kReqBytes, noc::MsgClass::Request}, [this, node, line, home, done = std::move(done)]() mutable {
    const sim::Tick t = engine_.now();
    sim::Tick ready = t + mmae_cycles(clocks_, cfg_.l3_cycles);
    if (Impl::L3Way* w = impl_->l3_find(line)) {
      w->stamp = ++impl_->stamp;
    } else {
      ++stats_[node].stash_fills;
      ++stats_[home].mem_reads;
      ready = mem_fetch(home, ready);
      l3_install(line, t, false);
    }
    mesh_.send_at({home, node, kReqBytes, noc::MsgClass::Response}, ready, std::move(done));
  });
}

// --- core path ------------------------------------------------------------------------

void MemorySystem::cpu_access(std::uint32_t node, Addr paddr, CpuOp op, std::uint32_t len, std::byte* buf,
                              Callback done) {
  if (len == 0 || line_of(paddr) != line_of(paddr + len - 1)) throw Error("core access crosses a line boundary");
  Impl& im = *impl_;
  const Addr line = line_of(paddr);
  const std::uint32_t off = static_cast<std::uint32_t>(paddr - line);
  const bool want_m = op != CpuOp::Read;
  std::size_t idx = 0;
  Impl::PLine* pl = im.l2_find(node, line, &idx);
  const bool permitted = pl && (!want_m || pl->st == Moesi::M || pl->st == Moesi::E);
  if (permitted) {
    const bool l1_hit = im.l1_find(node, line) != nullptr;
    pl->stamp = ++im.stamp;
    auto& data = im.priv[node].data[idx];
    if (op == CpuOp::Read) {
      std::memcpy(buf, data.data() + off, len);
      check_read(paddr, std::span<const std::byte>(buf, len));
    } else {
      if (pl->st == Moesi::E) {
        pl->st = Moesi::M;
        im.dir[line].owner_state = Moesi::M;
      }
      if (op == CpuOp::Write) {
        std::memcpy(data.data() + off, buf, len);
        shadow_write(paddr, std::span<const std::byte>(buf, len));
      }
    }
    im.l1_fill(node, line);
    if (l1_hit) {
      ++stats_[node].l1_hits;
    } else {
      ++stats_[node].l2_hits;
    }
    engine_.schedule_in(mmae_cycles(clocks_, l1_hit ? cfg_.l1_cycles : cfg_.l2_cycles), std::move(done));
    return;
  }
  ++stats_[node].private_misses;
  const std::uint32_t home = home_of(line);
  const sim::Tick issue = engine_.now() + mmae_cycles(clocks_, cfg_.l2_cycles);
  mesh_.send_at({node, home, kReqBytes, noc::MsgClass::Request}, issue,
                [this, node, paddr, op, len, buf, home, done = std::move(done)]() mutable {
                  const sim::Tick ready = home_transaction(node, paddr, op, len, buf, home);
                  mesh_.send_at({home, node, kDataBytes, noc::MsgClass::Response}, ready, std::move(done));
                });
}

// GetS / GetM processed atomically at the home. Returns when the response
// may leave the home.
sim::Tick MemorySystem::home_transaction(std::uint32_t r, Addr paddr, CpuOp op, std::uint32_t len, std::byte* buf,
                                         std::uint32_t home) {
  Impl& im = *impl_;
  const Addr line = line_of(paddr);
  const std::uint32_t off = static_cast<std::uint32_t>(paddr - line);
  const bool want_m = op != CpuOp::Read;
  const sim::Tick t = engine_.now();
  sim::Tick ready = t + mmae_cycles(clocks_, cfg_.l3_cycles);

  Impl::DirEntry d = im.dir.count(line) ? im.dir[line] : Impl::DirEntry{};
  const std::uint16_t rbit = static_cast<std::uint16_t>(1u << r);

  // Source of the newest data.
  std::array<std::byte, kLineBytes> data;
  if (d.owner >= 0 && d.owner != static_cast<int>(r)) {
    const auto o = static_cast<std::uint32_t>(d.owner);
    std::size_t oidx = 0;
    Impl::PLine* opl = im.l2_find(o, line, &oidx);
    if (!opl) throw ProtocolError("directory owner does not hold the line");
    ready = std::max(ready, snoop(home, o, t, kDataBytes));
    data = im.priv[o].data[oidx];
    if (want_m) {
      private_invalidate(o, line);
      d.owner = -1;
      d.owner_state = Moesi::I;
    } else if (d.owner_state == Moesi::M) {
      opl->st = Moesi::O;
      d.owner_state = Moesi::O;
    } else if (d.owner_state == Moesi::E) {
      opl->st = Moesi::S;
      d.sharers |= static_cast<std::uint16_t>(1u << o);
      d.owner = -1;
      d.owner_state = Moesi::I;
    }
    if (!want_m && d.owner_state == Moesi::O) {
      // owner keeps the dirty copy; memory stays stale
    }
  } else if (std::size_t ridx = 0; d.owner == static_cast<int>(r) || (d.sharers & rbit)) {
    Impl::PLine* rpl = im.l2_find(r, line, &ridx);
    if (!rpl) throw ProtocolError("directory lists the requester but its L2 lacks the line");
    data = im.priv[r].data[ridx];
  } else {
    ready = std::max(ready, l3_access(r, line, t, false, true));
    mem_.read(line, data);
  }

  if (want_m) {
    for (std::uint32_t n = 0; n < kMaxNodes; ++n) {
      if (n == r || !((d.sharers >> n) & 1u)) continue;
      ready = std::max(ready, snoop(home, n, t, kReqBytes));
      private_invalidate(n, line);
    }
    d.sharers = 0;
    d.owner = static_cast<int>(r);
    d.owner_state = Moesi::M;
  }

  // Install or upgrade in the requester.
  std::size_t ridx = 0;
  Impl::PLine* rpl = im.l2_find(r, line, &ridx);
  if (!rpl) {
    // Write the directory entry before installing: the install may evict
    // another line and touch the directory map.
    ridx = private_install(r, line);
    rpl = &im.priv[r].l2[ridx];
  }
  im.priv[r].data[ridx] = data;
  if (want_m) {
    rpl->st = Moesi::M;
  } else if (d.owner == static_cast<int>(r)) {
    rpl->st = d.owner_state;
  } else if (d.owner < 0 && (d.sharers & ~rbit) == 0) {
    rpl->st = Moesi::E;
    d.owner = static_cast<int>(r);
    d.owner_state = Moesi::E;
    d.sharers = 0;
  } else {
    rpl->st = Moesi::S;
    d.sharers |= rbit;
  }
  rpl->stamp = ++im.stamp;
  im.dir[line] = d;
  im.l1_fill(r, line);

  auto& rdata = im.priv[r].data[ridx];
  if (op == CpuOp::Read) {
    std::memcpy(buf, rdata.data() + off, len);
    check_read(paddr, std::span<const std::byte>(buf, len));
  } else if (op == CpuOp::Write) {
    std::memcpy(rdata.data() + off, buf, len);
    shadow_write(paddr, std::span<const std::byte>(buf, len));
  }
  return ready;
}

// --- locking --------------------------------------------------------------------------

void MemorySystem::lock_range(Addr paddr, std::uint64_t bytes) {
  if (bytes == 0) return;
  Impl& im = *impl_;
  const Addr first = line_of(paddr);
  const Addr last = line_of(paddr + bytes - 1);
  const auto budget = static_cast<std::uint32_t>(std::floor(cfg_.lock_fraction * im.l3_ways));
  // Locked ways per touched set after the operation.
  std::unordered_map<std::size_t, std::uint32_t> extra;
  for (Addr l = first; l <= last; l += kLineBytes) {
    Impl::L3Way* w = im.l3_find(l);
    if (w && w->locked) continue;
    ++extra[static_cast<std::size_t>(im.l3_set(l) - im.l3.data())];
  }
  for (const auto& [set_base, add] : extra) {
    std::uint32_t locked = 0;
    for (std::uint32_t w = 0; w < im.l3_ways; ++w) locked += im.l3[set_base + w].locked ? 1 : 0;
    if (locked + add > budget) {
      std::ostringstream os;
      os << "locking would exceed " << budget << " locked ways in an L3 set";
      throw LockCapacity(os.str());
    }
  }
  for (Addr l = first; l <= last; l += kLineBytes) {
    Impl::L3Way* w = im.l3_find(l);
    if (!w) {
      ++stats_[home_of(l)].mem_reads;
      w = static_cast<Impl::L3Way*>(l3_install(l, engine_.now(), false));
    }
    w->locked = true;
  }
}

void MemorySystem::unlock_range(Addr paddr, std::uint64_t bytes) {
  if (bytes == 0) return;
  for (Addr l = line_of(paddr); l <= line_of(paddr + bytes - 1); l += kLineBytes) {
    if (Impl::L3Way* w = impl_->l3_find(l)) w->locked = false;
  }
}

// --- audit ----------------------------------------------------------------------------

void MemorySystem::audit() const {
  Impl& im = *impl_;
  auto fail = [](const std::string& what, Addr line) {
    std::ostringstream os;
    os << what << " (line 0x" << std::hex << line << ")";
    throw ProtocolError(os.str());
  };
  std::size_t private_lines = 0;
  for (std::uint32_t n = 0; n < kMaxNodes; ++n) {
    const auto& p = im.priv[n];
    for (const auto& l1 : p.l1) {
      if (l1.line != kNoLine && !im.l2_find(n, l1.line)) fail("L1 line missing from L2", l1.line);
    }
    for (const auto& pl : p.l2) {
      if (pl.line == kNoLine) continue;
      ++private_lines;
      auto it = im.dir.find(pl.line);
      if (it == im.dir.end()) fail("private line without directory entry", pl.line);
      const auto& d = it->second;
      if (pl.st == Moesi::S) {
        if (!((d.sharers >> n) & 1u)) fail("S copy not in sharer set", pl.line);
      } else {
        if (d.owner != static_cast<int>(n) || d.owner_state != pl.st) fail("owner state mismatch", pl.line);
      }
    }
  }
  std::size_t dir_copies = 0;
  for (const auto& [line, d] : im.dir) {
    if (d.owner < 0 && d.sharers == 0) fail("empty directory entry", line);
    if (d.owner >= 0) {
      ++dir_copies;
      if (d.sharers & (1u << d.owner)) fail("owner also listed as sharer", line);
      if ((d.owner_state == Moesi::M || d.owner_state == Moesi::E) && d.sharers != 0) {
        fail("SWMR violated: exclusive owner with sharers", line);
      }
      if (d.owner_state == Moesi::S || d.owner_state == Moesi::I) fail("invalid owner state", line);
    }
    dir_copies += static_cast<std::size_t>(std::popcount(d.sharers));
  }
  if (dir_copies != private_lines) fail("directory copy count differs from private caches", 0);
}

}  // namespace maco::mem
