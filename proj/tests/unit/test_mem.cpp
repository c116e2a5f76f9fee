#include <memory>
#include <random>
#include <set>

#include "doctest.h"
#include "maco/mem/memory.hpp"

using namespace maco;
using namespace maco::mem;

namespace {

struct Rig {
  sim::Engine engine;
  sim::Clocks clocks;
  noc::Mesh mesh{engine, clocks};
  MemorySystem mem;
  explicit Rig(CacheConfig cfg = {}) : mem(engine, clocks, mesh, cfg) {}
};

// Closed-loop random traffic: each of `streams` agents issues a new access
// when its previous one completes.
struct Traffic {
  Rig& rig;
  std::mt19937_64 rng;
  std::vector<Addr> lines;
  std::uint64_t remaining;

  void issue(std::uint32_t node) {
    if (remaining == 0) return;
    --remaining;
    const Addr line = lines[rng() % lines.size()];
    const std::uint32_t off = static_cast<std::uint32_t>(rng() % 8) * 8;
    auto buf = std::make_shared<std::array<std::byte, 8>>();
    for (auto& b : *buf) b = static_cast<std::byte>(rng());
    auto next = [this, node, buf] { issue(node); };
    switch (rng() % 6) {
      case 0:
      case 1: rig.mem.cpu_access(node, line + off, CpuOp::Read, 8, buf->data(), next); break;
      case 2: rig.mem.cpu_access(node, line + off, CpuOp::Write, 8, buf->data(), next); break;
      case 3: rig.mem.cpu_access(node, line + off, CpuOp::Rfo, 8, buf->data(), next); break;
      case 4: rig.mem.dma_read(node, line + off, 8, buf->data(), next); break;
      case 5: rig.mem.dma_write(node, line + off, 8, buf->data(), next); break;
    }
  }
};

}  // namespace

TEST_SUITE("coherence") {
  TEST_CASE("random multi-node traffic keeps SWMR and data values") {
    CacheConfig cfg;
    cfg.l1_bytes = 1024;  // small caches force evictions and write-backs
    cfg.l2_bytes = 4096;
    cfg.l3_slice_bytes = 16 * 1024;
    Rig rig(cfg);
    rig.mem.enable_checker(true);
    rig.mem.enable_eviction_log(true);

    Traffic t{rig, std::mt19937_64(29), {}, 600000};
    // A hot set that all nodes share plus a wide set that overflows the caches.
    for (Addr i = 0; i < 48; ++i) t.lines.push_back(0x100000 + i * 64);
    for (Addr i = 0; i < 4000; ++i) t.lines.push_back(0x800000 + i * 64 * 37);
    // Locked lines must survive the pressure.
    const Addr locked = 0x4000000;
    rig.mem.lock_range(locked, 64 * 64);

    std::uint64_t audits = 0;
    rig.engine.set_post_event_hook([&] {
      if (rig.engine.events_processed() % 1009 == 0) {
        rig.mem.audit();
        ++audits;
      }
    });
    for (std::uint32_t n = 0; n < kMaxNodes; ++n) {
      for (int k = 0; k < 2; ++k) rig.engine.schedule_at(0, [&t, n] { t.issue(n); });
    }
    rig.engine.run();
    rig.mem.audit();

    CHECK(rig.engine.events_processed() >= 1'000'000);
    CHECK(audits > 950);
    CHECK(rig.mem.checker_violations() == 0);
    CHECK(rig.mem.checked_reads() > 100000);
    CHECK_FALSE(rig.mem.eviction_log().empty());
    for (const auto& ev : rig.mem.eviction_log()) {
      REQUIRE_FALSE(ev.locked);
      REQUIRE_FALSE((ev.line >= locked && ev.line < locked + 64 * 64));
    }
    for (Addr a = locked; a < locked + 64 * 64; a += 64) CHECK(rig.mem.l3_locked(a));
  }

  TEST_CASE("stashed lines hit on first access") {
    Rig rig;
    const Addr base = 0x2000000;
    const std::uint32_t lines = 256;
    int stashed = 0;
    for (std::uint32_t i = 0; i < lines; ++i) rig.mem.stash(0, base + i * 64, [&] { ++stashed; });
    rig.engine.run();
    REQUIRE(stashed == static_cast<int>(lines));
    std::uint64_t hits0 = 0, misses0 = 0;
    for (std::uint32_t n = 0; n < kMaxNodes; ++n) {
      hits0 += rig.mem.stats(n).l3_hits;
      misses0 += rig.mem.stats(n).l3_misses;
    }
    std::vector<std::byte> buf(64 * lines);
    for (std::uint32_t i = 0; i < lines; ++i) rig.mem.dma_read(3, base + i * 64, 64, &buf[i * 64], [] {});
    rig.engine.run();
    std::uint64_t hits = 0, misses = 0;
    for (std::uint32_t n = 0; n < kMaxNodes; ++n) {
      hits += rig.mem.stats(n).l3_hits;
      misses += rig.mem.stats(n).l3_misses;
    }
    CHECK(hits - hits0 == lines);
    CHECK(misses - misses0 == 0);
  }

  TEST_CASE("lock capacity is enforced atomically") {
    CacheConfig cfg;
    cfg.l3_slice_bytes = 64 * 1024;  // 64 sets x 16 ways
    Rig rig(cfg);
    const std::uint32_t set = rig.mem.l3_set_of(0);
    // Collect lines of one home slice and one set.
    std::vector<Addr> same;
    for (Addr a = 0; same.size() < 12; a += 64) {
      if (home_of(a) == home_of(0) && rig.mem.l3_set_of(a) == set) same.push_back(a);
    }
    for (int i = 0; i < 8; ++i) rig.mem.lock_range(same[i], 64);  // 8 = half of 16 ways
    CHECK_THROWS_AS(rig.mem.lock_range(same[8], 64), LockCapacity);
    CHECK_FALSE(rig.mem.l3_locked(same[8]));
    rig.mem.unlock_range(same[0], 64);
    CHECK_NOTHROW(rig.mem.lock_range(same[8], 64));
  }

  TEST_CASE("functional memory") {
    FunctionalMemory m;
    std::array<std::byte, 16> out{};
    m.read(0x1234, out);
    for (auto b : out) CHECK(b == std::byte{0});
    std::array<std::byte, 8000> big;
    for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<std::byte>(i * 7);
    m.write(4090, big);
    std::array<std::byte, 8000> back{};
    m.read(4090, back);
    CHECK(back == big);
    CHECK(m.allocated_pages() == 3);
  }
}
