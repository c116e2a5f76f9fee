#include <random>
#include <set>

#include "doctest.h"
#include "maco/xlat/translation.hpp"

using namespace maco;
using namespace maco::xlat;

namespace {

// Oracle: touch every element in row-major order and record the address
// whenever the page changes.
std::vector<Addr> brute_heads(const TileAccessDescriptor& d) {
  std::vector<Addr> out;
  for (std::uint64_t r = 0; r < d.rows; ++r) {
    for (std::uint64_t c = 0; c < d.cols; ++c) {
      const Addr a = d.base + ((d.r0 + r) * d.columns + d.c0 + c) * d.element_size;
      for (Addr byte = a; byte < a + d.element_size; ++byte) {
        if (out.empty() || out.back() / d.page_bytes != byte / d.page_bytes) out.push_back(byte);
      }
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("xlat") {
  TEST_CASE("page heads equal the enumeration oracle") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 10000; ++i) {
      TileAccessDescriptor d;
      d.element_size = 1u << (1 + rng() % 3);
      d.columns = 1 + rng() % 3000;
      d.c0 = rng() % d.columns;
      d.cols = 1 + rng() % std::min<std::uint64_t>(64, d.columns - d.c0);
      d.r0 = rng() % 100;
      d.rows = 1 + rng() % 64;
      d.base = (rng() % (1u << 20)) * 8;
      d.page_bytes = (rng() & 3) == 0 ? 16384 : 4096;
      REQUIRE(predict_page_heads(d) == brute_heads(d));
    }
  }

  TEST_CASE("a tile row that straddles two pages") {
    // One 128-element FP64 row starting 512 bytes before a page boundary.
    TileAccessDescriptor d{.base = 0x10000, .element_size = 8, .columns = 1024, .r0 = 0, .c0 = 448,
                           .rows = 1, .cols = 128};
    const auto heads = predict_page_heads(d);
    REQUIRE(heads.size() == 2);
    CHECK(heads[0] == 0x10000 + 448 * 8);
    CHECK(heads[1] == 0x11000);
  }

  TEST_CASE("page table mapping") {
    PageTable pt(4096, 9);
    pt.map_region(0x100000, 5 * 4096, MapPolicy::Random);
    CHECK(pt.mapped_pages() == 5);
    std::set<Addr> frames;
    for (int p = 0; p < 5; ++p) {
      const auto r = pt.lookup(0x100000 + p * 4096 + 123);
      REQUIRE(r.status == XlatStatus::Ok);
      CHECK((r.paddr & 0xFFF) == 123);
      frames.insert(r.paddr >> 12);
    }
    CHECK(frames.size() == 5);
    CHECK(pt.lookup(0x200000).status == XlatStatus::PageFault);
    pt.poison_region(0x100000, 4096);
    CHECK(pt.lookup(0x100000).status == XlatStatus::DataAbort);
    PageTable id(4096);
    id.map_region(0x5000, 100);
    CHECK(id.lookup(0x5008).paddr == 0x5008);
    CHECK_THROWS(PageTable(1000));
  }

  TEST_CASE("LRU TLB") {
    LruTlb t(3);
    for (std::uint64_t v : {1, 2, 3}) t.insert(v, XlatResult{v << 12});
    CHECK(t.lookup(1));  // 1 becomes most recent
    t.insert(4, XlatResult{4 << 12});
    CHECK_FALSE(t.lookup(2));
    CHECK(t.contents() == std::vector<std::uint64_t>{4, 1, 3});
  }

  TEST_CASE("concurrent walks to one page are merged") {
    sim::Engine e;
    sim::Clocks c;
    PageTable pt;
    pt.map_region(0x40000, 8192);
    Mmu mmu(e, c, pt);
    int done = 0;
    for (int i = 0; i < 5; ++i) {
      mmu.translate(0x40000 + i * 8, Requester::Mmae, [&](XlatResult r) {
        CHECK(r.status == XlatStatus::Ok);
        ++done;
      });
    }
    e.run();
    CHECK(done == 5);
    CHECK(mmu.stats().walks == 1);
    CHECK(e.now() == c.cycles(mmu.walk_cycles(), sim::Domain::Mmae));
    // now a hit
    CHECK(mmu.probe(0x40010, Requester::Mmae).has_value());
  }

  TEST_CASE("mATLB lane prefetches predicted heads") {
    sim::Engine e;
    sim::Clocks c;
    PageTable pt;
    pt.map_region(0, 64 * 4096);
    Mmu mmu(e, c, pt);
    MatlbLane lane(e, c, mmu, MatlbConfig{});
    std::vector<Addr> heads;
    for (Addr p = 0; p < 16; ++p) heads.push_back(p * 4096);
    std::size_t next = 0;
    lane.reset([&](Addr& a) {
      if (next == heads.size()) return false;
      a = heads[next++];
      return true;
    });
    e.run();  // let the prewalks finish
    XlatResult r;
    int hits = 0;
    for (Addr p = 0; p < 16; ++p) {
      const auto o = lane.lookup(p * 4096 + 64, r, [] {});
      if (o == MatlbLane::Outcome::Hit) ++hits;
      e.run();
    }
    CHECK(hits >= 15);
    CHECK(lane.stats().prewalks > 0);
  }
}
