#include <algorithm>
#include <random>

#include "doctest.h"
#include "maco/noc/mesh.hpp"

using namespace maco;
using namespace maco::noc;

TEST_SUITE("noc") {
  TEST_CASE("route_xy for all 256 pairs") {
    for (std::uint32_t s = 0; s < kMaxNodes; ++s) {
      for (std::uint32_t d = 0; d < kMaxNodes; ++d) {
        // Oracle: the X leg then the Y leg written out explicitly.
        const int sx = s % 4, sy = s / 4, dx = d % 4, dy = d / 4;
        std::vector<Coord> expect;
        const int stepx = dx > sx ? 1 : -1;
        for (int x = sx; x != dx;) {
          x += stepx;
          expect.push_back({static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(sy)});
        }
        const int stepy = dy > sy ? 1 : -1;
        for (int y = sy; y != dy;) {
          y += stepy;
          expect.push_back({static_cast<std::uint32_t>(dx), static_cast<std::uint32_t>(y)});
        }
        const auto got = route_xy(coord_of(s), coord_of(d));
        REQUIRE(got == expect);
        CHECK(got.size() == static_cast<std::size_t>(std::abs(dx - sx) + std::abs(dy - sy)));
      }
    }
    CHECK_THROWS_AS(route_xy({4, 0}, {0, 0}), OutOfMesh);
  }

  TEST_CASE("idle latency") {
    sim::Engine e;
    sim::Clocks c;
    Mesh m(e, c);
    // 0 -> 15: 6 hops of 2 cycles plus 2 cycles of serialization for 64 B
    CHECK(m.idle_latency_cycles(0, 15, 64) == 14);
    CHECK(m.idle_latency_cycles(3, 3, 64) == 1);
    const sim::Tick t = m.send({0, 15, 64, MsgClass::Request}, nullptr);
    // the injection and ejection ports add serialization on top of the idle figure
    CHECK(c.to_cycles(t, sim::Domain::Noc) >= m.idle_latency_cycles(0, 15, 64));
    e.run();
    CHECK(m.in_flight() == 0);
  }

  TEST_CASE("random traffic drains and never exceeds link width") {
    sim::Engine e;
    sim::Clocks c;
    Mesh m(e, c);
    m.enable_interval_log(true);
    std::mt19937_64 rng(5);
    std::uint64_t sent = 0;
    std::uint64_t delivered_msgs = 0;
    // per (src, dst, class) delivery order check
    std::vector<std::vector<std::uint64_t>> last_seq(kMaxNodes * kMaxNodes * 2);
    for (int wave = 0; wave < 50; ++wave) {
      e.schedule_at(c.cycles(wave * 200, sim::Domain::Noc), [&] {
        for (int i = 0; i < 400; ++i) {
          NocMessage msg{static_cast<std::uint32_t>(rng() % 16), static_cast<std::uint32_t>(rng() % 16),
                         static_cast<std::uint32_t>(8 + rng() % 120),
                         (rng() & 1) ? MsgClass::Request : MsgClass::Response};
          const std::size_t flow = (msg.src * kMaxNodes + msg.dst) * 2 + static_cast<std::size_t>(msg.cls);
          const std::uint64_t seq = sent++;
          m.send(msg, [&, flow, seq] {
            ++delivered_msgs;
            if (!last_seq[flow].empty()) CHECK(last_seq[flow].back() < seq);
            last_seq[flow].push_back(seq);
          });
        }
      });
    }
    e.run();
    CHECK(delivered_msgs == sent);
    CHECK(m.in_flight() == 0);
    CHECK(m.total_injected_bytes() == m.total_delivered_bytes());
    for (const LinkId l : m.links()) {
      auto log = m.interval_log(l);
      std::sort(log.begin(), log.end(), [](auto& a, auto& b) { return a.start < b.start; });
      for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& iv = log[i];
        REQUIRE(iv.end > iv.start);
        CHECK(iv.bytes <= 32 * (iv.end - iv.start));
        if (i > 0) REQUIRE(log[i - 1].end <= iv.start);  // no overlap
      }
    }
  }
}
