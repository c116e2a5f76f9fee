#include <vector>

#include "doctest.h"
#include "maco/sim/engine.hpp"

using namespace maco;
using namespace maco::sim;

TEST_SUITE("engine") {
  TEST_CASE("default clocks give integral periods") {
    Clocks c;
    CHECK(c.tick_hz() == 110'000'000'000ULL);
    CHECK(c.cpu().period == 50);
    CHECK(c.mmae().period == 44);
    CHECK(c.noc().period == 55);
    // round trips in every domain
    for (auto d : {Domain::Cpu, Domain::Mmae, Domain::Noc}) {
      for (std::uint64_t n : {0ULL, 1ULL, 7ULL, 1'000'003ULL}) CHECK(c.to_cycles(c.cycles(n, d), d) == n);
    }
    CHECK(c.to_cycles_ceil(45, Domain::Mmae) == 2);
    CHECK(c.next_edge(45, Domain::Mmae) == 88);
    CHECK(c.next_edge(88, Domain::Mmae) == 88);
    CHECK(c.to_seconds(c.cycles(2'500'000'000ULL, Domain::Mmae)) == doctest::Approx(1.0));
  }

  TEST_CASE("same-tick events fire in schedule order") {
    Engine e;
    std::vector<int> order;
    e.schedule_at(10, [&] { order.push_back(1); });
    e.schedule_at(5, [&] {
      order.push_back(0);
      e.schedule_at(10, [&] { order.push_back(3); });
    });
    e.schedule_at(10, [&] { order.push_back(2); });
    e.run();
    CHECK(order == std::vector<int>{0, 1, 2, 3});
    CHECK(e.now() == 10);
    CHECK(e.events_processed() == 4);
  }

  TEST_CASE("cancel and scheduling in the past") {
    Engine e;
    int fired = 0;
    auto h = e.schedule_at(3, [&] { ++fired; });
    e.schedule_at(4, [&] { ++fired; });
    CHECK(e.cancel(h));
    CHECK_FALSE(e.cancel(h));
    e.run();
    CHECK(fired == 1);
    CHECK_THROWS_AS(e.schedule_at(1, [] {}), SchedulingInPast);
  }

  TEST_CASE("run_until stops at the limit") {
    Engine e;
    int fired = 0;
    for (Tick t : {1, 2, 3, 10}) e.schedule_at(t, [&] { ++fired; });
    e.run_until(3);
    CHECK(fired == 3);
    CHECK(e.pending() == 1);
    e.run();
    CHECK(fired == 4);
  }

  TEST_CASE("non-integral clock ratios are rejected or exact") {
    Clocks c(1'000'000'000ULL, 3'000'000'000ULL, 2'000'000'000ULL);
    CHECK(c.tick_hz() == 6'000'000'000ULL);
    CHECK(c.cpu().period == 6);
    CHECK(c.mmae().period == 2);
    CHECK(c.noc().period == 3);
  }
}
