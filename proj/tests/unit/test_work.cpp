#include <set>

#include "doctest.h"
#include "maco/work/workloads.hpp"

using namespace maco;
using namespace maco::work;

TEST_SUITE("workloads") {
  TEST_CASE("tile plan covers C exactly once") {
    for (auto policy : {Assignment::RoundRobin, Assignment::BlockCyclic}) {
      const auto plan = plan_tiles(300, 250, 64, 128, 96, 3, policy, 2);
      std::vector<int> cover(300 * 250, 0);
      for (const auto& t : plan.tiles) {
        for (std::uint32_t i = t.i0; i < t.i0 + t.rows; ++i) {
          for (std::uint32_t j = t.j0; j < t.j0 + t.cols; ++j) ++cover[i * 250 + j];
        }
        const std::uint32_t expect = policy == Assignment::RoundRobin ? t.index % 3 : (t.index / 2) % 3;
        CHECK(t.node == expect);
      }
      for (int c : cover) REQUIRE(c == 1);
      CHECK(plan.tiles.size() == 3 * 3);
      std::size_t total = 0;
      for (const auto& v : plan.by_node()) total += v.size();
      CHECK(total == plan.tiles.size());
    }
    CHECK_THROWS_AS(plan_tiles(10, 10, 10, 4, 4, 0), ConfigError);
  }

  TEST_CASE("tile task addresses") {
    const auto plan = plan_tiles(256, 512, 128, 128, 256, 1);
    MatrixSet set{0x1000'0000, 0x2000'0000, 0x3000'0000, Precision::FP32x2};
    const auto& tile = plan.tiles[3];  // second tile row, second column
    REQUIRE(tile.i0 == 128);
    REQUIRE(tile.j0 == 256);
    const auto t = tile_task(plan, tile, set, ScheduleOptions{});
    CHECK(t.a == set.a + 128ULL * 128 * 4);
    CHECK(t.b == set.b + 256ULL * 4);
    CHECK(t.c == set.c + (128ULL * 512 + 256) * 4);
    CHECK(t.ldn == 512);
    CHECK(t.m == 128);
    CHECK(t.n == 256);
    CHECK(t.k == 128);
    const auto full = plan_tiles(256, 512, 128, 128, 512, 1);
    CHECK(tile_task(full, full.tiles[0], set, ScheduleOptions{}).ldn == 0);
  }

  TEST_CASE("schedule respects the queue depth") {
    const auto plan = plan_tiles(256, 256, 64, 64, 256, 2);
    MatrixSet set{0x1000'0000, 0x2000'0000, 0x3000'0000, Precision::FP64};
    ScheduleOptions opt;
    opt.stash = true;
    opt.lock = true;
    opt.post_flops = 1000;
    const auto s = build_schedule(plan, set, opt);
    CHECK(s.per_node.size() == 2);
    CHECK(s.tasks.size() == plan.tiles.size());
    opt.lookahead = 3;
    CHECK_THROWS_AS(build_schedule(plan, set, opt), ConfigError);
  }

  TEST_CASE("DL layer lowering") {
    DlLayerSpec conv{.kind = LayerKind::Conv, .name = "conv", .batch = 2, .filters = 64, .channels = 3,
                     .kernel_h = 7, .kernel_w = 7, .out_h = 112, .out_w = 112};
    auto g = lower_dl_layer(conv);
    REQUIRE(g.size() == 1);
    CHECK(g[0].m == 64);
    CHECK(g[0].n == 112u * 112 * 2);
    CHECK(g[0].k == 3u * 7 * 7);
    DlLayerSpec fc{.kind = LayerKind::FullyConnected, .batch = 16, .in_features = 4096, .out_features = 1000};
    g = lower_dl_layer(fc);
    CHECK(g[0].m == 16);
    CHECK(g[0].n == 1000);
    CHECK(g[0].k == 4096);
    DlLayerSpec proj{.kind = LayerKind::AttentionProjection, .batch = 2, .d_model = 512, .seq = 128};
    g = lower_dl_layer(proj);
    REQUIRE_FALSE(g.empty());
    for (const auto& d : g) {
      CHECK(d.m == 256);
      CHECK(d.n == 512);
      CHECK(d.k == 512);
    }
  }
}
