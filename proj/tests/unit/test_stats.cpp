#include <sstream>

#include "doctest.h"
#include "maco/exp/experiment.hpp"
#include "maco/stats/stats.hpp"

using namespace maco;

TEST_SUITE("stats") {
  TEST_CASE("efficiency over the active span") {
    sim::Clocks c;
    auto rec = [&](std::uint64_t s, std::uint64_t e, std::uint64_t flops, ExceptionType out = ExceptionType::None) {
      mmae::TaskRecord r;
      r.gemm = true;
      r.start = c.cycles(s, sim::Domain::Mmae);
      r.end = c.cycles(e, sim::Domain::Mmae);
      r.flops = flops;
      r.peak_flops_per_cycle = 32;
      r.outcome = out;
      return r;
    };
    // 3200 + 1600 useful cycles over a span of 100..6100
    std::vector<mmae::TaskRecord> rs{rec(100, 3400, 3200 * 32), rec(3400, 6100, 1600 * 32),
                                     rec(200, 300, 50 * 32, ExceptionType::PageFault)};
    const auto e = stats::efficiency(rs, c);
    CHECK(e.span_cycles == 6000);
    CHECK(e.value == doctest::Approx(4800.0 / 6000.0));
    CHECK(stats::efficiency({}, c).value == 0.0);
    CHECK(stats::task_efficiency(rs[0], c) == doctest::Approx(3200.0 / 3300.0));
  }

  TEST_CASE("CSV layout and determinism") {
    auto cfg = exp::parse_config({{"machine", {{"nodes", 2}}},
                                  {"workload", {{"m", 64}, {"n", 64}, {"k", 64}, {"tr", 32}, {"tc", 64}}}});
    std::ostringstream a, b;
    const auto r1 = exp::run_experiment(cfg);
    const auto r2 = exp::run_experiment(cfg);
    stats::emit_csv(r1.stats, r1.config_json, a);
    stats::emit_csv(r2.stats, r2.config_json, b);
    CHECK(a.str() == b.str());

    std::istringstream in(a.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "#schema=maco-stats-v1");
    std::getline(in, line);
    std::string header;
    for (const auto& col : stats::csv_columns()) header += (header.empty() ? "" : ",") + col;
    CHECK(line == header);
    CHECK(stats::csv_columns().size() == 18);
    std::getline(in, line);
    CHECK(line.rfind("0,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("1,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("all,", 0) == 0);
    std::getline(in, line);
    CHECK(line.rfind("#config=", 0) == 0);
    const auto echoed = nlohmann::json::parse(line.substr(8));
    CHECK(echoed.at("machine").at("nodes") == 2);
    CHECK_FALSE(std::getline(in, line));
  }

  TEST_CASE("the all row aggregates per-node counters") {
    auto cfg = exp::parse_config({{"machine", {{"nodes", 4}}}, {"workload", {{"m", 64}, {"n", 64}, {"k", 32}}}});
    const auto r = exp::run_experiment(cfg);
    std::uint64_t tasks = 0, flops = 0;
    double eff = 0;
    for (const auto& n : r.stats.nodes) {
      tasks += n.tasks;
      flops += n.flops_completed;
      eff += n.efficiency;
    }
    CHECK(r.stats.global.tasks == tasks);
    CHECK(r.stats.global.flops_completed == flops);
    CHECK(r.stats.global.efficiency == doctest::Approx(eff / 4));
    CHECK(flops == 4ULL * 2 * 64 * 64 * 32);
  }
}
