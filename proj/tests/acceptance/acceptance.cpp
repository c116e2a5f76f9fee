// Acceptance checks: one PASS/FAIL line per criterion. Exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <future>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "maco/exp/experiment.hpp"
#include "maco/machine.hpp"
#include "maco/mem/memory.hpp"
#include "maco/mmae/half.hpp"
#include "maco/mmae/systolic.hpp"
#include "maco/noc/mesh.hpp"
#include "maco/tq/task_queue.hpp"
#include "maco/xlat/translation.hpp"

using namespace maco;
using Json = nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

stats::RunStats run_json(const Json& j) { return exp::run_experiment(exp::parse_config(j)).stats; }

// --- functional GEMM --------------------------------------------------------

double value_at(const std::vector<std::byte>& v, std::size_t i, Precision p) {
  switch (p) {
    case Precision::FP64: {
      double x;
      std::memcpy(&x, &v[i * 8], 8);
      return x;
    }
    case Precision::FP32x2: {
      float x;
      std::memcpy(&x, &v[i * 4], 4);
      return x;
    }
    case Precision::FP16x4: {
      std::uint16_t h;
      std::memcpy(&h, &v[i * 2], 2);
      return Half::from_bits(h).to_double();
    }
  }
  return 0;
}

std::vector<std::byte> random_bytes(std::uint64_t elems, Precision p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<std::byte> out(elems * element_size(p));
  for (std::uint64_t i = 0; i < elems; ++i) {
    const double x = d(rng);
    if (p == Precision::FP64) {
      std::memcpy(&out[i * 8], &x, 8);
    } else if (p == Precision::FP32x2) {
      const float f = static_cast<float>(x);
      std::memcpy(&out[i * 4], &f, 4);
    } else {
      const std::uint16_t h = Half::from_double(x).bits;
      std::memcpy(&out[i * 2], &h, 2);
    }
  }
  return out;
}

Verdict functional_gemm() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  int exact_fail = 0, tol_fail = 0, tasks = 0, edge = 0;
  double worst[3] = {0, 0, 0};
  const double tol[3] = {1e-13, 1e-6, 1e-2};
  for (int i = 0; i < 210; ++i) {
    isa::GemmTask t;
    t.precision = static_cast<Precision>(i % 3);
    t.m = 1 + rng() % 256;
    t.n = 1 + rng() % 256;
    t.k = 1 + rng() % 256;
    t.accumulate = rng() % 4 == 0;
    t.tr = static_cast<std::uint16_t>(16 << (rng() % 5));
    t.tc = static_cast<std::uint16_t>(16 << (rng() % 5));
    t.ttr = static_cast<std::uint16_t>(std::min<std::uint32_t>(t.tr, 8u << (rng() % 4)));
    t.ttc = static_cast<std::uint16_t>(std::min<std::uint32_t>(t.tc, 8u << (rng() % 4)));
    if (t.m % t.ttr || t.n % t.ttc || t.m % t.tr || t.n % t.tc) ++edge;
    const Precision p = t.precision;
    const std::uint32_t es = element_size(p);

    MachineConfig mc;
    mc.seed = 100 + i;
    Machine m(mc);
    const auto a = random_bytes(std::uint64_t{t.m} * t.k, p, rng);
    const auto b = random_bytes(std::uint64_t{t.k} * t.n, p, rng);
    const auto c0 = random_bytes(std::uint64_t{t.m} * t.n, p, rng);
    t.a = m.allocate(a.size());
    t.b = m.allocate(b.size());
    t.c = m.allocate(c0.size());
    m.write_virtual(t.a, a.data(), a.size());
    m.write_virtual(t.b, b.data(), b.size());
    m.write_virtual(t.c, c0.data(), c0.size());
    const auto block = isa::pack(t);
    for (std::uint8_t r = 0; r < 6; ++r) m.core(0).append(cpu::OpSetReg{r, block[r]});
    m.core(0).append(cpu::OpExec{isa::Instruction{isa::Opcode::MaCfg, 12, 0}});
    m.core(0).append(cpu::OpWaitDone{12});
    m.run();
    std::vector<std::byte> got(c0.size());
    m.read_virtual(t.c, got.data(), got.size());
    ++tasks;
    if (m.core(0).reg(30) != tq::kStatusDone) {
      ++exact_fail;
      continue;
    }

    // Same-order oracle.
    std::vector<std::byte> expect = t.accumulate ? c0 : std::vector<std::byte>(c0.size());
    mmae::reference_gemm(p, a.data(), t.k, b.data(), t.n, expect.data(), t.n, t.m, t.n, t.k);
    if (got != expect) ++exact_fail;

    // Naive highest-precision oracle, componentwise bound.
    bool ok = true;
    for (std::uint32_t r = 0; r < t.m && ok; ++r) {
      for (std::uint32_t c = 0; c < t.n; ++c) {
        long double exact = t.accumulate ? value_at(c0, std::size_t{r} * t.n + c, p) : 0.0L;
        long double mag = std::fabs(static_cast<double>(exact));
        for (std::uint32_t kk = 0; kk < t.k; ++kk) {
          const long double prod = static_cast<long double>(value_at(a, std::size_t{r} * t.k + kk, p)) *
                                   value_at(b, std::size_t{kk} * t.n + c, p);
          exact += prod;
          mag += std::fabs(prod);
        }
        const double err = std::fabs(static_cast<double>(value_at(got, std::size_t{r} * t.n + c, p) - exact));
        const double rel = mag > 0 ? err / static_cast<double>(mag) : err;
        worst[static_cast<int>(p)] = std::max(worst[static_cast<int>(p)], rel);
        if (rel > tol[static_cast<int>(p)]) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) ++tol_fail;
    (void)es;
  }
  const double secs = seconds_since(t0);
  Verdict v;
  v.pass = tasks >= 200 && exact_fail == 0 && tol_fail == 0 && edge > 0 && secs < 300;
  v.detail = fmt("%d tasks (%d with edge tiles), same-order mismatches %d, tolerance failures %d, "
                 "worst rel err fp64 %.2e fp32 %.2e fp16 %.2e, %.1f s",
                 tasks, edge, exact_fail, tol_fail, worst[0], worst[1], worst[2], secs);
  return v;
}

// --- peak arithmetic --------------------------------------------------------

Verdict peak_arithmetic() {
  const char* precs[] = {"fp64", "fp32", "fp16"};
  const double peak[] = {80.0, 160.0, 320.0};
  Verdict v{true, ""};
  for (int i = 0; i < 3; ++i) {
    const auto s = run_json({{"machine", {{"ideal", true}}},
                             {"workload", {{"m", 1024}, {"n", 1024}, {"k", 1024}, {"precision", precs[i]},
                                           {"tr", 1024}, {"tc", 1024}, {"ttr", 64}, {"ttc", 64}}},
                             {"run", {{"check", false}}}});
    const double eff = s.global.efficiency;
    const double gflops = eff * peak[i];
    v.pass = v.pass && eff >= 0.99 && eff <= 1.0;
    v.detail += fmt("%s eff %.4f (%.1f of %.0f GFLOPS)%s", precs[i], eff, gflops, peak[i], i < 2 ? ", " : "");
  }
  return v;
}

// --- scaling runs (shared by two criteria) -----------------------------------

struct ScalePoint {
  std::uint32_t nodes;
  double eff;
  double gflops;
  double secs;
};

std::vector<ScalePoint> scaling_runs() {
  std::vector<std::future<ScalePoint>> fut;
  for (std::uint32_t n : {1u, 2u, 4u, 8u, 16u}) {
    fut.push_back(std::async(std::launch::async, [n] {
      const auto t0 = Clock::now();
      const auto s = run_json({{"machine", {{"nodes", n}}},
                               {"workload", {{"mode", "independent"}, {"m", 1024}, {"n", 1024}, {"k", 1024},
                                             {"precision", "fp32"}, {"tr", 1024}, {"tc", 1024}, {"ttr", 64},
                                             {"ttc", 64}}},
                               {"run", {{"check", false}}}});
      // Aggregate throughput: every node's flops over the longest active span.
      return ScalePoint{n, s.global.efficiency, s.global.gflops, seconds_since(t0)};
    }));
  }
  std::vector<ScalePoint> out;
  for (auto& f : fut) out.push_back(f.get());
  return out;
}

Verdict throughput(const std::vector<ScalePoint>& pts) {
  const ScalePoint& p = pts.back();
  Verdict v;
  const double tflops = p.gflops / 1000.0;
  v.pass = p.nodes == 16 && p.eff >= 0.86 && tflops >= 1.10 && p.secs < 900;
  v.detail = fmt("16 nodes: efficiency %.4f, %.3f TFLOPS modeled, %.0f s", p.eff, tflops, p.secs);
  return v;
}

Verdict scalability(const std::vector<ScalePoint>& pts) {
  Verdict v{true, ""};
  for (std::size_t i = 2; i < pts.size(); ++i) v.pass = v.pass && pts[i].eff <= pts[i - 1].eff;
  const double e1 = pts.front().eff, e16 = pts.back().eff;
  v.pass = v.pass && e16 >= 0.85 && e16 >= 0.85 * e1;
  for (const auto& p : pts) v.detail += fmt("%u:%.4f ", p.nodes, p.eff);
  v.detail += fmt("(16-node loss %.1f%%)", 100.0 * (1.0 - e16 / e1));
  return v;
}

// --- mATLB gap ----------------------------------------------------------------

Verdict matlb_gap() {
  const int sizes[] = {128, 256, 512, 1024};
  struct R {
    double on, off;
    std::uint64_t stall_on;
  };
  std::vector<std::future<R>> fut;
  for (int s : sizes) {
    fut.push_back(std::async(std::launch::async, [s] {
      auto one = [s](bool on) {
        return run_json({{"machine", {{"nodes", 1}, {"page_bytes", 4096}, {"mmae", {{"matlb", {{"enabled", on}}}}}}},
                         {"workload", {{"m", s}, {"n", s}, {"k", s}, {"precision", "fp64"}, {"tr", 1024},
                                       {"tc", 1024}, {"ttr", 64}, {"ttc", 64}}},
                         {"run", {{"check", false}}}});
      };
      const auto on = one(true);
      const auto off = one(false);
      return R{on.global.efficiency, off.global.efficiency, on.global.dma_stall_translation};
    }));
  }
  Verdict v{true, ""};
  for (std::size_t i = 0; i < 4; ++i) {
    const R r = fut[i].get();
    const double gap = r.on - r.off;
    if (sizes[i] == 1024) {
      v.pass = v.pass && gap >= 0.02 && gap <= 0.12;
    } else {
      v.pass = v.pass && gap <= 0.025;
    }
    v.pass = v.pass && r.stall_on == 0;
    v.detail += fmt("%d: on %.4f off %.4f gap %.2f%% xlat-stall %llu; ", sizes[i], r.on, r.off, 100 * gap,
                    static_cast<unsigned long long>(r.stall_on));
  }
  return v;
}

// --- coherence ----------------------------------------------------------------

Verdict coherence() {
  sim::Engine engine;
  sim::Clocks clocks;
  noc::Mesh mesh(engine, clocks);
  mem::CacheConfig cc;
  cc.l1_bytes = 1024;
  cc.l2_bytes = 4096;
  cc.l3_slice_bytes = 16 * 1024;
  mem::MemorySystem ms(engine, clocks, mesh, cc);
  ms.enable_checker(true);
  ms.enable_eviction_log(true);
  const Addr locked = 0x4000000;
  ms.lock_range(locked, 64 * 64);

  std::mt19937_64 rng(99);
  std::vector<Addr> lines;
  for (Addr i = 0; i < 48; ++i) lines.push_back(0x100000 + i * 64);
  for (Addr i = 0; i < 4000; ++i) lines.push_back(0x800000 + i * 64 * 37);
  std::uint64_t remaining = 600000;
  std::function<void(std::uint32_t)> issue = [&](std::uint32_t node) {
    if (remaining == 0) return;
    --remaining;
    const Addr a = lines[rng() % lines.size()] + (rng() % 8) * 8;
    auto buf = std::make_shared<std::array<std::byte, 8>>();
    for (auto& b : *buf) b = static_cast<std::byte>(rng());
    auto next = [&issue, node, buf] { issue(node); };
    switch (rng() % 6) {
      case 0:
      case 1: ms.cpu_access(node, a, mem::CpuOp::Read, 8, buf->data(), next); break;
      case 2: ms.cpu_access(node, a, mem::CpuOp::Write, 8, buf->data(), next); break;
      case 3: ms.cpu_access(node, a, mem::CpuOp::Rfo, 8, buf->data(), next); break;
      case 4: ms.dma_read(node, a, 8, buf->data(), next); break;
      default: ms.dma_write(node, a, 8, buf->data(), next); break;
    }
  };
  std::string audit_error;
  engine.set_post_event_hook([&] {
    if (audit_error.empty() && engine.events_processed() % 1000 == 0) {
      try {
        ms.audit();
      } catch (const std::exception& e) {
        audit_error = e.what();
      }
    }
  });
  for (std::uint32_t n = 0; n < kMaxNodes; ++n) {
    for (int k = 0; k < 2; ++k) engine.schedule_at(0, [&issue, n] { issue(n); });
  }
  engine.run();
  engine.set_post_event_hook(nullptr);
  const std::uint64_t events = engine.events_processed();
  std::uint64_t locked_evictions = 0;
  for (const auto& ev : ms.eviction_log()) {
    if (ev.locked || (ev.line >= locked && ev.line < locked + 64 * 64)) ++locked_evictions;
  }

  // Stash then read from another node.
  const Addr sbase = 0x9000000;
  for (int i = 0; i < 512; ++i) ms.stash(0, sbase + i * 64, [] {});
  engine.run();
  std::uint64_t h0 = 0, m0 = 0;
  for (std::uint32_t n = 0; n < kMaxNodes; ++n) h0 += ms.stats(n).l3_hits, m0 += ms.stats(n).l3_misses;
  std::vector<std::byte> buf(64 * 512);
  for (int i = 0; i < 512; ++i) ms.dma_read(5, sbase + i * 64, 64, &buf[i * 64], [] {});
  engine.run();
  std::uint64_t h1 = 0, m1 = 0;
  for (std::uint32_t n = 0; n < kMaxNodes; ++n) h1 += ms.stats(n).l3_hits, m1 += ms.stats(n).l3_misses;
  const double hit_rate = static_cast<double>(h1 - h0) / static_cast<double>((h1 - h0) + (m1 - m0));

  Verdict v;
  v.pass = events >= 1'000'000 && audit_error.empty() && ms.checker_violations() == 0 && locked_evictions == 0 &&
           hit_rate == 1.0;
  v.detail = fmt("%llu events, %llu checked reads, %llu value violations, audit %s, %llu evictions (%llu locked), "
                 "stash hit rate %.3f",
                 static_cast<unsigned long long>(events), static_cast<unsigned long long>(ms.checked_reads()),
                 static_cast<unsigned long long>(ms.checker_violations()), audit_error.empty() ? "clean" : audit_error.c_str(),
                 static_cast<unsigned long long>(ms.eviction_log().size()),
                 static_cast<unsigned long long>(locked_evictions), hit_rate);
  return v;
}

// --- task queues ----------------------------------------------------------------

Verdict task_queue() {
  MachineConfig mc;
  Machine m(mc);
  auto& core = m.core(0);
  std::uint64_t illegal = 0, transitions = 0;
  core.mtq().set_observer([&](std::uint32_t, tq::EntryState from, tq::EntryState to) {
    ++transitions;
    if (!tq::legal_transition(from, to)) ++illegal;
  });
  // Random MA_* programs against real MMAE timing, with process switches
  // injected between events.
  std::mt19937_64 rng(5);
  std::vector<std::byte> data(32 * 32 * 8, std::byte{0});
  const Addr buf = m.allocate(data.size() * 4);
  m.write_virtual(buf, data.data(), data.size());
  isa::GemmTask good{.a = buf, .b = buf, .c = buf + data.size(), .m = 32, .n = 32, .k = 32,
                     .tr = 32, .tc = 32, .ttr = 32, .ttc = 32};
  isa::GemmTask bad = good;
  bad.a += 4;
  const auto gb = isa::pack(good), bb = isa::pack(bad);
  const auto mb = isa::pack(isa::TransferTask{isa::TransferKind::Init, buf + 2 * data.size(), 0, 256});
  std::uint64_t ops = 0;
  for (int i = 0; i < 120000; ++i) {
    const auto r = rng() % 10;
    const std::uint8_t maid_reg = static_cast<std::uint8_t>(12 + rng() % 4);
    if (r < 3) {
      const auto& blk = r == 0 ? gb : (r == 1 ? bb : mb);
      for (std::uint8_t q = 0; q < 6; ++q) core.append(cpu::OpSetReg{q, blk[q]});
      core.append(cpu::OpExec{isa::Instruction{r == 2 ? isa::Opcode::MaInit : isa::Opcode::MaCfg, maid_reg, 0}});
    } else if (r < 6) {
      core.append(cpu::OpExec{isa::Instruction{isa::Opcode::MaRead, 20, maid_reg}});
    } else if (r < 8) {
      core.append(cpu::OpExec{isa::Instruction{isa::Opcode::MaState, 20, maid_reg}});
    } else if (r < 9) {
      core.append(cpu::OpExec{isa::Instruction{isa::Opcode::MaClear, 0, maid_reg}});
    } else {
      core.append(cpu::OpSetReg{maid_reg, rng() % 5});
    }
    ++ops;
  }
  std::uint64_t switches = 0, switch_mismatch = 0;
  m.engine().set_post_event_hook([&] {
    if (rng() % 3 != 0) return;
    const auto before = core.mtq().entries();
    core.switch_process(1 + static_cast<std::uint32_t>(rng() % 7));
    if (core.mtq().entries() != before) ++switch_mismatch;
    core.switch_process(0);
    if (core.mtq().entries() != before) ++switch_mismatch;
    ++switches;
  });
  std::string error;
  try {
    m.run();
  } catch (const std::exception& e) {
    error = e.what();
  }
  Verdict v;
  v.pass = error.empty() && ops >= 100000 && illegal == 0 && switch_mismatch == 0 && switches > 0;
  v.detail = fmt("%llu ops, %llu transitions, %llu illegal, %llu process switches, %llu state differences%s%s",
                 static_cast<unsigned long long>(ops), static_cast<unsigned long long>(transitions),
                 static_cast<unsigned long long>(illegal), static_cast<unsigned long long>(switches),
                 static_cast<unsigned long long>(switch_mismatch), error.empty() ? "" : ", error: ", error.c_str());
  return v;
}

// --- NOC ----------------------------------------------------------------------

Verdict noc_checks() {
  int route_bad = 0;
  for (std::uint32_t s = 0; s < kMaxNodes; ++s) {
    for (std::uint32_t d = 0; d < kMaxNodes; ++d) {
      std::vector<noc::Coord> expect;
      noc::Coord cur = noc::coord_of(s);
      const noc::Coord dst = noc::coord_of(d);
      while (cur.x != dst.x) {
        cur.x += cur.x < dst.x ? 1 : -1;
        expect.push_back(cur);
      }
      while (cur.y != dst.y) {
        cur.y += cur.y < dst.y ? 1 : -1;
        expect.push_back(cur);
      }
      if (noc::route_xy(noc::coord_of(s), dst) != expect) ++route_bad;
    }
  }
  sim::Engine e;
  sim::Clocks c;
  noc::Mesh mesh(e, c);
  mesh.enable_interval_log(true);
  std::mt19937_64 rng(12);
  std::uint64_t sent = 0, delivered = 0;
  for (int wave = 0; wave < 100; ++wave) {
    e.schedule_at(c.cycles(wave * 100, sim::Domain::Noc), [&] {
      for (int i = 0; i < 300; ++i) {
        ++sent;
        mesh.send({static_cast<std::uint32_t>(rng() % 16), static_cast<std::uint32_t>(rng() % 16),
                   static_cast<std::uint32_t>(1 + rng() % 256)},
                  [&] { ++delivered; });
      }
    });
  }
  e.run();
  double worst = 0.0;
  bool overlap = false;
  for (const auto& l : mesh.links()) {
    auto log = mesh.interval_log(l);
    std::sort(log.begin(), log.end(), [](auto& a, auto& b) { return a.start < b.start; });
    for (std::size_t i = 0; i < log.size(); ++i) {
      worst = std::max(worst, static_cast<double>(log[i].bytes) / static_cast<double>(log[i].end - log[i].start));
      if (i && log[i - 1].end > log[i].start) overlap = true;
    }
  }
  Verdict v;
  v.pass = route_bad == 0 && sent == delivered && mesh.in_flight() == 0 && worst <= 32.0 && !overlap;
  v.detail = fmt("route mismatches %d/256, %llu/%llu messages delivered, max link rate %.1f B/cycle%s", route_bad,
                 static_cast<unsigned long long>(delivered), static_cast<unsigned long long>(sent), worst,
                 overlap ? ", overlapping reservations" : "");
  return v;
}

// --- page heads -----------------------------------------------------------------

Verdict page_heads() {
  std::mt19937_64 rng(77);
  int bad = 0;
  for (int i = 0; i < 10000; ++i) {
    xlat::TileAccessDescriptor d;
    d.element_size = 1u << (1 + rng() % 3);
    d.columns = 1 + rng() % 4096;
    d.c0 = rng() % d.columns;
    d.cols = 1 + rng() % std::min<std::uint64_t>(128, d.columns - d.c0);
    d.r0 = rng() % 64;
    d.rows = 1 + rng() % 64;
    d.base = (rng() % (1u << 22)) * 8;
    std::vector<Addr> expect;
    for (std::uint64_t r = 0; r < d.rows; ++r) {
      for (std::uint64_t c = 0; c < d.cols; ++c) {
        const Addr a = d.base + ((d.r0 + r) * d.columns + d.c0 + c) * d.element_size;
        for (Addr b = a; b < a + d.element_size; ++b) {
          if (expect.empty() || expect.back() / 4096 != b / 4096) expect.push_back(b);
        }
      }
    }
    if (xlat::predict_page_heads(d) != expect) ++bad;
  }
  // One tile row that spans two pages.
  xlat::TileAccessDescriptor two{.base = 0x10000, .element_size = 8, .columns = 1024, .r0 = 0, .c0 = 448,
                                 .rows = 1, .cols = 128};
  const auto h = xlat::predict_page_heads(two);
  const bool two_ok = h == std::vector<Addr>{0x10000 + 448 * 8, 0x11000};
  Verdict v;
  v.pass = bad == 0 && two_ok;
  v.detail = fmt("%d/10000 descriptors differ from enumeration; straddling-row case %s", bad, two_ok ? "ok" : "wrong");
  return v;
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  // The long simulations run concurrently; results print in a fixed order.
  auto scale = std::async(std::launch::async, scaling_runs);
  auto gap = std::async(std::launch::async, matlb_gap);
  auto peak = std::async(std::launch::async, peak_arithmetic);
  auto func = std::async(std::launch::async, functional_gemm);
  const auto coh = coherence();
  const auto tqv = task_queue();
  const auto nocv = noc_checks();
  const auto heads = page_heads();
  const auto pts = scale.get();

  const std::pair<const char*, Verdict> rows[] = {
      {"functional-gemm-oracle", func.get()},
      {"peak-arithmetic", peak.get()},
      {"throughput-16-node", throughput(pts)},
      {"matlb-gap", gap.get()},
      {"scalability", scalability(pts)},
      {"coherence", coh},
      {"task-queue-state-machine", tqv},
      {"noc", nocv},
      {"page-head-prediction", heads},
  };
  int failures = 0;
  for (const auto& [name, v] : rows) {
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
    failures += v.pass ? 0 : 1;
  }
  std::printf("acceptance: %d/9 passed in %.0f s\n", 9 - failures, seconds_since(t0));
  return failures;
}
