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


#include "maco/exp/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "maco/error.hpp"
#include "maco/mem/memory.hpp"
#include "maco/mmae/half.hpp"
#include "maco/mmae/systolic.hpp"

namespace maco::exp {

namespace {

std::string mode_name(Mode m) { return m == Mode::Independent ? "independent" : "partitioned"; }
std::string assignment_name(work::Assignment a) {
  return a == work::Assignment::RoundRobin ? "round_robin" : "block_cyclic";
}
std::string policy_name(xlat::MapPolicy p) { return p == xlat::MapPolicy::Identity ? "identity" : "random"; }

std::string layer_kind_name(work::LayerKind k) {
  switch (k) {
    case work::LayerKind::Conv: return "conv";
    case work::LayerKind::FullyConnected: return "fc";
    case work::LayerKind::AttentionProjection: return "projection";
  }
  return "?";
}

Json layer_json(const work::DlLayerSpec& l) {
  return Json{{"kind", layer_kind_name(l.kind)},
              {"name", l.name},
              {"precision", std::string(precision_name(l.precision))},
              {"batch", l.batch},
              {"filters", l.filters},
              {"channels", l.channels},
              {"kernel_h", l.kernel_h},
              {"kernel_w", l.kernel_w},
              {"out_h", l.out_h},
              {"out_w", l.out_w},
              {"in_features", l.in_features},
              {"out_features", l.out_features},
              {"d_model", l.d_model},
              {"seq", l.seq}};
}

Json encode(const ExperimentConfig& c) {
  const MachineConfig& m = c.machine;
  const WorkloadConfig& w = c.workload;
  Json layers = Json::array();
  for (const auto& l : w.layers) layers.push_back(layer_json(l));
  return Json{
      {"machine",
       {{"nodes", m.nodes},
        {"cpu_hz", m.cpu_hz},
        {"mmae_hz", m.mmae_hz},
        {"noc_hz", m.noc_hz},
        {"page_bytes", m.page_bytes},
        {"map_policy", policy_name(m.map_policy)},
        {"ideal", m.cache.ideal && m.mmae.ideal},
        {"cache",
         {{"l1_bytes", m.cache.l1_bytes},
          {"l1_ways", m.cache.l1_ways},
          {"l2_bytes", m.cache.l2_bytes},
          {"l2_ways", m.cache.l2_ways},
          {"l3_slice_bytes", m.cache.l3_slice_bytes},
          {"l3_ways", m.cache.l3_ways},
          {"l1_cycles", m.cache.l1_cycles},
          {"l2_cycles", m.cache.l2_cycles},
          {"l3_cycles", m.cache.l3_cycles},
          {"mem_cycles", m.cache.mem_cycles},
          {"mem_line_cycles", m.cache.mem_line_cycles},
          {"lock_fraction", m.cache.lock_fraction}}},
        {"noc", {{"per_hop_cycles", m.noc.per_hop_cycles}, {"link_bytes_per_cycle", m.noc.link_bytes_per_cycle}}},
        {"mmu",
         {{"dtlb_entries", m.mmu.dtlb_entries},
          {"stlb_entries", m.mmu.stlb_entries},
          {"dtlb_hit_cycles", m.mmu.dtlb_hit_cycles},
          {"stlb_hit_cycles", m.mmu.stlb_hit_cycles},
          {"ptw_level_cycles", m.mmu.ptw_level_cycles},
          {"walkers", m.mmu.walkers}}},
        {"mmae",
         {{"dma_window", m.mmae.dma_window},
          {"dma_issue_cycles", m.mmae.dma_issue_cycles},
          {"configure_cycles", m.mmae.configure_cycles},
          {"buffer_bytes", m.mmae.buffer_bytes},
          {"fp_exceptions", m.mmae.fp_exceptions},
          {"stq_depth", m.mmae.stq_depth},
          {"sa_rows", m.mmae.sa.rows},
          {"sa_cols", m.mmae.sa.cols},
          {"matlb",
           {{"enabled", m.mmae.matlb.enabled},
            {"lookahead", m.mmae.matlb.lookahead},
            {"capacity", m.mmae.matlb.capacity}}}}},
        {"cpu",
         {{"instr_cycles", m.cpu.instr_cycles},
          {"poll_interval", m.cpu.poll_interval},
          {"efficiency", m.cpu.efficiency},
          {"fmacs", m.cpu.fmacs},
          {"read_window", m.cpu.read_window},
          {"mtq_depth", m.cpu.mtq_depth}}}}},
      {"workload",
       {{"mode", mode_name(w.mode)},
        {"m", w.m},
        {"n", w.n},
        {"k", w.k},
        {"precision", std::string(precision_name(w.precision))},
        {"tr", w.tr},
        {"tc", w.tc},
        {"ttr", w.ttr},
        {"ttc", w.ttc},
        {"accumulate", w.accumulate},
        {"stash", w.stash},
        {"lock", w.lock},
        {"post_flops", w.post_flops},
        {"lookahead", w.lookahead},
        {"assignment", assignment_name(w.assignment)},
        {"block", w.block},
        {"layers", layers},
        {"program", w.program},
        {"regions", w.regions}}},
      {"run", {{"seed", c.run.seed}, {"out", c.run.out}, {"check", c.run.check}}}};
}

// Reject keys the defaults do not have. Arrays are taken whole.
void check_keys(const Json& user, const Json& defaults, const std::string& path) {
  if (!user.is_object()) throw ConfigError("'" + (path.empty() ? "<root>" : path) + "' must be an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    const Json& d = defaults.at(it.key());
    if (d.is_object()) check_keys(it.value(), d, key);
  }
}

template <typename T>
T get(const Json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config key '" + path + "." + key + "' has the wrong type");
  }
}

Precision precision_of(const std::string& s, const std::string& where) {
  const auto p = parse_precision(s);
  if (!p) throw ConfigError(where + ": unknown precision '" + s + "'");
  return *p;
}

work::DlLayerSpec decode_layer(const Json& j, std::size_t i) {
  const std::string path = "workload.layers[" + std::to_string(i) + "]";
  Json d = layer_json(work::DlLayerSpec{});
  check_keys(j, d, path);
  d.merge_patch(j);
  work::DlLayerSpec l;
  const auto kind = get<std::string>(d, "kind", path);
  if (kind == "conv") l.kind = work::LayerKind::Conv;
  else if (kind == "fc") l.kind = work::LayerKind::FullyConnected;
  else if (kind == "projection") l.kind = work::LayerKind::AttentionProjection;
  else throw ConfigError(path + ": unknown layer kind '" + kind + "'");
  l.name = get<std::string>(d, "name", path);
  l.precision = precision_of(get<std::string>(d, "precision", path), path);
  l.batch = get<std::uint32_t>(d, "batch", path);
  l.filters = get<std::uint32_t>(d, "filters", path);
  l.channels = get<std::uint32_t>(d, "channels", path);
  l.kernel_h = get<std::uint32_t>(d, "kernel_h", path);
  l.kernel_w = get<std::uint32_t>(d, "kernel_w", path);
  l.out_h = get<std::uint32_t>(d, "out_h", path);
  l.out_w = get<std::uint32_t>(d, "out_w", path);
  l.in_features = get<std::uint32_t>(d, "in_features", path);
  l.out_features = get<std::uint32_t>(d, "out_features", path);
  l.d_model = get<std::uint32_t>(d, "d_model", path);
  l.seq = get<std::uint32_t>(d, "seq", path);
  return l;
}

ExperimentConfig decode(const Json& j) {
  ExperimentConfig c;
  const Json& m = j.at("machine");
  MachineConfig& mc = c.machine;
  mc.nodes = get<std::uint32_t>(m, "nodes", "machine");
  mc.cpu_hz = get<std::uint64_t>(m, "cpu_hz", "machine");
  mc.mmae_hz = get<std::uint64_t>(m, "mmae_hz", "machine");
  mc.noc_hz = get<std::uint64_t>(m, "noc_hz", "machine");
  mc.page_bytes = get<std::uint32_t>(m, "page_bytes", "machine");
  const auto pol = get<std::string>(m, "map_policy", "machine");
  if (pol == "identity") mc.map_policy = xlat::MapPolicy::Identity;
  else if (pol == "random") mc.map_policy = xlat::MapPolicy::Random;
  else throw ConfigError("machine.map_policy must be 'identity' or 'random'");

  const Json& ca = m.at("cache");
  mc.cache.l1_bytes = get<std::uint32_t>(ca, "l1_bytes", "machine.cache");
  mc.cache.l1_ways = get<std::uint32_t>(ca, "l1_ways", "machine.cache");
  mc.cache.l2_bytes = get<std::uint32_t>(ca, "l2_bytes", "machine.cache");
  mc.cache.l2_ways = get<std::uint32_t>(ca, "l2_ways", "machine.cache");
  mc.cache.l3_slice_bytes = get<std::uint32_t>(ca, "l3_slice_bytes", "machine.cache");
  mc.cache.l3_ways = get<std::uint32_t>(ca, "l3_ways", "machine.cache");
  mc.cache.l1_cycles = get<std::uint32_t>(ca, "l1_cycles", "machine.cache");
  mc.cache.l2_cycles = get<std::uint32_t>(ca, "l2_cycles", "machine.cache");
  mc.cache.l3_cycles = get<std::uint32_t>(ca, "l3_cycles", "machine.cache");
  mc.cache.mem_cycles = get<std::uint32_t>(ca, "mem_cycles", "machine.cache");
  mc.cache.mem_line_cycles = get<std::uint32_t>(ca, "mem_line_cycles", "machine.cache");
  mc.cache.lock_fraction = get<double>(ca, "lock_fraction", "machine.cache");

  const Json& no = m.at("noc");
  mc.noc.per_hop_cycles = get<std::uint32_t>(no, "per_hop_cycles", "machine.noc");
  mc.noc.link_bytes_per_cycle = get<std::uint32_t>(no, "link_bytes_per_cycle", "machine.noc");

  const Json& mu = m.at("mmu");
  mc.mmu.dtlb_entries = get<std::uint32_t>(mu, "dtlb_entries", "machine.mmu");
  mc.mmu.stlb_entries = get<std::uint32_t>(mu, "stlb_entries", "machine.mmu");
  mc.mmu.dtlb_hit_cycles = get<std::uint32_t>(mu, "dtlb_hit_cycles", "machine.mmu");
  mc.mmu.stlb_hit_cycles = get<std::uint32_t>(mu, "stlb_hit_cycles", "machine.mmu");
  mc.mmu.ptw_level_cycles = get<std::uint32_t>(mu, "ptw_level_cycles", "machine.mmu");
  mc.mmu.walkers = get<std::uint32_t>(mu, "walkers", "machine.mmu");

  const Json& ma = m.at("mmae");
  mc.mmae.dma_window = get<std::uint32_t>(ma, "dma_window", "machine.mmae");
  mc.mmae.dma_issue_cycles = get<std::uint32_t>(ma, "dma_issue_cycles", "machine.mmae");
  mc.mmae.configure_cycles = get<std::uint32_t>(ma, "configure_cycles", "machine.mmae");
  mc.mmae.buffer_bytes = get<std::uint64_t>(ma, "buffer_bytes", "machine.mmae");
  mc.mmae.fp_exceptions = get<bool>(ma, "fp_exceptions", "machine.mmae");
  mc.mmae.stq_depth = get<std::uint32_t>(ma, "stq_depth", "machine.mmae");
  mc.mmae.sa.rows = get<std::uint32_t>(ma, "sa_rows", "machine.mmae");
  mc.mmae.sa.cols = get<std::uint32_t>(ma, "sa_cols", "machine.mmae");
  const Json& tl = ma.at("matlb");
  mc.mmae.matlb.enabled = get<bool>(tl, "enabled", "machine.mmae.matlb");
  mc.mmae.matlb.lookahead = get<std::uint32_t>(tl, "lookahead", "machine.mmae.matlb");
  mc.mmae.matlb.capacity = get<std::uint32_t>(tl, "capacity", "machine.mmae.matlb");

  const Json& cp = m.at("cpu");
  mc.cpu.instr_cycles = get<std::uint32_t>(cp, "instr_cycles", "machine.cpu");
  mc.cpu.poll_interval = get<std::uint32_t>(cp, "poll_interval", "machine.cpu");
  mc.cpu.efficiency = get<double>(cp, "efficiency", "machine.cpu");
  mc.cpu.fmacs = get<std::uint32_t>(cp, "fmacs", "machine.cpu");
  mc.cpu.read_window = get<std::uint32_t>(cp, "read_window", "machine.cpu");
  mc.cpu.mtq_depth = get<std::uint32_t>(cp, "mtq_depth", "machine.cpu");

  const bool ideal = get<bool>(m, "ideal", "machine");
  mc.cache.ideal = ideal;
  mc.mmae.ideal = ideal;

  const Json& w = j.at("workload");
  WorkloadConfig& wc = c.workload;
  const auto mode = get<std::string>(w, "mode", "workload");
  if (mode == "independent") wc.mode = Mode::Independent;
  else if (mode == "partitioned") wc.mode = Mode::Partitioned;
  else throw ConfigError("workload.mode must be 'independent' or 'partitioned'");
  wc.m = get<std::uint32_t>(w, "m", "workload");
  wc.n = get<std::uint32_t>(w, "n", "workload");
  wc.k = get<std::uint32_t>(w, "k", "workload");
  wc.precision = precision_of(get<std::string>(w, "precision", "workload"), "workload.precision");
  wc.tr = get<std::uint32_t>(w, "tr", "workload");
  wc.tc = get<std::uint32_t>(w, "tc", "workload");
  wc.ttr = get<std::uint32_t>(w, "ttr", "workload");
  wc.ttc = get<std::uint32_t>(w, "ttc", "workload");
  wc.accumulate = get<bool>(w, "accumulate", "workload");
  wc.stash = get<bool>(w, "stash", "workload");
  wc.lock = get<bool>(w, "lock", "workload");
  wc.post_flops = get<std::uint64_t>(w, "post_flops", "workload");
  wc.lookahead = get<std::uint32_t>(w, "lookahead", "workload");
  const auto asg = get<std::string>(w, "assignment", "workload");
  if (asg == "round_robin") wc.assignment = work::Assignment::RoundRobin;
  else if (asg == "block_cyclic") wc.assignment = work::Assignment::BlockCyclic;
  else throw ConfigError("workload.assignment must be 'round_robin' or 'block_cyclic'");
  wc.block = get<std::uint32_t>(w, "block", "workload");
  const Json& layers = w.at("layers");
  if (!layers.is_array()) throw ConfigError("workload.layers must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) wc.layers.push_back(decode_layer(layers[i], i));
  wc.program = get<std::string>(w, "program", "workload");
  wc.regions = get<std::vector<std::uint64_t>>(w, "regions", "workload");

  const Json& r = j.at("run");
  c.run.seed = get<std::uint64_t>(r, "seed", "run");
  c.run.out = get<std::string>(r, "out", "run");
  c.run.check = get<bool>(r, "check", "run");
  c.machine.seed = c.run.seed;

  if (wc.m == 0 || wc.n == 0 || wc.k == 0) throw ConfigError("workload.m, n and k must be positive");
  if (wc.tr == 0 || wc.tc == 0) throw ConfigError("workload.tr and tc must be positive");
  if ((wc.ttr == 0) != (wc.ttc == 0)) throw ConfigError("workload.ttr and ttc must both be zero or both positive");
  if (wc.regions.size() > 6) throw ConfigError("workload.regions holds at most 6 entries");
  if (wc.block == 0) throw ConfigError("workload.block must be positive");
  c.machine.validate();
  return c;
}

}  // namespace

Json default_json() { return encode(ExperimentConfig{}); }

ExperimentConfig parse_config(const Json& user) {
  Json merged = default_json();
  check_keys(user, merged, "");
  merged.merge_patch(user);
  ExperimentConfig c = decode(merged);
  // Re-encode so the echo shows normalized names (e.g. fp32 for FP32x2).
  c.effective = encode(c);
  return c;
}

void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &j;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) *node = Json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  Json user = Json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    user = Json::parse(in, nullptr, false, true);
    if (user.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  }
  for (const auto& o : overrides) apply_override(user, o);
  return parse_config(user);
}

// --- running ------------------------------------------------------------------

namespace {

std::vector<std::byte> random_matrix(std::uint64_t elems, Precision p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<std::byte> out(elems * element_size(p));
  for (std::uint64_t i = 0; i < elems; ++i) {
    const double x = dist(rng);
    switch (p) {
      case Precision::FP64: std::memcpy(&out[i * 8], &x, 8); break;
      case Precision::FP32x2: {
        const float f = static_cast<float>(x);
        std::memcpy(&out[i * 4], &f, 4);
        break;
      }
      case Precision::FP16x4: {
        const std::uint16_t h = Half::from_double(x).bits;
        std::memcpy(&out[i * 2], &h, 2);
        break;
      }
    }
  }
  return out;
}

struct GemmInstance {
  std::string label;
  std::uint32_t m = 0, n = 0, k = 0;
  work::MatrixSet set;
  std::vector<std::byte> a, b, c0;
};

GemmInstance make_gemm(Machine& mach, std::string label, std::uint32_t m, std::uint32_t n, std::uint32_t k,
                       Precision p, std::uint64_t seed, std::uint64_t stream) {
  GemmInstance g;
  g.label = std::move(label);
  g.m = m;
  g.n = n;
  g.k = k;
  std::seed_seq seq{seed, stream};
  std::mt19937_64 rng(seq);
  g.a = random_matrix(std::uint64_t{m} * k, p, rng);
  g.b = random_matrix(std::uint64_t{k} * n, p, rng);
  g.c0 = random_matrix(std::uint64_t{m} * n, p, rng);
  g.set.precision = p;
  g.set.a = mach.allocate(g.a.size());
  g.set.b = mach.allocate(g.b.size());
  g.set.c = mach.allocate(g.c0.size());
  mach.write_virtual(g.set.a, g.a.data(), g.a.size());
  mach.write_virtual(g.set.b, g.b.data(), g.b.size());
  mach.write_virtual(g.set.c, g.c0.data(), g.c0.size());
  return g;
}

work::ScheduleOptions schedule_options(const WorkloadConfig& w, const MachineConfig& m) {
  work::ScheduleOptions o;
  o.ttr = w.ttr;
  o.ttc = w.ttc;
  o.accumulate = w.accumulate;
  o.stash = w.stash;
  o.lock = w.lock;
  o.post_flops = w.post_flops;
  o.lookahead = w.lookahead;
  o.mtq_depth = m.cpu.mtq_depth;
  return o;
}

void append_schedule(Machine& mach, const work::GemmPlusSchedule& s) {
  for (std::uint32_t n = 0; n < s.per_node.size(); ++n) {
    for (const auto& op : s.per_node[n]) mach.core(n).append(op);
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg) {
  Machine mach(cfg.machine);
  const WorkloadConfig& w = cfg.workload;
  const work::ScheduleOptions opt = schedule_options(w, cfg.machine);
  std::vector<GemmInstance> gemms;

  if (!w.program.empty()) {
    // Regions are mapped in order; their bases are preloaded into R24..R29.
    std::seed_seq seq{cfg.run.seed, std::uint64_t{0xA5}};
    std::mt19937_64 rng(seq);
    std::string source;
    for (std::size_t i = 0; i < w.regions.size(); ++i) {
      const std::uint64_t bytes = w.regions[i];
      const Addr va = mach.allocate(bytes);
      const auto data = random_matrix(bytes / element_size(w.precision), w.precision, rng);
      mach.write_virtual(va, data.data(), data.size());
      source += ".set R" + std::to_string(24 + i) + ", " + std::to_string(va) + "\n";
    }
    mach.core(0).append(isa::assemble(source + w.program));
  } else if (!w.layers.empty()) {
    std::uint64_t stream = 0;
    for (const auto& layer : w.layers) {
      for (const auto& d : work::lower_dl_layer(layer)) {
        gemms.push_back(make_gemm(mach, d.name, d.m, d.n, d.k, d.precision, cfg.run.seed, stream++));
        const GemmInstance& g = gemms.back();
        const auto plan = work::plan_tiles(g.m, g.n, g.k, std::min(w.tr, g.m), std::min(w.tc, g.n), mach.nodes(),
                                           w.assignment, w.block);
        append_schedule(mach, work::build_schedule(plan, g.set, opt));
      }
    }
  } else if (w.mode == Mode::Independent) {
    for (std::uint32_t n = 0; n < mach.nodes(); ++n) {
      gemms.push_back(make_gemm(mach, "node" + std::to_string(n), w.m, w.n, w.k, w.precision, cfg.run.seed, n));
      const GemmInstance& g = gemms.back();
      const auto plan = work::plan_tiles(w.m, w.n, w.k, w.tr, w.tc, 1, w.assignment, w.block);
      auto s = work::build_schedule(plan, g.set, opt);
      for (const auto& op : s.per_node.at(0)) mach.core(n).append(op);
    }
  } else {
    gemms.push_back(make_gemm(mach, "gemm", w.m, w.n, w.k, w.precision, cfg.run.seed, 0));
    const GemmInstance& g = gemms.back();
    const auto plan = work::plan_tiles(w.m, w.n, w.k, w.tr, w.tc, mach.nodes(), w.assignment, w.block);
    append_schedule(mach, work::build_schedule(plan, g.set, opt));
  }

  mach.run();

  RunResult r;
  r.config_json = cfg.effective.is_null() ? encode(cfg).dump() : cfg.effective.dump();
  r.stats = stats::collect(mach);
  for (std::uint32_t n = 0; n < mach.nodes(); ++n) {
    const auto& recs = mach.mmae(n).records();
    r.records.insert(r.records.end(), recs.begin(), recs.end());
  }

  if (cfg.run.check) {
    r.checked = true;
    for (const auto& g : gemms) {
      const Precision p = g.set.precision;
      std::vector<std::byte> expect = w.accumulate ? g.c0 : std::vector<std::byte>(g.c0.size());
      mmae::reference_gemm(p, g.a.data(), g.k, g.b.data(), g.n, expect.data(), g.n, g.m, g.n, g.k);
      std::vector<std::byte> got(expect.size());
      mach.read_virtual(g.set.c, got.data(), got.size());
      ++r.gemms_checked;
      if (got != expect) {
        ++r.mismatches;
        if (r.first_mismatch.empty()) {
          const auto at = std::mismatch(got.begin(), got.end(), expect.begin()).first - got.begin();
          const auto elem = static_cast<std::uint64_t>(at) / element_size(p);
          r.first_mismatch = g.label + ": C[" + std::to_string(elem / g.n) + "][" + std::to_string(elem % g.n) +
                             "] differs from the reference";
        }
      }
    }
  }
  return r;
}

void write_csv(const RunResult& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  stats::emit_csv(r.stats, r.config_json, out);
}

// --- sweeps -------------------------------------------------------------------

namespace {

Json point(std::initializer_list<std::pair<const char*, Json>> kv) {
  Json j = Json::object();
  for (const auto& [k, v] : kv) j[k] = v;
  return j;
}

std::vector<CannedExperiment> make_canned() {
  std::vector<CannedExperiment> out;
  {
    CannedExperiment e;
    e.name = "matlb_gap";
    e.description = "single node FP64 GEMM, sizes 128..1024, mATLB on and off";
    e.base = {{"machine", {{"nodes", 1}}},
              {"workload", {{"precision", "fp64"}, {"tr", 1024}, {"tc", 1024}, {"ttr", 64}, {"ttc", 64}}},
              {"run", {{"check", false}}}};
    Axis size{"size", {}};
    for (int s : {128, 256, 512, 1024}) {
      size.values.push_back(point({{"workload.m", s}, {"workload.n", s}, {"workload.k", s}}));
    }
    Axis tlb{"matlb", {point({{"machine.mmae.matlb.enabled", true}}), point({{"machine.mmae.matlb.enabled", false}})}};
    e.axes = {size, tlb};
    out.push_back(e);
  }
  {
    CannedExperiment e;
    e.name = "scalability";
    e.description = "independent 1024^3 FP32 GEMM per node, 1 to 16 nodes";
    e.base = {{"workload",
               {{"mode", "independent"}, {"m", 1024}, {"n", 1024}, {"k", 1024}, {"precision", "fp32"},
                {"tr", 1024}, {"tc", 1024}, {"ttr", 64}, {"ttc", 64}}},
              {"run", {{"check", false}}}};
    Axis nodes{"nodes", {}};
    for (int n : {1, 2, 4, 8, 16}) nodes.values.push_back(point({{"machine.nodes", n}}));
    e.axes = {nodes};
    out.push_back(e);
  }
  {
    CannedExperiment e;
    e.name = "precision_peak";
    e.description = "ideal-memory 512^3 GEMM at each precision";
    e.base = {{"machine", {{"ideal", true}}}, {"workload", {{"m", 512}, {"n", 512}, {"k", 512}}}};
    Axis prec{"precision", {}};
    for (const char* p : {"fp64", "fp32", "fp16"}) prec.values.push_back(point({{"workload.precision", p}}));
    e.axes = {prec};
    out.push_back(e);
  }
  {
    CannedExperiment e;
    e.name = "gemm_plus";
    e.description = "partitioned FP32 GEMM with a CPU post phase, stash and lock toggled";
    e.base = {{"machine", {{"nodes", 4}}},
              {"workload",
               {{"mode", "partitioned"}, {"m", 512}, {"n", 512}, {"k", 256}, {"precision", "fp32"},
                {"tr", 128}, {"tc", 512}, {"post_flops", 262144}}}};
    Axis sl{"stash_lock",
            {point({{"workload.stash", false}, {"workload.lock", false}}),
             point({{"workload.stash", true}, {"workload.lock", false}}),
             point({{"workload.stash", true}, {"workload.lock", true}})}};
    e.axes = {sl};
    out.push_back(e);
  }
  return out;
}

std::vector<Json> cartesian(const std::vector<Axis>& axes) {
  std::vector<Json> points{Json::object()};
  for (const auto& axis : axes) {
    if (axis.values.empty()) throw ConfigError("sweep axis '" + axis.name + "' has no values");
    std::vector<Json> next;
    for (const auto& p : points) {
      for (const auto& v : axis.values) {
        Json q = p;
        for (auto it = v.begin(); it != v.end(); ++it) q[it.key()] = it.value();
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

}  // namespace

const std::vector<CannedExperiment>& canned_experiments() {
  static const std::vector<CannedExperiment> list = make_canned();
  return list;
}

const CannedExperiment& find_experiment(const std::string& name) {
  for (const auto& e : canned_experiments()) {
    if (e.name == name) return e;
  }
  throw ConfigError("unknown experiment '" + name + "'");
}

Axis parse_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
    throw ConfigError("axis '" + spec + "' is not key=v1,v2,...");
  }
  Axis a;
  a.name = spec.substr(0, eq);
  std::stringstream ss(spec.substr(eq + 1));
  std::string item;
  while (std::getline(ss, item, ',')) {
    Json v = Json::parse(item, nullptr, false);
    if (v.is_discarded()) v = item;
    a.values.push_back(Json{{a.name, v}});
  }
  return a;
}

std::vector<SweepEntry> run_sweep(const Json& base, const std::vector<Axis>& axes,
                                  const std::filesystem::path& out_dir, unsigned jobs) {
  const auto points = cartesian(axes);
  std::filesystem::create_directories(out_dir);
  std::vector<SweepEntry> entries(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      SweepEntry& e = entries[i];
      e.index = i;
      e.overrides = points[i];
      char name[32];
      std::snprintf(name, sizeof name, "run_%03zu.csv", i);
      e.csv = name;
      try {
        Json user = base;
        for (auto it = points[i].begin(); it != points[i].end(); ++it) {
          apply_override(user, it.key() + "=" + it.value().dump());
        }
        const ExperimentConfig cfg = parse_config(user);
        const RunResult r = run_experiment(cfg);
        write_csv(r, out_dir / e.csv);
        e.efficiency = r.stats.global.efficiency;
        e.status = r.mismatches == 0 ? "ok" : "mismatch";
        if (r.mismatches != 0) e.error = r.first_mismatch;
      } catch (const ConfigError& ex) {
        e.status = "config_error";
        e.error = ex.what();
      } catch (const mem::LockCapacity& ex) {
        e.status = "config_error";
        e.error = ex.what();
      } catch (const ProtocolError& ex) {
        e.status = "protocol_error";
        e.error = ex.what();
      } catch (const std::exception& ex) {
        e.status = "error";
        e.error = ex.what();
      }
      if (e.status != "ok") e.csv.clear();
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(points.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  Json manifest = {{"schema", stats::kSchema}, {"base", base}, {"runs", Json::array()}};
  for (const auto& e : entries) {
    manifest["runs"].push_back({{"index", e.index},
                                {"overrides", e.overrides},
                                {"csv", e.csv},
                                {"status", e.status},
                                {"error", e.error},
                                {"efficiency", e.efficiency}});
  }
  std::ofstream(out_dir / "manifest.json") << manifest.dump(2) << "\n";
  return entries;
}

}  // namespace maco::exp
