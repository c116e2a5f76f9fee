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


#include "maco/work/workloads.hpp"

#include <algorithm>

#include "maco/error.hpp"

namespace maco::work {

std::vector<std::vector<std::uint32_t>> TilePlan::by_node() const {
  std::vector<std::vector<std::uint32_t>> out(nodes);
  for (const auto& t : tiles) out[t.node].push_back(t.index);
  return out;
}

TilePlan plan_tiles(std::uint32_t m, std::uint32_t n, std::uint32_t k, std::uint32_t tr, std::uint32_t tc,
                    std::uint32_t nodes, Assignment policy, std::uint32_t block) {
  if (m == 0 || n == 0 || k == 0 || tr == 0 || tc == 0) throw ConfigError("GEMM and tile dimensions must be >= 1");
  if (nodes == 0) throw ConfigError("node count must be >= 1");
  if (block == 0) throw ConfigError("block-cyclic block size must be >= 1");
  TilePlan p{m, n, k, tr, tc, nodes, {}};
  std::uint32_t idx = 0;
  for (std::uint32_t i = 0; i < m; i += tr) {
    for (std::uint32_t j = 0; j < n; j += tc) {
      const std::uint32_t node = policy == Assignment::RoundRobin ? idx % nodes : (idx / block) % nodes;
      p.tiles.push_back({idx, i, j, std::min(tr, m - i), std::min(tc, n - j), node});
      ++idx;
    }
  }
  return p;
}

isa::GemmTask tile_task(const TilePlan& plan, const TileAssign& tile, const MatrixSet& set,
                        const ScheduleOptions& opt) {
  const std::uint64_t es = element_size(set.precision);
  isa::GemmTask t;
  t.a = set.a + std::uint64_t{tile.i0} * plan.k * es;
  t.b = set.b + std::uint64_t{tile.j0} * es;
  t.c = set.c + (std::uint64_t{tile.i0} * plan.n + tile.j0) * es;
  t.m = tile.rows;
  t.n = tile.cols;
  t.k = plan.k;
  t.precision = set.precision;
  t.accumulate = opt.accumulate;
  t.ldn = tile.cols == plan.n ? 0 : plan.n;
  if (tile.rows > 0xFFFF || tile.cols > 0xFFFF) throw ConfigError("first-level tile exceeds 65535");
  t.tr = static_cast<std::uint16_t>(tile.rows);
  t.tc = static_cast<std::uint16_t>(tile.cols);
  t.ttr = static_cast<std::uint16_t>(std::min<std::uint32_t>(opt.ttr, tile.rows));
  t.ttc = static_cast<std::uint16_t>(std::min<std::uint32_t>(opt.ttc, tile.cols));
  if (opt.ttr == 0 && opt.ttc == 0) t.ttr = t.ttc = 0;
  return t;
}

namespace {

std::vector<cpu::VRange> c_rows(const TilePlan& plan, const TileAssign& tile, const MatrixSet& set) {
  const std::uint64_t es = element_size(set.precision);
  std::vector<cpu::VRange> out;
  if (tile.cols == plan.n) {
    out.push_back({set.c + std::uint64_t{tile.i0} * plan.n * es, std::uint64_t{tile.rows} * plan.n * es});
    return out;
  }
  for (std::uint32_t r = 0; r < tile.rows; ++r) {
    out.push_back({set.c + (std::uint64_t{tile.i0 + r} * plan.n + tile.j0) * es, std::uint64_t{tile.cols} * es});
  }
  return out;
}

/// Contiguous ranges worth stashing for a tile: the A row block always, B
/// only when the tile spans all of N.
std::vector<cpu::VRange> stash_ranges(const TilePlan& plan, const TileAssign& tile, const MatrixSet& set) {
  const std::uint64_t es = element_size(set.precision);
  std::vector<cpu::VRange> out;
  out.push_back({set.a + std::uint64_t{tile.i0} * plan.k * es, std::uint64_t{tile.rows} * plan.k * es});
  if (tile.cols == plan.n) out.push_back({set.b, std::uint64_t{plan.k} * plan.n * es});
  return out;
}

}  // namespace

GemmPlusSchedule build_schedule(const TilePlan& plan, const MatrixSet& set, const ScheduleOptions& opt) {
  const std::uint32_t stashes = opt.stash ? 2 : 0;
  if (opt.lookahead > 3) throw ConfigError("schedule lookahead must be <= 3");
  if (opt.lookahead + 1 + stashes > opt.mtq_depth) {
    throw ConfigError("schedule needs more task-queue entries than the MTQ has");
  }
  GemmPlusSchedule s;
  s.per_node.resize(plan.nodes);
  const auto lists = plan.by_node();
  for (std::uint32_t node = 0; node < plan.nodes; ++node) {
    auto& ops = s.per_node[node];
    const auto& mine = lists[node];
    std::vector<std::uint8_t> pending_stash;

    auto issue = [&](std::size_t t) {
      const TileAssign& tile = plan.tiles[mine[t]];
      for (std::uint8_t r : pending_stash) ops.push_back(cpu::OpWaitDone{r});
      pending_stash.clear();
      if (opt.stash) {
        const auto ranges = stash_ranges(plan, tile, set);
        for (std::size_t i = 0; i < ranges.size(); ++i) {
          const auto rd = static_cast<std::uint8_t>(16 + 2 * (t % 4) + i);
          ops.push_back(cpu::OpSetReg{6, ranges[i].va});
          ops.push_back(cpu::OpSetReg{7, ranges[i].bytes});
          for (std::uint8_t r = 8; r <= 11; ++r) ops.push_back(cpu::OpSetReg{r, 0});
          ops.push_back(cpu::OpExec{{isa::Opcode::MaStash, rd, 6}});
          pending_stash.push_back(rd);
        }
      }
      if (opt.lock) ops.push_back(cpu::OpLock{c_rows(plan, tile, set), true});
      const isa::GemmTask task = tile_task(plan, tile, set, opt);
      s.tasks.push_back({node, tile.index, task});
      const isa::ParamBlock blk = isa::pack(task);
      for (std::uint8_t r = 0; r < 6; ++r) ops.push_back(cpu::OpSetReg{r, blk[r]});
      ops.push_back(cpu::OpExec{{isa::Opcode::MaCfg, static_cast<std::uint8_t>(12 + t % 4), 0}});
    };

    std::size_t issued = 0;
    for (std::size_t t = 0; t < mine.size(); ++t) {
      while (issued < mine.size() && issued <= t + opt.lookahead) issue(issued++);
      ops.push_back(cpu::OpWaitDone{static_cast<std::uint8_t>(12 + t % 4)});
      const TileAssign& tile = plan.tiles[mine[t]];
      if (opt.post_flops > 0) {
        cpu::KernelPhase k;
        k.flops = opt.post_flops;
        k.precision = set.precision;
        k.label = opt.post_label;
        k.reads = c_rows(plan, tile, set);
        ops.push_back(cpu::OpKernel{std::move(k)});
      }
      if (opt.lock) ops.push_back(cpu::OpLock{c_rows(plan, tile, set), false});
    }
    for (std::uint8_t r : pending_stash) ops.push_back(cpu::OpWaitDone{r});
  }
  return s;
}

std::vector<GemmDims> lower_dl_layer(const DlLayerSpec& s) {
  if (s.batch == 0) throw ConfigError("layer batch must be >= 1");
  GemmDims d;
  d.name = s.name;
  d.precision = s.precision;
  switch (s.kind) {
    case LayerKind::Conv:
      if (!s.filters || !s.channels || !s.kernel_h || !s.kernel_w || !s.out_h || !s.out_w) {
        throw ConfigError("conv layer fields must be positive");
      }
      d.m = s.filters;
      d.n = s.out_h * s.out_w * s.batch;
      d.k = s.channels * s.kernel_h * s.kernel_w;
      break;
    case LayerKind::FullyConnected:
      if (!s.in_features || !s.out_features) throw ConfigError("fully-connected layer fields must be positive");
      d.m = s.batch;
      d.n = s.out_features;
      d.k = s.in_features;
      break;
    case LayerKind::AttentionProjection:
      if (!s.d_model || !s.seq) throw ConfigError("projection layer fields must be positive");
      d.m = s.seq * s.batch;
      d.n = s.d_model;
      d.k = s.d_model;
      break;
  }
  return {d};
}

}  // namespace maco::work
