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


/**
 * @file workloads.hpp
 * @brief First-level tiling, tile-to-node assignment, GEMM+ core scripts and
 *        DL-layer lowering.
 *
 * Register use in generated scripts:
 *
 *   R0-R5    MA_CFG parameter block
 *   R6-R11   MA_STASH parameter block
 *   R12-R15  MAIDs of GEMM tasks (tile index mod 4)
 *   R16-R23  MAIDs of stash tasks
 *   R30      MA_STATE scratch used by polling
 */

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "maco/cpu/core.hpp"
#include "maco/isa/mpais.hpp"
#include "maco/types.hpp"

namespace maco::work {

enum class Assignment : std::uint8_t { RoundRobin, BlockCyclic };

struct TileAssign {
  std::uint32_t index = 0;  // row-major position in the tile grid
  std::uint32_t i0 = 0, j0 = 0;
  std::uint32_t rows = 0, cols = 0;
  std::uint32_t node = 0;
};

struct TilePlan {
  std::uint32_t m = 0, n = 0, k = 0;
  std::uint32_t tr = 0, tc = 0;
  std::uint32_t nodes = 1;
  std::vector<TileAssign> tiles;

  std::vector<std::vector<std::uint32_t>> by_node() const;
};

/// Row-major C tiles dealt to nodes: one at a time (RoundRobin) or in runs
/// of `block` tiles (BlockCyclic).
TilePlan plan_tiles(std::uint32_t m, std::uint32_t n, std::uint32_t k, std::uint32_t tr, std::uint32_t tc,
                    std::uint32_t nodes, Assignment policy = Assignment::RoundRobin, std::uint32_t block = 2);

struct MatrixSet {
  Addr a = 0, b = 0, c = 0;
  Precision precision = Precision::FP64;
};

struct ScheduleOptions {
  std::uint32_t ttr = 64, ttc = 64;  // 0, 0 lets the engine choose
  bool accumulate = false;
  bool stash = false;
  bool lock = false;
  std::uint64_t post_flops = 0;  // per tile; 0 means no CPU post phase
  std::string post_label = "post";
  std::uint32_t lookahead = 1;  // tiles issued before waiting on the current one
  std::uint32_t mtq_depth = 4;
};

/// The MA_CFG task for one tile of C = A * B.
isa::GemmTask tile_task(const TilePlan& plan, const TileAssign& tile, const MatrixSet& set,
                        const ScheduleOptions& opt);

struct ScheduledTask {
  std::uint32_t node = 0;
  std::uint32_t tile = 0;
  isa::GemmTask task;
};

struct GemmPlusSchedule {
  std::vector<std::vector<cpu::CoreOp>> per_node;
  std::vector<ScheduledTask> tasks;
};

/// Per node: stash the tile's A rows (and B when it is contiguous), lock the
/// C tile, MA_CFG, then for each tile poll to completion, release, run the
/// post phase over the locked C tile and unlock. Tile t+1 is issued before
/// waiting on tile t (lookahead 1).
GemmPlusSchedule build_schedule(const TilePlan& plan, const MatrixSet& set, const ScheduleOptions& opt);

// --- DL layers --------------------------------------------------------------

enum class LayerKind : std::uint8_t { Conv, FullyConnected, AttentionProjection };

struct DlLayerSpec {
  LayerKind kind = LayerKind::FullyConnected;
  std::string name;
  Precision precision = Precision::FP32x2;
  std::uint32_t batch = 1;
  // conv
  std::uint32_t filters = 0, channels = 0, kernel_h = 1, kernel_w = 1, out_h = 0, out_w = 0;
  // fully connected
  std::uint32_t in_features = 0, out_features = 0;
  // attention projection
  std::uint32_t d_model = 0, seq = 0;
};

struct GemmDims {
  std::string name;
  std::uint32_t m = 0, n = 0, k = 0;
  Precision precision = Precision::FP32x2;
  std::uint64_t flops() const { return 2ULL * m * n * k; }
};

/// im2col lowering: conv -> (filters, out_h*out_w*batch, channels*kh*kw);
/// FC -> (batch, out, in); projection -> (seq*batch, d_model, d_model).
std::vector<GemmDims> lower_dl_layer(const DlLayerSpec& spec);

}  // namespace maco::work
