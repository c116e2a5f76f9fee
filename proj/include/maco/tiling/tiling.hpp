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
 * @file tiling.hpp
 * @brief Second-level (ttr, ttc) tile selection inside a first-level tile.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "maco/error.hpp"
#include "maco/isa/mpais.hpp"
#include "maco/types.hpp"

namespace maco::tiling {

class NoFeasiblePair : public Error {
 public:
  using Error::Error;
};

struct TilePair {
  std::uint32_t ttr = 0;
  std::uint32_t ttc = 0;
  bool operator==(const TilePair&) const = default;
};

inline constexpr std::size_t kMaxCandidates = 8;

/// Power-of-two pairs no larger than (tr, tc) whose double-buffered working
/// set with a k-strip of `k_strip` fits `buffer_bytes`, restricted to the
/// maximal ones (no other feasible pair is at least as large in both
/// dimensions). Ordered by buffer utilisation, then larger ttr. At most
/// kMaxCandidates entries.
std::vector<TilePair> candidates(std::uint32_t tr, std::uint32_t tc, std::uint32_t k_strip, Precision p,
                                 std::uint64_t buffer_bytes = isa::kBufferBytes);

/// k-strip assumed when ranking candidates for a task.
std::uint32_t planning_k_strip(std::uint32_t k);

/// Candidate list for a GEMM task's first-level tile.
std::vector<TilePair> candidates_for(const isa::GemmTask& t, std::uint64_t buffer_bytes = isa::kBufferBytes);

struct TtSelection {
  std::vector<TilePair> candidates;
  std::vector<std::uint64_t> cycles;  // parallel to candidates
  TilePair chosen;
};

/// Runs `measure` once per candidate and keeps the cheapest. Ties go to the
/// larger ttr, then the larger ttc.
TtSelection autotune(const std::vector<TilePair>& cands, const std::function<std::uint64_t(TilePair)>& measure);

}  // namespace maco::tiling
