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


#include "maco/tiling/tiling.hpp"

#include <algorithm>
#include <bit>

namespace maco::tiling {

namespace {

bool fits(std::uint32_t ttr, std::uint32_t ttc, std::uint32_t kk, std::uint32_t es, std::uint64_t buffer) {
  return isa::working_set_bytes(ttr, ttc, kk, es) <= buffer;
}

}  // namespace

std::vector<TilePair> candidates(std::uint32_t tr, std::uint32_t tc, std::uint32_t k_strip, Precision p,
                                 std::uint64_t buffer_bytes) {
  if (tr == 0 || tc == 0 || k_strip == 0) throw ConfigError("tile dimensions must be positive");
  const std::uint32_t es = element_size(p);
  if (!fits(std::min(tr, 4u), std::min(tc, 4u), k_strip, es, buffer_bytes)) {
    throw NoFeasiblePair("even a 4x4 sub-tile overflows the buffer");
  }
  std::vector<TilePair> feasible;
  for (std::uint32_t r = 1; r <= tr; r <<= 1) {
    for (std::uint32_t c = 1; c <= tc; c <<= 1) {
      if (fits(r, c, k_strip, es, buffer_bytes)) feasible.push_back({r, c});
    }
  }
  std::vector<TilePair> maximal;
  for (const auto& a : feasible) {
    const bool dominated = std::any_of(feasible.begin(), feasible.end(), [&](const TilePair& b) {
      return b.ttr >= a.ttr && b.ttc >= a.ttc && !(b == a);
    });
    if (!dominated) maximal.push_back(a);
  }
  std::sort(maximal.begin(), maximal.end(), [&](const TilePair& x, const TilePair& y) {
    const auto wx = isa::working_set_bytes(x.ttr, x.ttc, k_strip, es);
    const auto wy = isa::working_set_bytes(y.ttr, y.ttc, k_strip, es);
    if (wx != wy) return wx > wy;
    return x.ttr > y.ttr;
  });
  if (maximal.size() > kMaxCandidates) maximal.resize(kMaxCandidates);
  return maximal;
}

std::uint32_t planning_k_strip(std::uint32_t k) { return std::min<std::uint32_t>(k, 64); }

std::vector<TilePair> candidates_for(const isa::GemmTask& t, std::uint64_t buffer_bytes) {
  const std::uint32_t tr = std::min<std::uint32_t>(t.tr, std::bit_ceil(t.m));
  const std::uint32_t tc = std::min<std::uint32_t>(t.tc, std::bit_ceil(t.n));
  return candidates(tr, tc, planning_k_strip(t.k), t.precision, buffer_bytes);
}

TtSelection autotune(const std::vector<TilePair>& cands, const std::function<std::uint64_t(TilePair)>& measure) {
  if (cands.empty()) throw NoFeasiblePair("autotune needs at least one candidate");
  TtSelection sel;
  sel.candidates = cands;
  std::size_t best = 0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    sel.cycles.push_back(cands.size() == 1 ? 0 : measure(cands[i]));
    if (i == 0) continue;
    const auto& b = cands[best];
    const auto& c = cands[i];
    if (sel.cycles[i] < sel.cycles[best] ||
        (sel.cycles[i] == sel.cycles[best] && (c.ttr > b.ttr || (c.ttr == b.ttr && c.ttc > b.ttc)))) {
      best = i;
    }
  }
  sel.chosen = cands[best];
  return sel;
}

}  // namespace maco::tiling
