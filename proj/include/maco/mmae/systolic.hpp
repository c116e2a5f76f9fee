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
 * @file systolic.hpp
 * @brief Functional and analytical-timing model of the 4x4 input-stationary
 *        systolic array.
 *
 * Functional semantics (the canonical accumulation order): each output
 * element starts from its C value and adds a[i][k]*b[k][j] for ascending k,
 * rounding the product and the sum separately in the element precision.
 * Tiling never reorders k, so any tiled execution reproduces a plain
 * triple loop bit for bit.
 *
 * Timing: a step with an r x c output block and a K-strip of kk costs
 * fill + ceil(r/4) * ceil(c/(4*ways)) * kk cycles, with fill = rows+cols-1.
 * In SIMD modes each PE lane produces `ways` adjacent output columns.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "maco/mmae/half.hpp"
#include "maco/types.hpp"

namespace maco::mmae {

struct SystolicArrayModel {
  std::uint32_t rows = 4;
  std::uint32_t cols = 4;

  std::uint32_t fmacs() const { return rows * cols; }
  std::uint32_t fill_cycles() const { return rows + cols - 1; }
  std::uint64_t peak_flops_per_cycle(Precision p) const { return 2ULL * fmacs() * simd_ways(p); }

  std::uint64_t step_cycles(std::uint32_t r, std::uint32_t c, std::uint32_t kk, Precision p) const {
    const std::uint64_t lane_cols = std::uint64_t{cols} * simd_ways(p);
    return fill_cycles() + ((r + rows - 1) / rows) * ((c + lane_cols - 1) / lane_cols) * std::uint64_t{kk};
  }
};

/// C[r x c] += A[r x kk] * B[kk x c] in the canonical order. Leading
/// dimensions are in elements.
template <typename T>
void accumulate_block(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
                      std::uint32_t r, std::uint32_t cols, std::uint32_t kk);

extern template void accumulate_block<double>(const double*, std::size_t, const double*, std::size_t, double*,
                                              std::size_t, std::uint32_t, std::uint32_t, std::uint32_t);
extern template void accumulate_block<float>(const float*, std::size_t, const float*, std::size_t, float*,
                                             std::size_t, std::uint32_t, std::uint32_t, std::uint32_t);
extern template void accumulate_block<Half>(const Half*, std::size_t, const Half*, std::size_t, Half*,
                                            std::size_t, std::uint32_t, std::uint32_t, std::uint32_t);

struct TileStepResult {
  std::uint64_t cycles = 0;
  bool non_finite = false;  // any NaN/Inf in the updated C block
};

/// One systolic step over packed row-major byte buffers (A: r x kk,
/// B: kk x c, C: r x c, all in precision p).
TileStepResult systolic_tile_step(std::span<const std::byte> a, std::span<const std::byte> b,
                                  std::span<std::byte> c, std::uint32_t r, std::uint32_t cols,
                                  std::uint32_t kk, Precision p, const SystolicArrayModel& sa = {});

/// Plain triple-loop GEMM in the canonical order over typed matrices, used
/// by the CLI functional check. C is m x n with leading dimension ldc.
void reference_gemm(Precision p, const std::byte* a, std::size_t lda, const std::byte* b, std::size_t ldb,
                    std::byte* c, std::size_t ldc, std::uint32_t m, std::uint32_t n, std::uint32_t k);

}  // namespace maco::mmae
