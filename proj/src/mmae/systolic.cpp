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

#include "maco/mmae/systolic.hpp"

#include <cmath>
#include <cstring>
#include <vector>

namespace maco::mmae {

template <typename T>
void accumulate_block(const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc,
                      std::uint32_t r, std::uint32_t cols, std::uint32_t kk) {
  for (std::uint32_t i = 0; i < r; ++i) {
    T* crow = c + i * ldc;
    for (std::uint32_t k = 0; k < kk; ++k) {
      const T av = a[i * lda + k];
      const T* brow = b + k * ldb;
      if constexpr (std::is_same_v<T, Half>) {
        for (std::uint32_t j = 0; j < cols; ++j) crow[j] = half_mac(crow[j], av, brow[j]);
      } else {
        for (std::uint32_t j = 0; j < cols; ++j) {
          const T p = av * brow[j];
          crow[j] = crow[j] + p;
        }
      }
    }
  }
}

template void accumulate_block<double>(const double*, std::size_t, const double*, std::size_t, double*,
                                       std::size_t, std::uint32_t, std::uint32_t, std::uint32_t);
template void accumulate_block<float>(const float*, std::size_t, const float*, std::size_t, float*, std::size_t,
                                      std::uint32_t, std::uint32_t, std::uint32_t);
template void accumulate_block<Half>(const Half*, std::size_t, const Half*, std::size_t, Half*, std::size_t,
                                     std::uint32_t, std::uint32_t, std::uint32_t);

namespace {

template <typename T>
bool any_non_finite(const T* c, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    if constexpr (std::is_same_v<T, Half>) {
      if (!c[i].is_finite()) return true;
    } else {
      if (!std::isfinite(c[i])) return true;
    }
  }
  return false;
}

template <typename T>
bool step_typed(std::span<const std::byte> a, std::span<const std::byte> b, std::span<std::byte> c,
                std::uint32_t r, std::uint32_t cols, std::uint32_t kk) {
  // Buffers come from byte storage; the element types are trivially
  // copyable and the storage is suitably aligned (vector<std::byte> of
  // element-multiple sizes allocated by operator new).
  const T* pa = reinterpret_cast<const T*>(a.data());
  const T* pb = reinterpret_cast<const T*>(b.data());
  T* pc = reinterpret_cast<T*>(c.data());
  accumulate_block<T>(pa, kk, pb, cols, pc, cols, r, cols, kk);
  return any_non_finite(pc, std::size_t{r} * cols);
}

}  // namespace

TileStepResult systolic_tile_step(std::span<const std::byte> a, std::span<const std::byte> b,
                                  std::span<std::byte> c, std::uint32_t r, std::uint32_t cols,
                                  std::uint32_t kk, Precision p, const SystolicArrayModel& sa) {
  TileStepResult res;
  res.cycles = sa.step_cycles(r, cols, kk, p);
  switch (p) {
    case Precision::FP64: res.non_finite = step_typed<double>(a, b, c, r, cols, kk); break;
    case Precision::FP32x2: res.non_finite = step_typed<float>(a, b, c, r, cols, kk); break;
    case Precision::FP16x4: res.non_finite = step_typed<Half>(a, b, c, r, cols, kk); break;
  }
  return res;
}

void reference_gemm(Precision p, const std::byte* a, std::size_t lda, const std::byte* b, std::size_t ldb,
                    std::byte* c, std::size_t ldc, std::uint32_t m, std::uint32_t n, std::uint32_t k) {
  auto run = [&]<typename T>(T*) {
    const T* pa = reinterpret_cast<const T*>(a);
    const T* pb = reinterpret_cast<const T*>(b);
    T* pc = reinterpret_cast<T*>(c);
    for (std::uint32_t i = 0; i < m; ++i) {
      for (std::uint32_t j = 0; j < n; ++j) {
        T acc = pc[i * ldc + j];
        for (std::uint32_t kk = 0; kk < k; ++kk) {
          if constexpr (std::is_same_v<T, Half>) {
            acc = half_mac(acc, pa[i * lda + kk], pb[kk * ldb + j]);
          } else {
            const T prod = pa[i * lda + kk] * pb[kk * ldb + j];
            acc = acc + prod;
          }
        }
        pc[i * ldc + j] = acc;
      }
    }
  };
  switch (p) {
    case Precision::FP64: run(static_cast<double*>(nullptr)); break;
    case Precision::FP32x2: run(static_cast<float*>(nullptr)); break;
    case Precision::FP16x4: run(static_cast<Half*>(nullptr)); break;
  }
}

}  // namespace maco::mmae
