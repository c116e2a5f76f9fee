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

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace maco {

using Addr = std::uint64_t;

inline constexpr std::uint32_t kLineBytes = 64;
inline constexpr std::uint32_t kMeshDim = 4;
inline constexpr std::uint32_t kMaxNodes = kMeshDim * kMeshDim;

/// MMAE arithmetic modes. FP32 and FP16 run as 2- and 4-way SIMD per PE.
enum class Precision : std::uint8_t { FP64 = 0, FP32x2 = 1, FP16x4 = 2 };

constexpr std::uint32_t element_size(Precision p) {
  switch (p) {
    case Precision::FP64: return 8;
    case Precision::FP32x2: return 4;
    case Precision::FP16x4: return 2;
  }
  return 0;
}

constexpr std::uint32_t simd_ways(Precision p) {
  switch (p) {
    case Precision::FP64: return 1;
    case Precision::FP32x2: return 2;
    case Precision::FP16x4: return 4;
  }
  return 0;
}

std::string_view precision_name(Precision p);
std::optional<Precision> parse_precision(std::string_view s);

/// Task-queue exception taxonomy; values are the status-word encoding.
enum class ExceptionType : std::uint8_t {
  None = 0,
  ParamFault = 1,
  FloatingPoint = 2,
  PageFault = 3,
  DataAbort = 4,
};

std::string_view exception_name(ExceptionType e);

}  // namespace maco
