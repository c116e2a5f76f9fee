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

#include "maco/mmae/half.hpp"

#include <array>
#include <bit>
#include <cmath>

namespace maco {

namespace {

float decode_half(std::uint16_t h) {
  const std::uint32_t sign = (h & 0x8000u) << 16;
  const std::uint32_t exp = (h >> 10) & 0x1F;
  const std::uint32_t man = h & 0x3FF;
  if (exp == 0) {
    // zero or subnormal: man * 2^-24
    const float v = static_cast<float>(man) * 5.9604644775390625e-08f;
    return std::bit_cast<float>(std::bit_cast<std::uint32_t>(v) | sign);
  }
  if (exp == 31) {
    return std::bit_cast<float>(sign | 0x7F800000u | (man << 13));
  }
  return std::bit_cast<float>(sign | ((exp + 112) << 23) | (man << 13));
}

const std::array<float, 65536>& half_table() {
  static const auto table = [] {
    std::array<float, 65536> t{};
    for (std::uint32_t i = 0; i < 65536; ++i) t[i] = decode_half(static_cast<std::uint16_t>(i));
    return t;
  }();
  return table;
}

}  // namespace

float Half::to_float() const { return half_table()[bits]; }
double Half::to_double() const { return static_cast<double>(half_table()[bits]); }

Half Half::from_double(double x) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(x);
  const std::uint16_t sign = static_cast<std::uint16_t>((u >> 48) & 0x8000);
  const int exp = static_cast<int>((u >> 52) & 0x7FF);
  std::uint64_t man = u & 0xFFFFFFFFFFFFFULL;

  if (exp == 0x7FF) {
    if (man) return Half{static_cast<std::uint16_t>(sign | 0x7E00)};  // quiet NaN
    return Half{static_cast<std::uint16_t>(sign | 0x7C00)};
  }
  const int e = exp - 1023;  // unbiased
  if (e > 15) return Half{static_cast<std::uint16_t>(sign | 0x7C00)};
  if (exp == 0 && man == 0) return Half{sign};

  // Significand with hidden bit: 53 bits.
  std::uint64_t sig = man | (exp ? (1ULL << 52) : 0);
  int shift;  // bits to drop from sig to reach the binary16 significand
  std::uint16_t hexp;
  if (e >= -14) {
    shift = 52 - 10;
    hexp = static_cast<std::uint16_t>(e + 15);
  } else {
    // subnormal result: value = sig * 2^(e-52); target quantum 2^-24
    shift = 52 - 10 + (-14 - e);
    hexp = 0;
    if (shift > 63) return Half{sign};
  }
  std::uint64_t kept = sig >> shift;
  const std::uint64_t rem = sig & ((1ULL << shift) - 1);
  const std::uint64_t halfway = 1ULL << (shift - 1);
  if (rem > halfway || (rem == halfway && (kept & 1))) ++kept;

  if (hexp == 0) {
    // kept holds the subnormal mantissa; may round up into the normal range
    return Half{static_cast<std::uint16_t>(sign | kept)};
  }
  // kept includes the hidden bit at position 10; carry can bump the exponent
  if (kept >= (1ULL << 11)) {
    kept >>= 1;
    ++hexp;
  }
  if (hexp >= 31) return Half{static_cast<std::uint16_t>(sign | 0x7C00)};
  return Half{static_cast<std::uint16_t>(sign | (hexp << 10) | (kept & 0x3FF))};
}

}  // namespace maco
