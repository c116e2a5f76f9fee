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

namespace maco {

/// IEEE 754 binary16 storage with round-to-nearest-even conversion.
struct Half {
  std::uint16_t bits = 0;

  static Half from_bits(std::uint16_t b) { return Half{b}; }
  static Half from_double(double x);
  double to_double() const;
  float to_float() const;

  bool is_finite() const { return (bits & 0x7C00) != 0x7C00; }
  bool operator==(const Half&) const = default;
};

/// c + a*b with each operation rounded to binary16 (no fused multiply-add).
/// The product of two binary16 values and the sum of two binary16 values are
/// exact in binary64, so a single rounding per operation is achieved.
inline Half half_mac(Half c, Half a, Half b) {
  const Half p = Half::from_double(a.to_double() * b.to_double());
  return Half::from_double(c.to_double() + p.to_double());
}

}  // namespace maco
