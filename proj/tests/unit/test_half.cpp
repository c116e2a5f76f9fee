#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "maco/mmae/half.hpp"

using maco::Half;

namespace {

// Oracle: decode every finite bit pattern by formula, then round a double to
// the nearest entry of the sorted table, ties to even significand.
double decode(std::uint16_t b) {
  const int s = b >> 15, e = (b >> 10) & 0x1F, m = b & 0x3FF;
  const double mag = e == 0 ? std::ldexp(m, -24) : std::ldexp(1024 + m, e - 25);
  return s ? -mag : mag;
}

struct Table {
  std::vector<std::pair<double, std::uint16_t>> pos;  // non-negative finite values
  Table() {
    for (std::uint32_t b = 0; b < 0x7C00; ++b) pos.emplace_back(decode(static_cast<std::uint16_t>(b)), b);
  }
  std::uint16_t round(double x) const {
    const std::uint16_t sign = std::signbit(x) ? 0x8000 : 0;
    const double a = std::fabs(x);
    // 65520 is halfway between the largest finite value and the next binade.
    if (a >= 65520.0) return sign | 0x7C00;
    auto it = std::lower_bound(pos.begin(), pos.end(), a, [](const auto& p, double v) { return p.first < v; });
    if (it == pos.end()) return sign | 0x7BFF;  // (65504, 65520) rounds down
    if (it->first == a) return sign | it->second;
    const auto lo = *(it - 1), hi = *it;
    const double dl = a - lo.first, dh = hi.first - a;
    if (dl < dh) return sign | lo.second;
    if (dh < dl) return sign | hi.second;
    return sign | ((lo.second & 1) ? hi.second : lo.second);
  }
};

const Table& table() {
  static const Table t;
  return t;
}

}  // namespace

TEST_SUITE("half") {
  TEST_CASE("decode matches the table for every pattern") {
    for (std::uint32_t b = 0; b < 0x10000; ++b) {
      const Half h = Half::from_bits(static_cast<std::uint16_t>(b));
      if (!h.is_finite()) continue;
      REQUIRE(h.to_double() == decode(static_cast<std::uint16_t>(b)));
    }
  }

  TEST_CASE("from_double rounds to nearest even") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> mant(1.0, 2.0);
    std::uniform_int_distribution<int> ex(-27, 17);
    for (int i = 0; i < 200000; ++i) {
      double x = std::ldexp(mant(rng), ex(rng));
      if (i & 1) x = -x;
      REQUIRE(Half::from_double(x).bits == table().round(x));
    }
    // exact midpoints between neighbours
    for (std::uint32_t b = 0; b + 1 < 0x7C00; b += 37) {
      const double mid = (decode(static_cast<std::uint16_t>(b)) + decode(static_cast<std::uint16_t>(b + 1))) / 2;
      REQUIRE(Half::from_double(mid).bits == table().round(mid));
    }
  }

  TEST_CASE("specials") {
    CHECK(Half::from_double(65504.0).bits == 0x7BFF);
    CHECK(Half::from_double(65519.99).bits == 0x7BFF);
    CHECK(Half::from_double(65520.0).bits == 0x7C00);
    CHECK(Half::from_double(-1e9).bits == 0xFC00);
    CHECK(Half::from_double(std::ldexp(1.0, -25)).bits == 0x0000);  // tie to even (zero)
    CHECK(Half::from_double(std::ldexp(1.5, -25)).bits == 0x0001);
    CHECK(Half::from_double(-0.0).bits == 0x8000);
    CHECK_FALSE(Half::from_double(NAN).is_finite());
  }

  TEST_CASE("half_mac rounds the product and the sum separately") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> bits(0, 0x7BFF);
    for (int i = 0; i < 100000; ++i) {
      const auto a = Half::from_bits(static_cast<std::uint16_t>(bits(rng) | (i & 1 ? 0x8000 : 0)));
      const auto b = Half::from_bits(static_cast<std::uint16_t>(bits(rng)));
      const auto c = Half::from_bits(static_cast<std::uint16_t>(bits(rng) | (i & 2 ? 0x8000 : 0)));
      const std::uint16_t p = table().round(decode(a.bits) * decode(b.bits));
      if ((p & 0x7C00) == 0x7C00) continue;
      const double sum = decode(c.bits) + decode(p);  // exact in double
      REQUIRE(maco::half_mac(c, a, b).bits == table().round(sum));
    }
  }
}
