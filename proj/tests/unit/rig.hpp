// Helpers shared by the machine-level tests.
#pragma once

#include <cstring>
#include <random>
#include <vector>

#include "maco/machine.hpp"
#include "maco/mmae/half.hpp"
#include "maco/mmae/systolic.hpp"

namespace rig {

using namespace maco;

inline MachineConfig small_config(std::uint32_t nodes = 1) {
  MachineConfig c;
  c.nodes = nodes;
  return c;
}

/// Load a parameter block into R0..R5, issue `op` with Rd = R12, wait for it
/// and return the MA_STATE status word (left in R30).
inline void script_task(Machine& m, std::uint32_t node, isa::Opcode op, const isa::ParamBlock& block) {
  auto& core = m.core(node);
  for (std::uint8_t r = 0; r < 6; ++r) core.append(cpu::OpSetReg{r, block[r]});
  core.append(cpu::OpExec{isa::Instruction{op, 12, 0}});
  core.append(cpu::OpWaitDone{12});
}

inline std::uint64_t run_task(Machine& m, isa::Opcode op, const isa::ParamBlock& block, std::uint32_t node = 0) {
  script_task(m, node, op, block);
  m.run();
  return m.core(node).reg(30);
}

inline std::vector<std::byte> random_values(std::uint64_t elems, Precision p, std::mt19937_64& rng,
                                            double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<std::byte> out(elems * element_size(p));
  for (std::uint64_t i = 0; i < elems; ++i) {
    const double x = d(rng);
    if (p == Precision::FP64) {
      std::memcpy(&out[i * 8], &x, 8);
    } else if (p == Precision::FP32x2) {
      const float f = static_cast<float>(x);
      std::memcpy(&out[i * 4], &f, 4);
    } else {
      const std::uint16_t h = Half::from_double(x).bits;
      std::memcpy(&out[i * 2], &h, 2);
    }
  }
  return out;
}

inline Addr put(Machine& m, const std::vector<std::byte>& data) {
  const Addr va = m.allocate(data.size());
  m.write_virtual(va, data.data(), data.size());
  return va;
}

inline std::vector<std::byte> get(Machine& m, Addr va, std::uint64_t bytes) {
  std::vector<std::byte> out(bytes);
  m.read_virtual(va, out.data(), bytes);
  return out;
}

inline double element(const std::vector<std::byte>& v, std::size_t i, Precision p) {
  if (p == Precision::FP64) {
    double x;
    std::memcpy(&x, &v[i * 8], 8);
    return x;
  }
  if (p == Precision::FP32x2) {
    float f;
    std::memcpy(&f, &v[i * 4], 4);
    return f;
  }
  std::uint16_t h;
  std::memcpy(&h, &v[i * 2], 2);
  return Half::from_bits(h).to_double();
}

constexpr std::uint64_t status_done = 1;
constexpr std::uint64_t status_exc = 2;
inline ExceptionType status_type(std::uint64_t w) { return static_cast<ExceptionType>((w >> 4) & 0xF); }

}  // namespace rig
