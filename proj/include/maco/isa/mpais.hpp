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
 * @file mpais.hpp
 * @brief The seven matrix-assist instructions: codec, assembler and
 *        parameter-block validation.
 *
 * Binary layout of an instruction word (little-endian when stored):
 *
 *   bits[31:24]  0xE0 + opcode index (MA_MOVE=0 ... MA_CLEAR=6)
 *   bits[23:16]  reserved, must be zero
 *   bits[15:8]   Rd
 *   bits[7:0]    Rn
 *
 * Parameter blocks occupy Rn..Rn+5. MA_CFG layout:
 *
 *   R0 = A base, R1 = B base, R2 = C base (virtual, 8-byte aligned)
 *   R3 = M[63:32] | N[31:0]
 *   R4 = K[63:32] | precision[31:28] | accumulate[27] | ldn[26:0]
 *   R5 = Tr[63:48] | Tc[47:32] | ttr[31:16] | ttc[15:0]
 *
 * ldn is the leading dimension (in elements) of B and C; zero means N. It
 * lets a task address one first-level tile of a larger matrix. A always has
 * leading dimension K. ttr = ttc = 0 requests on-engine tile selection.
 */

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "maco/error.hpp"
#include "maco/types.hpp"

namespace maco::isa {

inline constexpr int kNumRegisters = 31;
inline constexpr std::uint64_t kBufferBytes = 192 * 1024;
inline constexpr std::uint64_t kAllocFailure = ~0ULL;

enum class Opcode : std::uint8_t { MaMove, MaInit, MaStash, MaCfg, MaRead, MaState, MaClear };
inline constexpr int kNumOpcodes = 7;

std::string_view mnemonic(Opcode op);
std::optional<Opcode> parse_mnemonic(std::string_view s);
constexpr bool uses_param_block(Opcode op) { return op <= Opcode::MaCfg; }

struct Instruction {
  Opcode op = Opcode::MaCfg;
  std::uint8_t rd = 0;
  std::uint8_t rn = 0;

  bool operator==(const Instruction&) const = default;
};

class IsaError : public Error {
 public:
  enum class Kind { InvalidRegister, UnknownOpcode, NonzeroReservedBits, ParseError, UndefinedRegisterUse };
  IsaError(Kind kind, const std::string& what, int line = 0) : Error(what), kind_(kind), line_(line) {}
  Kind kind() const { return kind_; }
  /// 1-based source line for assembler errors, else 0.
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

std::uint32_t encode(const Instruction& instr);
Instruction decode(std::uint32_t word);

// --- assembly -------------------------------------------------------------

struct SetDirective {
  std::uint8_t reg = 0;
  std::uint64_t value = 0;
  bool operator==(const SetDirective&) const = default;
};

using Statement = std::variant<SetDirective, Instruction>;

/// Ordered statement stream. `.set` writes take effect in program order.
struct Program {
  std::vector<Statement> statements;

  std::size_t instruction_count() const;
  bool operator==(const Program&) const = default;
};

/// Grammar, one statement per line, '#' starts a comment:
///   .set Rk, <value>         value is decimal or 0x-hex
///   MA_CFG Rd, Rn            (likewise MA_MOVE/MA_INIT/MA_STASH/MA_READ/MA_STATE)
///   MA_CLEAR Rn
Program assemble(std::string_view source);
std::string print(const Program& program);

// --- parameter blocks ------------------------------------------------------

using ParamBlock = std::array<std::uint64_t, 6>;

struct GemmTask {
  Addr a = 0, b = 0, c = 0;
  std::uint32_t m = 0, n = 0, k = 0;
  Precision precision = Precision::FP64;
  bool accumulate = false;
  std::uint32_t ldn = 0;  // 0 => n
  std::uint16_t tr = 0, tc = 0, ttr = 0, ttc = 0;

  std::uint32_t ld_bc() const { return ldn == 0 ? n : ldn; }
  std::uint64_t flops() const { return 2ULL * m * n * k; }
  bool autotune() const { return ttr == 0 && ttc == 0; }
  bool operator==(const GemmTask&) const = default;
};

enum class TransferKind : std::uint8_t { Move, Init, Stash };

struct TransferTask {
  TransferKind kind = TransferKind::Move;
  Addr dst = 0;  // Stash: the range start
  Addr src = 0;  // Move only
  std::uint64_t length = 0;
  bool operator==(const TransferTask&) const = default;
};

using Task = std::variant<GemmTask, TransferTask>;

ParamBlock pack(const GemmTask& t);
ParamBlock pack(const TransferTask& t);

/// Outcome of parameter validation. A fault never throws: it travels to the
/// task queue as ExceptionType::ParamFault.
struct Validated {
  std::optional<Task> task;
  ExceptionType fault = ExceptionType::None;
  std::string reason;

  bool ok() const { return task.has_value(); }
};

Validated validate_params(Opcode op, const ParamBlock& block,
                          std::uint64_t buffer_bytes = kBufferBytes);

/// Bytes of on-chip buffer a double-buffered (ttr, ttc, kk) schedule needs.
constexpr std::uint64_t working_set_bytes(std::uint64_t ttr, std::uint64_t ttc, std::uint64_t kk,
                                          std::uint32_t es) {
  return 2 * (ttr * kk + kk * ttc + ttr * ttc) * es;
}

/// K-strip for a (ttr, ttc) pair: K itself when it fits, else the largest
/// power of two that fits. Returns 0 when not even kk = 1 fits.
std::uint32_t choose_k_strip(std::uint32_t ttr, std::uint32_t ttc, std::uint32_t k, Precision p,
                             std::uint64_t buffer_bytes = kBufferBytes);

}  // namespace maco::isa
