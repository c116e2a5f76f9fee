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

#include "maco/isa/mpais.hpp"

#include <algorithm>
#include <bitset>
#include <cctype>
#include <charconv>
#include <sstream>

namespace maco::isa {

namespace {

constexpr std::string_view kMnemonics[kNumOpcodes] = {
    "MA_MOVE", "MA_INIT", "MA_STASH", "MA_CFG", "MA_READ", "MA_STATE", "MA_CLEAR",
};
constexpr std::uint32_t kOpcodeBase = 0xE0;

void check_registers(const Instruction& in) {
  if (in.rd >= kNumRegisters || in.rn >= kNumRegisters) {
    throw IsaError(IsaError::Kind::InvalidRegister, "register index out of range");
  }
  if (uses_param_block(in.op) && in.rn + 5 >= kNumRegisters) {
    throw IsaError(IsaError::Kind::InvalidRegister,
                   "parameter block R" + std::to_string(in.rn) + "..R" + std::to_string(in.rn + 5) +
                       " exceeds the register file");
  }
  if (in.op == Opcode::MaClear && in.rd != 0) {
    throw IsaError(IsaError::Kind::InvalidRegister, "MA_CLEAR has no destination register");
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

[[noreturn]] void parse_fail(int line, const std::string& msg) {
  throw IsaError(IsaError::Kind::ParseError, "line " + std::to_string(line) + ": " + msg, line);
}

std::uint8_t parse_register(std::string_view tok, int line) {
  tok = trim(tok);
  if (tok.size() < 2 || (tok[0] != 'R' && tok[0] != 'r')) parse_fail(line, "expected register, got '" + std::string(tok) + "'");
  unsigned v = 0;
  auto [p, ec] = std::from_chars(tok.data() + 1, tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) parse_fail(line, "bad register '" + std::string(tok) + "'");
  if (v >= static_cast<unsigned>(kNumRegisters)) parse_fail(line, "register R" + std::to_string(v) + " does not exist");
  return static_cast<std::uint8_t>(v);
}

std::uint64_t parse_value(std::string_view tok, int line) {
  tok = trim(tok);
  std::uint64_t v = 0;
  int base = 10;
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    tok.remove_prefix(2);
    base = 16;
  }
  if (tok.empty()) parse_fail(line, "missing value");
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v, base);
  if (ec != std::errc() || p != tok.data() + tok.size()) parse_fail(line, "bad value '" + std::string(tok) + "'");
  return v;
}

std::vector<std::string_view> split_operands(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

std::string_view mnemonic(Opcode op) { return kMnemonics[static_cast<int>(op)]; }

std::optional<Opcode> parse_mnemonic(std::string_view s) {
  const std::string u = upper(s);
  for (int i = 0; i < kNumOpcodes; ++i) {
    if (u == kMnemonics[i]) return static_cast<Opcode>(i);
  }
  return std::nullopt;
}

std::uint32_t encode(const Instruction& instr) {
  check_registers(instr);
  return ((kOpcodeBase + static_cast<std::uint32_t>(instr.op)) << 24) |
         (static_cast<std::uint32_t>(instr.rd) << 8) | instr.rn;
}

Instruction decode(std::uint32_t word) {
  const std::uint32_t top = word >> 24;
  if (top < kOpcodeBase || top >= kOpcodeBase + kNumOpcodes) {
    throw IsaError(IsaError::Kind::UnknownOpcode, "unknown opcode byte 0x" + [&] {
      std::ostringstream os;
      os << std::hex << top;
      return os.str();
    }());
  }
  if ((word >> 16) & 0xFF) {
    throw IsaError(IsaError::Kind::NonzeroReservedBits, "reserved bits [23:16] set");
  }
  Instruction in{static_cast<Opcode>(top - kOpcodeBase), static_cast<std::uint8_t>((word >> 8) & 0xFF),
                 static_cast<std::uint8_t>(word & 0xFF)};
  if (in.op == Opcode::MaClear && in.rd != 0) {
    throw IsaError(IsaError::Kind::NonzeroReservedBits, "MA_CLEAR Rd field must be zero");
  }
  check_registers(in);
  return in;
}

std::size_t Program::instruction_count() const {
  return static_cast<std::size_t>(std::count_if(statements.begin(), statements.end(), [](const Statement& s) {
    return std::holds_alternative<Instruction>(s);
  }));
}

Program assemble(std::string_view source) {
  Program prog;
  std::bitset<kNumRegisters> defined;
  int line_no = 0;
  while (!source.empty()) {
    ++line_no;
    auto nl = source.find('\n');
    std::string_view line = source.substr(0, nl);
    source.remove_prefix(nl == std::string_view::npos ? source.size() : nl + 1);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    auto sp = line.find_first_of(" \t,");
    std::string_view head = line.substr(0, sp);
    std::string_view rest = sp == std::string_view::npos ? std::string_view{} : trim(line.substr(sp));

    if (head == ".set" || head == ".SET") {
      auto ops = split_operands(rest);
      if (ops.size() != 2 || ops[0].empty() || ops[1].empty()) parse_fail(line_no, ".set expects 'Rk, value'");
      SetDirective d{parse_register(ops[0], line_no), parse_value(ops[1], line_no)};
      defined.set(d.reg);
      prog.statements.emplace_back(d);
      continue;
    }

    auto op = parse_mnemonic(head);
    if (!op) parse_fail(line_no, "unknown mnemonic '" + std::string(head) + "'");

    Instruction in{*op, 0, 0};
    if (*op == Opcode::MaClear) {
      // Accept both "MA_CLEAR Rn" and "MA_CLEAR, Rn".
      if (!rest.empty() && rest.front() == ',') rest = trim(rest.substr(1));
      auto ops = split_operands(rest);
      if (ops.size() != 1 || ops[0].empty()) parse_fail(line_no, "MA_CLEAR expects one register");
      in.rn = parse_register(ops[0], line_no);
    } else {
      auto ops = split_operands(rest);
      if (ops.size() != 2 || ops[0].empty() || ops[1].empty()) {
        parse_fail(line_no, std::string(mnemonic(*op)) + " expects 'Rd, Rn'");
      }
      in.rd = parse_register(ops[0], line_no);
      in.rn = parse_register(ops[1], line_no);
    }
    try {
      check_registers(in);
    } catch (const IsaError& e) {
      throw IsaError(e.kind(), "line " + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!defined.test(in.rn)) {
      throw IsaError(IsaError::Kind::UndefinedRegisterUse,
                     "line " + std::to_string(line_no) + ": R" + std::to_string(in.rn) + " is read before it is set",
                     line_no);
    }
    if (*op != Opcode::MaClear) defined.set(in.rd);
    prog.statements.emplace_back(in);
  }
  return prog;
}

std::string print(const Program& program) {
  std::ostringstream os;
  for (const auto& st : program.statements) {
    if (const auto* d = std::get_if<SetDirective>(&st)) {
      os << ".set R" << int(d->reg) << ", 0x" << std::hex << d->value << std::dec << '\n';
    } else {
      const auto& in = std::get<Instruction>(st);
      os << mnemonic(in.op) << ' ';
      if (in.op == Opcode::MaClear) {
        os << 'R' << int(in.rn) << '\n';
      } else {
        os << 'R' << int(in.rd) << ", R" << int(in.rn) << '\n';
      }
    }
  }
  return os.str();
}

ParamBlock pack(const GemmTask& t) {
  ParamBlock r{};
  r[0] = t.a;
  r[1] = t.b;
  r[2] = t.c;
  r[3] = (std::uint64_t{t.m} << 32) | t.n;
  r[4] = (std::uint64_t{t.k} << 32) | (std::uint64_t{static_cast<std::uint8_t>(t.precision)} << 28) |
         (std::uint64_t{t.accumulate} << 27) | (t.ldn & ((1u << 27) - 1));
  r[5] = (std::uint64_t{t.tr} << 48) | (std::uint64_t{t.tc} << 32) | (std::uint64_t{t.ttr} << 16) | t.ttc;
  return r;
}

ParamBlock pack(const TransferTask& t) {
  ParamBlock r{};
  switch (t.kind) {
    case TransferKind::Move:
      r[0] = t.dst;
      r[1] = t.src;
      r[2] = t.length;
      break;
    case TransferKind::Init:
    case TransferKind::Stash:
      r[0] = t.dst;
      r[1] = t.length;
      break;
  }
  return r;
}

std::uint32_t choose_k_strip(std::uint32_t ttr, std::uint32_t ttc, std::uint32_t k, Precision p,
                             std::uint64_t buffer_bytes) {
  const std::uint32_t es = element_size(p);
  if (k == 0) return 0;
  if (working_set_bytes(ttr, ttc, k, es) <= buffer_bytes) return k;
  std::uint32_t kk = 1;
  if (working_set_bytes(ttr, ttc, 1, es) > buffer_bytes) return 0;
  while (kk * 2 <= k && working_set_bytes(ttr, ttc, kk * 2, es) <= buffer_bytes) kk *= 2;
  return kk;
}

namespace {

Validated fault(std::string reason) {
  return Validated{std::nullopt, ExceptionType::ParamFault, std::move(reason)};
}

bool aligned8(Addr a) { return (a & 7) == 0; }

}  // namespace

Validated validate_params(Opcode op, const ParamBlock& r, std::uint64_t buffer_bytes) {
  switch (op) {
    case Opcode::MaCfg: {
      GemmTask t;
      t.a = r[0];
      t.b = r[1];
      t.c = r[2];
      t.m = static_cast<std::uint32_t>(r[3] >> 32);
      t.n = static_cast<std::uint32_t>(r[3]);
      t.k = static_cast<std::uint32_t>(r[4] >> 32);
      const auto prec = static_cast<std::uint8_t>((r[4] >> 28) & 0xF);
      t.accumulate = (r[4] >> 27) & 1;
      t.ldn = static_cast<std::uint32_t>(r[4] & ((1u << 27) - 1));
      t.tr = static_cast<std::uint16_t>(r[5] >> 48);
      t.tc = static_cast<std::uint16_t>(r[5] >> 32);
      t.ttr = static_cast<std::uint16_t>(r[5] >> 16);
      t.ttc = static_cast<std::uint16_t>(r[5]);
      if (prec > 2) return fault("unknown precision code");
      t.precision = static_cast<Precision>(prec);
      if (t.m == 0 || t.n == 0 || t.k == 0) return fault("matrix dimensions must be >= 1");
      if (t.tr == 0 || t.tc == 0) return fault("first-level tile dimensions must be >= 1");
      if ((t.ttr == 0) != (t.ttc == 0)) return fault("ttr and ttc must both be zero or both be set");
      if (t.ttr > t.tr || t.ttc > t.tc) return fault("second-level tile exceeds first-level tile");
      if (t.ldn != 0 && t.ldn < t.n) return fault("leading dimension smaller than N");
      if (!aligned8(t.a) || !aligned8(t.b) || !aligned8(t.c)) return fault("matrix base not 8-byte aligned");
      if (!t.autotune() && choose_k_strip(t.ttr, t.ttc, t.k, t.precision, buffer_bytes) == 0) {
        return fault("second-level tile overflows the on-chip buffer");
      }
      return Validated{Task{t}, ExceptionType::None, {}};
    }
    case Opcode::MaMove: {
      TransferTask t{TransferKind::Move, r[0], r[1], r[2]};
      if (r[3] || r[4] || r[5]) return fault("reserved parameter words must be zero");
      if (t.length == 0) return fault("zero-length transfer");
      if (!aligned8(t.dst) || !aligned8(t.src)) return fault("transfer address not 8-byte aligned");
      return Validated{Task{t}, ExceptionType::None, {}};
    }
    case Opcode::MaInit:
    case Opcode::MaStash: {
      TransferTask t{op == Opcode::MaInit ? TransferKind::Init : TransferKind::Stash, r[0], 0, r[1]};
      if (r[2] || r[3] || r[4] || r[5]) return fault("reserved parameter words must be zero");
      if (t.length == 0) return fault("zero-length transfer");
      if (!aligned8(t.dst)) return fault("transfer address not 8-byte aligned");
      return Validated{Task{t}, ExceptionType::None, {}};
    }
    default:
      return fault("instruction carries no parameter block");
  }
}

}  // namespace maco::isa
