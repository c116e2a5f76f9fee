#include <random>

#include "doctest.h"
#include "maco/isa/mpais.hpp"

using namespace maco;
using namespace maco::isa;

TEST_SUITE("isa") {
  TEST_CASE("encode/decode round trip for every opcode and register pair") {
    for (int op = 0; op < kNumOpcodes; ++op) {
      for (std::uint8_t rd = 0; rd < kNumRegisters; rd += 5) {
        for (std::uint8_t rn = 0; rn < kNumRegisters; rn += 3) {
          Instruction in{static_cast<Opcode>(op), static_cast<std::uint8_t>(op == 6 ? 0 : rd), rn};
          if (uses_param_block(in.op) && rn + 5 >= kNumRegisters) continue;
          const std::uint32_t w = encode(in);
          CHECK((w >> 24) == 0xE0u + op);
          CHECK(decode(w) == in);
        }
      }
    }
  }

  TEST_CASE("decode rejects bad words") {
    auto kind = [](std::uint32_t w) {
      try {
        decode(w);
      } catch (const IsaError& e) {
        return e.kind();
      }
      FAIL("no error");
      return IsaError::Kind::ParseError;
    };
    CHECK(kind(0xE7000000u) == IsaError::Kind::UnknownOpcode);
    CHECK(kind(0x12000000u) == IsaError::Kind::UnknownOpcode);
    CHECK(kind(0xE3010000u) == IsaError::Kind::NonzeroReservedBits);
    CHECK(kind(0xE6010002u) == IsaError::Kind::NonzeroReservedBits);  // MA_CLEAR with Rd set
    CHECK(kind(0xE4002000u) == IsaError::Kind::InvalidRegister);      // Rd = 32
  }

  TEST_CASE("assembler") {
    const auto p = assemble(R"(
      # a comment
      .set R0, 0x1000
      .set R1, 4096
      MA_CFG R12, R0   # trailing comment
      MA_READ R30, R12
      MA_CLEAR R12
    )");
    REQUIRE(p.statements.size() == 5);
    CHECK(p.instruction_count() == 3);
    CHECK(std::get<SetDirective>(p.statements[0]).value == 0x1000);
    CHECK(std::get<SetDirective>(p.statements[1]).value == 4096);
    CHECK(std::get<Instruction>(p.statements[2]) == Instruction{Opcode::MaCfg, 12, 0});
    CHECK(assemble(print(p)) == p);

    try {
      assemble(".set R0, 1\nMA_CFG R1, R0\nMA_READ R2, R9\n");
      FAIL("expected an error");
    } catch (const IsaError& e) {
      CHECK(e.kind() == IsaError::Kind::UndefinedRegisterUse);
      CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(assemble("MA_FOO R1, R2"), IsaError);
    CHECK_THROWS_AS(assemble(".set R31, 1"), IsaError);
    CHECK_THROWS_AS(assemble(".set R0, 1\nMA_CFG R1"), IsaError);
  }

  TEST_CASE("GEMM parameter block round trip") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 2000; ++i) {
      GemmTask t;
      t.a = (rng() & 0xFFFFFFFFF0ULL);
      t.b = (rng() & 0xFFFFFFFFF0ULL);
      t.c = (rng() & 0xFFFFFFFFF0ULL);
      t.m = 1 + rng() % 5000;
      t.n = 1 + rng() % 5000;
      t.k = 1 + rng() % 5000;
      t.precision = static_cast<Precision>(rng() % 3);
      t.accumulate = rng() & 1;
      t.ldn = (rng() & 1) ? 0 : t.n + static_cast<std::uint32_t>(rng() % 100);
      t.tr = static_cast<std::uint16_t>(1 + rng() % 1024);
      t.tc = static_cast<std::uint16_t>(1 + rng() % 1024);
      t.ttr = static_cast<std::uint16_t>(std::min<std::uint32_t>(t.tr, 32));
      t.ttc = static_cast<std::uint16_t>(std::min<std::uint32_t>(t.tc, 32));
      const auto v = validate_params(Opcode::MaCfg, pack(t));
      REQUIRE(v.ok());
      CHECK(std::get<GemmTask>(*v.task) == t);
    }
  }

  TEST_CASE("parameter faults") {
    GemmTask good{.a = 0x1000, .b = 0x2000, .c = 0x3000, .m = 64, .n = 64, .k = 64,
                  .tr = 64, .tc = 64, .ttr = 32, .ttc = 32};
    REQUIRE(validate_params(Opcode::MaCfg, pack(good)).ok());
    auto faults = [](GemmTask t) {
      const auto v = validate_params(Opcode::MaCfg, pack(t));
      return !v.ok() && v.fault == ExceptionType::ParamFault;
    };
    GemmTask t = good;
    t.a = 0x1004;
    CHECK(faults(t));
    t = good;
    t.ttr = 128;
    CHECK(faults(t));
    t = good;
    t.k = 0;
    CHECK(faults(t));
    t = good;
    t.tr = 0;
    CHECK(faults(t));
    t = good;
    t.ttc = 0;
    CHECK(faults(t));
    t = good;
    t.ldn = 10;
    CHECK(faults(t));
    t = good;
    t.tr = t.tc = t.ttr = t.ttc = 1024;
    CHECK(faults(t));  // 1024x1024 never fits 192 KB

    ParamBlock bad_prec = pack(good);
    bad_prec[4] |= 3ULL << 28;
    CHECK_FALSE(validate_params(Opcode::MaCfg, bad_prec).ok());

    TransferTask mv{TransferKind::Move, 0x1000, 0x2000, 64};
    CHECK(validate_params(Opcode::MaMove, pack(mv)).ok());
    ParamBlock r = pack(mv);
    r[3] = 1;
    CHECK_FALSE(validate_params(Opcode::MaMove, r).ok());
    TransferTask init{TransferKind::Init, 0x1000, 0, 64};
    r = pack(init);
    CHECK(validate_params(Opcode::MaInit, r).ok());
    r[2] = 5;
    CHECK_FALSE(validate_params(Opcode::MaInit, r).ok());
    CHECK_FALSE(validate_params(Opcode::MaStash, pack(TransferTask{TransferKind::Stash, 0x1000, 0, 0})).ok());
    CHECK_FALSE(validate_params(Opcode::MaRead, ParamBlock{}).ok());
  }

  TEST_CASE("k-strip is the largest fitting power of two") {
    // Oracle: linear search over kk.
    for (Precision p : {Precision::FP64, Precision::FP32x2, Precision::FP16x4}) {
      for (std::uint32_t tt : {8u, 32u, 64u, 128u}) {
        for (std::uint32_t k : {1u, 7u, 64u, 100u, 1024u, 4096u}) {
          std::uint32_t expect = 0;
          if (working_set_bytes(tt, tt, k, element_size(p)) <= kBufferBytes) {
            expect = k;
          } else {
            for (std::uint32_t kk = 1; kk <= k; kk *= 2) {
              if (working_set_bytes(tt, tt, kk, element_size(p)) <= kBufferBytes) expect = kk;
            }
          }
          CHECK(choose_k_strip(tt, tt, k, p) == expect);
        }
      }
    }
    CHECK(working_set_bytes(64, 64, 64, 8) == 196608);
  }
}
