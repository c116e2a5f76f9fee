#include <random>

#include "doctest.h"
#include "maco/tq/task_queue.hpp"

using namespace maco;
using namespace maco::tq;

namespace {

// Independent model of one MTQ entry.
struct Model {
  EntryState s = EntryState::Free;
  std::uint32_t asid = 0;
  ExceptionType exc = ExceptionType::None;

  std::uint64_t word() const {
    const bool done = s == EntryState::DoneOk || s == EntryState::DoneExc;
    const bool exc_en = s == EntryState::DoneExc;
    return (done ? 1u : 0u) | (exc_en ? 2u : 0u) | (static_cast<std::uint64_t>(exc) << 4);
  }
};

}  // namespace

TEST_SUITE("task-queues") {
  TEST_CASE("legal transition table") {
    using S = EntryState;
    const S all[] = {S::Free, S::Pending, S::Running, S::DoneOk, S::DoneExc};
    int legal = 0;
    for (S a : all) {
      for (S b : all) legal += legal_transition(a, b) ? 1 : 0;
    }
    CHECK(legal == 7);
    CHECK(legal_transition(S::Free, S::Pending));
    CHECK(legal_transition(S::Pending, S::DoneExc));
    CHECK_FALSE(legal_transition(S::Pending, S::DoneOk));
    CHECK_FALSE(legal_transition(S::Running, S::Free));
  }

  TEST_CASE("random operation sequences against a model") {
    std::mt19937_64 rng(23);
    Mtq q(4);
    std::vector<Model> model(4);
    std::uint64_t illegal = 0, transitions = 0;
    q.set_observer([&](std::uint32_t, EntryState from, EntryState to) {
      ++transitions;
      if (!legal_transition(from, to)) ++illegal;
    });
    const ExceptionType faults[] = {ExceptionType::ParamFault, ExceptionType::FloatingPoint, ExceptionType::PageFault,
                                    ExceptionType::DataAbort};
    for (int op = 0; op < 200000; ++op) {
      const std::uint32_t maid = static_cast<std::uint32_t>(rng() % 5);  // 4 is out of range
      const std::uint32_t asid = static_cast<std::uint32_t>(rng() % 3);
      Model* m = maid < 4 ? &model[maid] : nullptr;
      switch (rng() % 6) {
        case 0: {
          const bool fault = rng() % 8 == 0;
          const ExceptionType f = fault ? faults[rng() % 4] : ExceptionType::None;
          const auto got = q.alloc(asid, f);
          std::optional<std::uint32_t> expect;
          for (std::uint32_t i = 0; i < 4; ++i) {
            if (model[i].s == EntryState::Free) {
              expect = i;
              break;
            }
          }
          REQUIRE(got == expect);
          if (expect) model[*expect] = Model{fault ? EntryState::DoneExc : EntryState::Pending, asid, f};
          break;
        }
        case 1:
          if (m && m->s == EntryState::Pending) {
            q.mark_started(maid);
            m->s = EntryState::Running;
          } else if (m) {
            CHECK_THROWS_AS(q.mark_started(maid), ProtocolError);
          }
          break;
        case 2:
          if (m && m->s == EntryState::Running) {
            const ExceptionType out = rng() % 4 == 0 ? faults[rng() % 4] : ExceptionType::None;
            q.complete(maid, out);
            m->s = out == ExceptionType::None ? EntryState::DoneOk : EntryState::DoneExc;
            m->exc = out;
          } else if (m) {
            CHECK_THROWS_AS(q.complete(maid, ExceptionType::None), ProtocolError);
          }
          break;
        case 3:
        case 4: {
          const bool release = rng() & 1;
          const std::uint64_t w = q.query(maid, asid, release);
          if (!m || m->s == EntryState::Free || m->asid != asid) {
            REQUIRE(w == kStatusReuseResult);
          } else {
            REQUIRE(w == m->word());
            if (release && m->s == EntryState::DoneOk) *m = Model{};
          }
          break;
        }
        case 5:
          q.clear(maid);
          if (m && (m->s == EntryState::DoneOk || m->s == EntryState::DoneExc)) *m = Model{};
          break;
      }
      for (std::uint32_t i = 0; i < 4; ++i) {
        REQUIRE(q.entry(i).state() == model[i].s);
        if (model[i].s != EntryState::Free) REQUIRE(q.entry(i).asid == model[i].asid);
      }
    }
    CHECK(illegal == 0);
    CHECK(transitions > 20000);
  }

  TEST_CASE("STQ activates in arrival order, one at a time") {
    Stq s(4);
    s.buffer(2, isa::TransferTask{});
    s.buffer(0, isa::TransferTask{});
    s.buffer(3, isa::TransferTask{});
    CHECK(s.activate_next() == 2u);
    CHECK_FALSE(s.activate_next());
    CHECK(s.active_count() == 1);
    CHECK_THROWS_AS(s.buffer(2, isa::TransferTask{}), ProtocolError);
    s.report(2);
    CHECK(s.activate_next() == 0u);  // reporting entries do not block
    s.retire(2);
    CHECK_THROWS_AS(s.retire(0), ProtocolError);
    s.report(0);
    s.retire(0);
    CHECK(s.activate_next() == 3u);
  }
}
