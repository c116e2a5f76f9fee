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

#include "maco/tq/task_queue.hpp"

#include "maco/error.hpp"

namespace maco::tq {

std::string_view state_name(EntryState s) {
  switch (s) {
    case EntryState::Free: return "FREE";
    case EntryState::Pending: return "PENDING";
    case EntryState::Running: return "RUNNING";
    case EntryState::DoneOk: return "DONE_OK";
    case EntryState::DoneExc: return "DONE_EXC";
  }
  return "?";
}

bool legal_transition(EntryState from, EntryState to) {
  using S = EntryState;
  switch (from) {
    case S::Free: return to == S::Pending;
    case S::Pending: return to == S::Running || to == S::DoneExc;
    case S::Running: return to == S::DoneOk || to == S::DoneExc;
    case S::DoneOk: return to == S::Free;
    case S::DoneExc: return to == S::Free;
  }
  return false;
}

EntryState MtqEntry::state() const {
  if (!valid) return EntryState::Free;
  if (done) return exception_en ? EntryState::DoneExc : EntryState::DoneOk;
  return started ? EntryState::Running : EntryState::Pending;
}

std::uint64_t status_word(const MtqEntry& e) {
  std::uint64_t w = 0;
  if (e.done) w |= kStatusDone;
  if (e.exception_en) w |= kStatusException;
  w |= (static_cast<std::uint64_t>(e.exception_type) & 0xF) << 4;
  return w;
}

// --- Mtq --------------------------------------------------------------------------

Mtq::Mtq(std::uint32_t depth) : entries_(depth) {
  if (depth == 0 || depth > 64) throw ConfigError("MTQ depth must be in [1, 64]");
  for (std::uint32_t i = 0; i < depth; ++i) entries_[i].maid = i;
}

void Mtq::set_state(MtqEntry& e, EntryState to) {
  const EntryState from = e.state();
  if (!legal_transition(from, to)) {
    throw ProtocolError("illegal task-queue transition " + std::string(state_name(from)) + " -> " +
                        std::string(state_name(to)));
  }
  switch (to) {
    case EntryState::Free:
      e = MtqEntry{};
      break;
    case EntryState::Pending:
      e.valid = true;
      e.done = false;
      e.started = false;
      e.exception_en = false;
      e.exception_type = ExceptionType::None;
      break;
    case EntryState::Running:
      e.started = true;
      break;
    case EntryState::DoneOk:
      e.done = true;
      break;
    case EntryState::DoneExc:
      e.done = true;
      e.exception_en = true;
      break;
  }
  if (observer_) observer_(e.maid, from, to);
}

std::optional<std::uint32_t> Mtq::alloc(std::uint32_t asid, ExceptionType fault) {
  for (std::uint32_t i = 0; i < entries_.size(); ++i) {
    MtqEntry& e = entries_[i];
    if (e.valid) continue;
    e.maid = i;
    set_state(e, EntryState::Pending);
    e.maid = i;
    e.asid = asid;
    if (fault != ExceptionType::None) {
      e.exception_type = fault;
      set_state(e, EntryState::DoneExc);
    }
    return i;
  }
  return std::nullopt;
}

void Mtq::mark_started(std::uint32_t maid) {
  MtqEntry& e = entries_.at(maid);
  if (e.state() != EntryState::Pending) throw ProtocolError("start notification for an entry that is not PENDING");
  set_state(e, EntryState::Running);
}

void Mtq::complete(std::uint32_t maid, ExceptionType outcome) {
  MtqEntry& e = entries_.at(maid);
  if (e.state() != EntryState::Running) throw ProtocolError("completion report for an entry that is not RUNNING");
  if (outcome == ExceptionType::None) {
    set_state(e, EntryState::DoneOk);
  } else {
    e.exception_type = outcome;
    set_state(e, EntryState::DoneExc);
  }
}

std::uint64_t Mtq::query(std::uint32_t maid, std::uint32_t caller_asid, bool release) {
  if (maid >= entries_.size()) return kStatusReuseResult;
  MtqEntry& e = entries_[maid];
  if (!e.valid || e.asid != caller_asid) return kStatusReuseResult;
  const std::uint64_t w = status_word(e);
  if (release && e.state() == EntryState::DoneOk) set_state(e, EntryState::Free);
  return w;
}

void Mtq::clear(std::uint32_t maid) {
  if (maid >= entries_.size()) return;
  MtqEntry& e = entries_[maid];
  const EntryState s = e.state();
  if (s == EntryState::DoneOk || s == EntryState::DoneExc) set_state(e, EntryState::Free);
}

// --- Stq --------------------------------------------------------------------------

Stq::Stq(std::uint32_t depth) : entries_(depth) {
  if (depth == 0 || depth > 64) throw ConfigError("STQ depth must be in [1, 64]");
  for (std::uint32_t i = 0; i < depth; ++i) entries_[i].maid = i;
}

void Stq::buffer(std::uint32_t maid, isa::Task task) {
  StqEntry& e = entries_.at(maid);
  if (e.phase != StqPhase::Idle) throw ProtocolError("parameter block delivered to a busy STQ entry");
  e.task = std::move(task);
  e.phase = StqPhase::Buffered;
  e.arrival = arrivals_++;
}

std::optional<std::uint32_t> Stq::activate_next() {
  if (active_count() != 0) return std::nullopt;
  StqEntry* next = nullptr;
  for (auto& e : entries_) {
    if (e.phase == StqPhase::Buffered && (!next || e.arrival < next->arrival)) next = &e;
  }
  if (!next) return std::nullopt;
  next->phase = StqPhase::Active;
  return next->maid;
}

void Stq::report(std::uint32_t maid) {
  StqEntry& e = entries_.at(maid);
  if (e.phase != StqPhase::Active) throw ProtocolError("report from an STQ entry that is not Active");
  e.phase = StqPhase::Reporting;
}

void Stq::retire(std::uint32_t maid) {
  StqEntry& e = entries_.at(maid);
  if (e.phase != StqPhase::Reporting) throw ProtocolError("retiring an STQ entry that is not Reporting");
  e.phase = StqPhase::Idle;
  e.task.reset();
}

std::optional<std::uint32_t> Stq::active() const {
  for (const auto& e : entries_) {
    if (e.phase == StqPhase::Active) return e.maid;
  }
  return std::nullopt;
}

std::uint32_t Stq::active_count() const {
  std::uint32_t n = 0;
  for (const auto& e : entries_) n += e.phase == StqPhase::Active ? 1 : 0;
  return n;
}

}  // namespace maco::tq
