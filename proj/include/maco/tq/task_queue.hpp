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
 * @file task_queue.hpp
 * @brief Master (CPU-side) and slave (MMAE-side) task queues.
 *
 * Status word returned by MA_READ / MA_STATE:
 *
 *   bit 0      done
 *   bit 1      exception enabled
 *   bits 7:4   exception type (ExceptionType encoding)
 *   bit 63     reuse: the entry is free or belongs to another ASID
 *
 * A reuse result always has bit 0 set as well, so a poll loop waiting for
 * "done" terminates.
 */

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "maco/isa/mpais.hpp"
#include "maco/types.hpp"

namespace maco::tq {

inline constexpr std::uint64_t kStatusDone = 1ULL << 0;
inline constexpr std::uint64_t kStatusException = 1ULL << 1;
inline constexpr std::uint64_t kStatusReuse = 1ULL << 63;
inline constexpr std::uint64_t kStatusReuseResult = kStatusReuse | kStatusDone;

enum class EntryState : std::uint8_t { Free, Pending, Running, DoneOk, DoneExc };
std::string_view state_name(EntryState s);

/// The six legal transitions (RUNNING -> DONE_OK and RUNNING -> DONE_EXC
/// counted separately makes seven edges).
bool legal_transition(EntryState from, EntryState to);

struct MtqEntry {
  bool valid = false;
  bool done = false;
  std::uint32_t asid = 0;
  bool exception_en = false;
  ExceptionType exception_type = ExceptionType::None;
  std::uint32_t maid = 0;
  bool started = false;

  EntryState state() const;
  bool operator==(const MtqEntry&) const = default;
};

std::uint64_t status_word(const MtqEntry& e);
constexpr ExceptionType status_exception(std::uint64_t word) {
  return static_cast<ExceptionType>((word >> 4) & 0xF);
}

class Mtq {
 public:
  using Observer = std::function<void(std::uint32_t maid, EntryState from, EntryState to)>;

  explicit Mtq(std::uint32_t depth = 4);

  std::uint32_t depth() const { return static_cast<std::uint32_t>(entries_.size()); }

  /// Lowest FREE entry becomes PENDING. A task carrying `fault` goes straight
  /// to DONE_EXC. Returns nullopt when every entry is busy.
  std::optional<std::uint32_t> alloc(std::uint32_t asid, ExceptionType fault = ExceptionType::None);

  /// STQ start notification: PENDING -> RUNNING.
  void mark_started(std::uint32_t maid);
  /// STQ report: RUNNING -> DONE_OK / DONE_EXC.
  void complete(std::uint32_t maid, ExceptionType outcome);

  /// MA_READ (release = false) and MA_STATE (release = true).
  std::uint64_t query(std::uint32_t maid, std::uint32_t caller_asid, bool release);

  /// MA_CLEAR. Done entries become FREE; FREE entries are unchanged; entries
  /// whose task is still in flight are left alone (see README).
  void clear(std::uint32_t maid);

  const MtqEntry& entry(std::uint32_t maid) const { return entries_.at(maid); }
  const std::vector<MtqEntry>& entries() const { return entries_; }
  void set_observer(Observer o) { observer_ = std::move(o); }

 private:
  void set_state(MtqEntry& e, EntryState to);

  std::vector<MtqEntry> entries_;
  Observer observer_;
};

enum class StqPhase : std::uint8_t { Idle, Buffered, Active, Reporting };

struct StqEntry {
  std::uint32_t maid = 0;
  std::optional<isa::Task> task;
  StqPhase phase = StqPhase::Idle;
  std::uint64_t arrival = 0;  // FIFO order key

  bool operator==(const StqEntry&) const = default;
};

class Stq {
 public:
  explicit Stq(std::uint32_t depth = 4);

  /// Param block arrived for `maid`: Idle -> Buffered.
  void buffer(std::uint32_t maid, isa::Task task);
  /// When nothing is Active, the oldest Buffered entry becomes Active.
  std::optional<std::uint32_t> activate_next();
  /// Active -> Reporting.
  void report(std::uint32_t maid);
  /// Report delivered: Reporting -> Idle.
  void retire(std::uint32_t maid);

  std::optional<std::uint32_t> active() const;
  std::uint32_t active_count() const;
  const StqEntry& entry(std::uint32_t maid) const { return entries_.at(maid); }
  const std::vector<StqEntry>& entries() const { return entries_; }

 private:
  std::vector<StqEntry> entries_;
  std::uint64_t arrivals_ = 0;
};

}  // namespace maco::tq
