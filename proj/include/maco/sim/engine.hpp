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
 * @file engine.hpp
 * @brief Deterministic discrete-event kernel and clock domains.
 *
 * Simulated time is an integer count of base ticks. The base tick frequency is
 * the least common multiple of every configured clock domain frequency, so
 * each domain has an integral period and cycle/time conversions are exact in
 * all three domains (CPU 2.2 GHz, MMAE 2.5 GHz, NOC 2.0 GHz give a 110 GHz
 * base with periods of 50, 44 and 55 ticks).
 *
 * Events at the same tick fire in ascending sequence order. Sequence numbers
 * are assigned at schedule time, so a run is a pure function of its inputs.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "maco/error.hpp"

namespace maco::sim {

using Tick = std::uint64_t;

enum class Domain : std::uint8_t { Cpu, Mmae, Noc };

std::string_view domain_name(Domain d);

/// A point on the simulated time axis, in base ticks.
struct SimTime {
  Tick ticks = 0;

  constexpr auto operator<=>(const SimTime&) const = default;
};

struct ClockDomain {
  Domain id = Domain::Cpu;
  std::uint64_t frequency_hz = 0;
  Tick period = 0;  // base ticks per cycle
};

/// Clock configuration shared by one simulation instance.
class Clocks {
 public:
  Clocks(std::uint64_t cpu_hz, std::uint64_t mmae_hz, std::uint64_t noc_hz);
  Clocks() : Clocks(2'200'000'000ULL, 2'500'000'000ULL, 2'000'000'000ULL) {}

  const ClockDomain& domain(Domain d) const { return domains_[static_cast<int>(d)]; }
  const ClockDomain& cpu() const { return domains_[0]; }
  const ClockDomain& mmae() const { return domains_[1]; }
  const ClockDomain& noc() const { return domains_[2]; }

  std::uint64_t tick_hz() const { return tick_hz_; }

  /// n cycles of domain d as simulated time. Throws ConfigError on overflow.
  Tick cycles(std::uint64_t n, Domain d) const;
  SimTime cycles_to_time(std::uint64_t n, Domain d) const { return {cycles(n, d)}; }

  /// Whole cycles of domain d elapsed in t (rounded down / up).
  std::uint64_t to_cycles(Tick t, Domain d) const { return t / domain(d).period; }
  std::uint64_t to_cycles_ceil(Tick t, Domain d) const;

  /// First clock edge of domain d at or after t.
  Tick next_edge(Tick t, Domain d) const;

  double to_seconds(Tick t) const { return static_cast<double>(t) / static_cast<double>(tick_hz_); }
  /// Picoseconds represented by t, exact when the division is exact.
  double to_picoseconds(Tick t) const;
  /// True when t is an integral number of picoseconds.
  bool exact_picoseconds(Tick t) const;

 private:
  std::uint64_t tick_hz_ = 0;
  ClockDomain domains_[3];
};

class SchedulingInPast : public Error {
 public:
  using Error::Error;
};

/// Cancellation handle returned by Engine::schedule.
struct EventHandle {
  std::uint64_t sequence = 0;
  std::uint32_t slot = 0;
};

class Engine {
 public:
  using Callback = std::function<void()>;

  Engine() = default;
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  Tick now() const { return now_; }

  EventHandle schedule_at(Tick fire_time, Callback cb);
  EventHandle schedule_in(Tick delay, Callback cb) { return schedule_at(now_ + delay, std::move(cb)); }

  /// Returns false when the event already fired or was cancelled.
  bool cancel(EventHandle h);

  /// Process every event with fire time <= limit. Returns the time of the
  /// last processed event (or the current time when nothing fired).
  Tick run_until(Tick limit);
  /// Drain the queue completely.
  Tick run();

  bool empty() const { return live_ == 0; }
  std::size_t pending() const { return live_; }
  std::uint64_t events_processed() const { return processed_; }
  std::uint64_t next_sequence() const { return next_seq_; }

  /// Optional hook invoked after every processed event (test auditing).
  void set_post_event_hook(std::function<void()> hook) { post_hook_ = std::move(hook); }

 private:
  struct HeapItem {
    Tick time;
    std::uint64_t seq;
    std::uint32_t slot;
  };
  struct Slot {
    Callback cb;
    std::uint64_t seq = 0;
    bool armed = false;
  };
  static bool later(const HeapItem& a, const HeapItem& b) {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }

  Tick now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::size_t live_ = 0;
  std::vector<HeapItem> heap_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> free_slots_;
  std::function<void()> post_hook_;
};

}  // namespace maco::sim
