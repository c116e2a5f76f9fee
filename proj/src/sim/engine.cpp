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

#include "maco/sim/engine.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace maco::sim {

std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::Cpu: return "CPU";
    case Domain::Mmae: return "MMAE";
    case Domain::Noc: return "NOC";
  }
  return "?";
}

namespace {

std::uint64_t checked_lcm(std::uint64_t a, std::uint64_t b) {
  const std::uint64_t g = std::gcd(a, b);
  const std::uint64_t q = a / g;
  if (q > std::numeric_limits<std::uint64_t>::max() / b) {
    throw ConfigError("clock frequencies have no representable common base tick");
  }
  return q * b;
}

}  // namespace

Clocks::Clocks(std::uint64_t cpu_hz, std::uint64_t mmae_hz, std::uint64_t noc_hz) {
  if (cpu_hz == 0 || mmae_hz == 0 || noc_hz == 0) {
    throw ConfigError("clock frequencies must be positive");
  }
  tick_hz_ = checked_lcm(checked_lcm(cpu_hz, mmae_hz), noc_hz);
  // Keep at least ~100 days of simulated time representable.
  if (tick_hz_ > 2'000'000'000'000'000ULL) {
    throw ConfigError("clock frequencies have no practical common base tick");
  }
  const std::uint64_t hz[3] = {cpu_hz, mmae_hz, noc_hz};
  for (int i = 0; i < 3; ++i) {
    domains_[i] = ClockDomain{static_cast<Domain>(i), hz[i], tick_hz_ / hz[i]};
  }
}

Tick Clocks::cycles(std::uint64_t n, Domain d) const {
  const Tick p = domain(d).period;
  if (n != 0 && p > std::numeric_limits<Tick>::max() / n) {
    throw ConfigError("cycle count overflows simulated time");
  }
  return n * p;
}

std::uint64_t Clocks::to_cycles_ceil(Tick t, Domain d) const {
  const Tick p = domain(d).period;
  return (t + p - 1) / p;
}

Tick Clocks::next_edge(Tick t, Domain d) const {
  const Tick p = domain(d).period;
  return ((t + p - 1) / p) * p;
}

double Clocks::to_picoseconds(Tick t) const {
  // ticks * 1e12 / tick_hz, split to avoid overflow.
  const std::uint64_t g = std::gcd(tick_hz_, 1'000'000'000'000ULL);
  const std::uint64_t num = 1'000'000'000'000ULL / g;
  const std::uint64_t den = tick_hz_ / g;
  const auto whole = static_cast<long double>(t / den) * num;
  const auto frac = static_cast<long double>(t % den) * num / den;
  return static_cast<double>(whole + frac);
}

bool Clocks::exact_picoseconds(Tick t) const {
  const std::uint64_t g = std::gcd(tick_hz_, 1'000'000'000'000ULL);
  const std::uint64_t den = tick_hz_ / g;
  return t % den == 0;
}

EventHandle Engine::schedule_at(Tick fire_time, Callback cb) {
  if (fire_time < now_) {
    throw SchedulingInPast("event scheduled at tick " + std::to_string(fire_time) +
                           " before current tick " + std::to_string(now_));
  }
  std::uint32_t slot;
  if (!free_slots_.empty()) {
    slot = free_slots_.back();
    free_slots_.pop_back();
  } else {
    slot = static_cast<std::uint32_t>(slots_.size());
    slots_.emplace_back();
  }
  const std::uint64_t seq = next_seq_++;
  Slot& s = slots_[slot];
  s.cb = std::move(cb);
  s.seq = seq;
  s.armed = true;
  heap_.push_back(HeapItem{fire_time, seq, slot});
  std::push_heap(heap_.begin(), heap_.end(), later);
  ++live_;
  return EventHandle{seq, slot};
}

bool Engine::cancel(EventHandle h) {
  if (h.slot >= slots_.size()) return false;
  Slot& s = slots_[h.slot];
  if (!s.armed || s.seq != h.sequence) return false;
  s.armed = false;
  s.cb = nullptr;
  --live_;
  return true;
}

Tick Engine::run_until(Tick limit) {
  while (!heap_.empty() && heap_.front().time <= limit) {
    std::pop_heap(heap_.begin(), heap_.end(), later);
    const HeapItem item = heap_.back();
    heap_.pop_back();
    Slot& s = slots_[item.slot];
    if (!s.armed || s.seq != item.seq) {
      // cancelled; the slot was released at cancel time only logically
      if (!s.armed && s.seq == item.seq) free_slots_.push_back(item.slot);
      continue;
    }
    Callback cb = std::move(s.cb);
    s.armed = false;
    s.cb = nullptr;
    free_slots_.push_back(item.slot);
    --live_;
    now_ = item.time;
    ++processed_;
    cb();
    if (post_hook_) post_hook_();
  }
  return now_;
}

Tick Engine::run() { return run_until(std::numeric_limits<Tick>::max()); }

}  // namespace maco::sim
