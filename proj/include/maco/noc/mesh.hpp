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
 * @file mesh.hpp
 * @brief 4x4 2D mesh with X-Y routing, message-level timing.
 *
 * A message reserves each link on its X-Y path in turn. Each link keeps a
 * calendar of reserved intervals and a message takes the earliest free slot
 * of ceil(bytes/width) cycles at or after its head arrives; the head advances
 * `per_hop_cycles` per hop (cut-through). Node injection and ejection ports
 * are links of the same width. Messages to the local router take one cycle.
 * Deliveries of one (src, dst, class) flow never overtake each other.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "maco/error.hpp"
#include "maco/sim/engine.hpp"
#include "maco/types.hpp"

namespace maco::noc {

struct Coord {
  std::uint32_t x = 0;
  std::uint32_t y = 0;
  bool operator==(const Coord&) const = default;
};

class OutOfMesh : public Error {
 public:
  using Error::Error;
};

inline Coord coord_of(std::uint32_t node) { return Coord{node % kMeshDim, node / kMeshDim}; }
inline std::uint32_t node_of(Coord c) { return c.y * kMeshDim + c.x; }

/// Routers visited after leaving src, X first then Y. Empty when src == dst.
std::vector<Coord> route_xy(Coord src, Coord dst);

enum class MsgClass : std::uint8_t { Request, Response };

struct NocMessage {
  std::uint32_t src = 0;
  std::uint32_t dst = 0;
  std::uint32_t bytes = 0;
  MsgClass cls = MsgClass::Request;
};

struct NocConfig {
  std::uint32_t per_hop_cycles = 2;
  std::uint32_t link_bytes_per_cycle = 32;
};

struct LinkStats {
  std::uint64_t bytes = 0;
  std::uint64_t busy_cycles = 0;
  std::uint64_t messages = 0;
};

/// Directed inter-router link.
struct LinkId {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
};

class Mesh {
 public:
  Mesh(sim::Engine& engine, const sim::Clocks& clocks, NocConfig cfg = {});

  const NocConfig& config() const { return cfg_; }

  /// Reserve the path and return the delivery tick without scheduling. The
  /// message counts as delivered immediately.
  sim::Tick reserve(const NocMessage& msg) { return reserve_at(msg, engine_.now()); }
  /// As reserve, with injection no earlier than `start` (>= now).
  sim::Tick reserve_at(const NocMessage& msg, sim::Tick start);

  /// Reserve the path and fire on_delivery at the delivery tick.
  sim::Tick send(const NocMessage& msg, sim::Engine::Callback on_delivery) {
    return send_at(msg, engine_.now(), std::move(on_delivery));
  }
  sim::Tick send_at(const NocMessage& msg, sim::Tick start, sim::Engine::Callback on_delivery);

  /// Delivery latency on an idle mesh in NOC cycles.
  std::uint64_t idle_latency_cycles(std::uint32_t src, std::uint32_t dst, std::uint32_t bytes) const;

  std::uint32_t serialization_cycles(std::uint32_t bytes) const {
    return (bytes + cfg_.link_bytes_per_cycle - 1) / cfg_.link_bytes_per_cycle;
  }

  std::vector<LinkId> links() const;
  const LinkStats& link_stats(LinkId l) const;

  std::uint64_t injected_bytes(std::uint32_t node) const { return injected_[node]; }
  std::uint64_t delivered_bytes(std::uint32_t node) const { return delivered_[node]; }
  std::uint64_t total_injected_bytes() const;
  std::uint64_t total_delivered_bytes() const;
  std::uint64_t in_flight() const { return in_flight_; }

  /// Test support: record each reservation interval [start, end) per link in
  /// NOC cycles.
  void enable_interval_log(bool on) { log_intervals_ = on; }
  struct Interval {
    std::uint64_t start, end;
    std::uint32_t bytes;
  };
  const std::vector<Interval>& interval_log(LinkId l) const;

 private:
  enum Port : std::uint32_t { East, West, North, South, Inject, Eject, kPorts };

  struct Link {
    // Reserved [start, end) intervals in NOC cycles, sorted, from index head.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> busy;
    std::size_t head = 0;
    LinkStats stats;
    std::vector<Interval> log;
  };

  std::uint32_t port_toward(Coord from, Coord to) const;
  Link& link(std::uint32_t router, std::uint32_t port) { return links_[router * kPorts + port]; }
  const Link& link(std::uint32_t router, std::uint32_t port) const { return links_[router * kPorts + port]; }
  sim::Tick route(const NocMessage& msg, sim::Tick start);
  std::uint64_t occupy(Link& l, std::uint64_t floor, std::uint64_t arrive, std::uint32_t ser, std::uint32_t bytes);

  sim::Engine& engine_;
  const sim::Clocks& clocks_;
  NocConfig cfg_;
  std::vector<Link> links_;
  std::vector<std::uint64_t> injected_;
  std::vector<std::uint64_t> delivered_;
  std::vector<sim::Tick> flow_last_;  // per (src, dst, class)
  std::uint64_t in_flight_ = 0;
  bool log_intervals_ = false;
};

}  // namespace maco::noc
