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

#include "maco/noc/mesh.hpp"

#include <algorithm>
#include <numeric>

namespace maco::noc {

std::vector<Coord> route_xy(Coord src, Coord dst) {
  if (src.x >= kMeshDim || src.y >= kMeshDim || dst.x >= kMeshDim || dst.y >= kMeshDim) {
    throw OutOfMesh("coordinate outside the 4x4 mesh");
  }
  std::vector<Coord> hops;
  Coord cur = src;
  while (cur.x != dst.x) {
    cur.x = cur.x < dst.x ? cur.x + 1 : cur.x - 1;
    hops.push_back(cur);
  }
  while (cur.y != dst.y) {
    cur.y = cur.y < dst.y ? cur.y + 1 : cur.y - 1;
    hops.push_back(cur);
  }
  return hops;
}

Mesh::Mesh(sim::Engine& engine, const sim::Clocks& clocks, NocConfig cfg)
    : engine_(engine),
      clocks_(clocks),
      cfg_(cfg),
      links_(kMaxNodes * kPorts),
      injected_(kMaxNodes, 0),
      delivered_(kMaxNodes, 0),
      flow_last_(kMaxNodes * kMaxNodes * 2, 0) {
  if (cfg_.link_bytes_per_cycle == 0) throw ConfigError("NOC link width must be positive");
  if (cfg_.per_hop_cycles == 0) throw ConfigError("NOC per-hop latency must be positive");
}

std::uint32_t Mesh::port_toward(Coord from, Coord to) const {
  if (to.x > from.x) return East;
  if (to.x < from.x) return West;
  if (to.y > from.y) return South;
  return North;
}

std::uint64_t Mesh::occupy(Link& l, std::uint64_t floor, std::uint64_t arrive, std::uint32_t ser,
                           std::uint32_t bytes) {
  auto& b = l.busy;
  while (l.head < b.size() && b[l.head].second <= floor) ++l.head;
  if (l.head > 64 && l.head * 2 > b.size()) {
    b.erase(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(l.head));
    l.head = 0;
  }
  // First interval that ends after the arrival.
  auto it = std::upper_bound(b.begin() + static_cast<std::ptrdiff_t>(l.head), b.end(), arrive,
                             [](std::uint64_t t, const auto& iv) { return t < iv.second; });
  std::uint64_t start = arrive;
  while (it != b.end() && it->first < start + ser) {
    start = std::max(start, it->second);
    ++it;
  }
  // Insert [start, start + ser) before `it`, merging with neighbours.
  const std::uint64_t end = start + ser;
  const bool merge_prev = it != b.begin() + static_cast<std::ptrdiff_t>(l.head) && std::prev(it)->second == start;
  const bool merge_next = it != b.end() && it->first == end;
  if (merge_prev && merge_next) {
    std::prev(it)->second = it->second;
    b.erase(it);
  } else if (merge_prev) {
    std::prev(it)->second = end;
  } else if (merge_next) {
    it->first = start;
  } else {
    b.insert(it, {start, end});
  }
  l.stats.bytes += bytes;
  l.stats.busy_cycles += ser;
  ++l.stats.messages;
  if (log_intervals_) l.log.push_back(Interval{start, end, bytes});
  return start;
}

sim::Tick Mesh::route(const NocMessage& msg, sim::Tick start) {
  if (msg.src >= kMaxNodes || msg.dst >= kMaxNodes) throw OutOfMesh("node id outside the mesh");
  if (msg.bytes == 0) throw Error("NOC message with zero size");
  if (start < engine_.now()) throw sim::SchedulingInPast("NOC injection before the current time");
  const std::uint64_t now_cycle = clocks_.to_cycles_ceil(start, sim::Domain::Noc);
  const std::uint64_t floor = clocks_.to_cycles(engine_.now(), sim::Domain::Noc);
  injected_[msg.src] += msg.bytes;
  sim::Tick& last = flow_last_[(msg.src * kMaxNodes + msg.dst) * 2 + static_cast<std::uint32_t>(msg.cls)];
  if (msg.src == msg.dst) {
    last = std::max(last, clocks_.cycles(now_cycle + 1, sim::Domain::Noc));
    return last;
  }
  const std::uint32_t ser = serialization_cycles(msg.bytes);
  std::uint64_t head = occupy(link(msg.src, Inject), floor, now_cycle, ser, msg.bytes);
  Coord cur = coord_of(msg.src);
  const Coord dst = coord_of(msg.dst);
  for (const Coord next : route_xy(cur, dst)) {
    const std::uint32_t port = port_toward(cur, next);
    head = occupy(link(node_of(cur), port), floor, head, ser, msg.bytes) + cfg_.per_hop_cycles;
    cur = next;
  }
  const std::uint64_t ej = occupy(link(msg.dst, Eject), floor, head, ser, msg.bytes);
  last = std::max(last, clocks_.cycles(ej + ser, sim::Domain::Noc));
  return last;
}

sim::Tick Mesh::reserve_at(const NocMessage& msg, sim::Tick start) {
  const sim::Tick at = route(msg, start);
  delivered_[msg.dst] += msg.bytes;
  return at;
}

sim::Tick Mesh::send_at(const NocMessage& msg, sim::Tick start, sim::Engine::Callback on_delivery) {
  const sim::Tick at = route(msg, start);
  ++in_flight_;
  engine_.schedule_at(at, [this, dst = msg.dst, bytes = msg.bytes, cb = std::move(on_delivery)]() {
    delivered_[dst] += bytes;
    --in_flight_;
    if (cb) cb();
  });
  return at;
}

std::uint64_t Mesh::idle_latency_cycles(std::uint32_t src, std::uint32_t dst, std::uint32_t bytes) const {
  if (src == dst) return 1;
  const auto hops = route_xy(coord_of(src), coord_of(dst)).size();
  return hops * cfg_.per_hop_cycles + serialization_cycles(bytes);
}

std::vector<LinkId> Mesh::links() const {
  std::vector<LinkId> out;
  for (std::uint32_t r = 0; r < kMaxNodes; ++r) {
    const Coord c = coord_of(r);
    if (c.x + 1 < kMeshDim) out.push_back({r, r + 1});
    if (c.x > 0) out.push_back({r, r - 1});
    if (c.y + 1 < kMeshDim) out.push_back({r, r + kMeshDim});
    if (c.y > 0) out.push_back({r, r - kMeshDim});
  }
  return out;
}

const LinkStats& Mesh::link_stats(LinkId l) const {
  return link(l.from, port_toward(coord_of(l.from), coord_of(l.to))).stats;
}

const std::vector<Mesh::Interval>& Mesh::interval_log(LinkId l) const {
  return link(l.from, port_toward(coord_of(l.from), coord_of(l.to))).log;
}

std::uint64_t Mesh::total_injected_bytes() const {
  return std::accumulate(injected_.begin(), injected_.end(), std::uint64_t{0});
}

std::uint64_t Mesh::total_delivered_bytes() const {
  return std::accumulate(delivered_.begin(), delivered_.end(), std::uint64_t{0});
}

}  // namespace maco::noc
