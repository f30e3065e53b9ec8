#include "mvp/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace mvp::sim {

const char* kind_name(VehicleKind k) {
  switch (k) {
    case VehicleKind::Pursuer: return "pursuer";
    case VehicleKind::Evader: return "evader";
    case VehicleKind::Background: return "background";
  }
  return "?";
}

void EpisodeConfig::validate() const {
  if (!scene) throw std::invalid_argument("episode config has no road network");
  if (evaders < 1) throw std::invalid_argument("need at least one evader");
  if (pursuers <= evaders) throw std::invalid_argument("need more pursuers than evaders (N > M)");
  if (!(capture_distance > 0.0)) throw std::invalid_argument("capture distance must be positive");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  const Kinematics& k = kinematics;
  if (!(k.v_max > 0 && k.accel_max > 0 && k.decel_max > 0 && k.min_gap > 0 && k.dt > 0))
    throw std::invalid_argument("kinematic limits must be positive");
}

std::size_t WorldState::evaders_remaining() const {
  std::size_t n = 0;
  for (std::size_t m = 0; m < evader_count; ++m) n += evader(m).captured ? 0 : 1;
  return n;
}

std::vector<bool> WorldState::captured_mask() const {
  std::vector<bool> mask(evader_count);
  for (std::size_t m = 0; m < evader_count; ++m) mask[m] = evader(m).captured;
  return mask;
}

LightPhase light_phase_at(std::size_t step) {
  return (step % kLightCycle) < kLightCycle / 2 ? LightPhase::NorthSouth : LightPhase::EastWest;
}

bool lane_has_green(const RoadNetwork& net, LaneId lane, LightPhase phase) {
  const auto& l = net.lane(lane);
  const auto& a = net.junction(l.from);
  const auto& b = net.junction(l.to);
  const bool north_south = std::abs(b.y - a.y) >= std::abs(b.x - a.x);
  return north_south == (phase == LightPhase::NorthSouth);
}

double stopping_distance(double speed, double decel, double dt) {
  // sum_{k>=1} max(0, v - k*decel) * dt
  const double n = std::floor(speed / decel);
  return dt * (n * speed - decel * n * (n + 1.0) / 2.0);
}

double capture_distance(const RoadNetwork& net, const Location& a, const Location& b) {
  return roadnet::road_distance(net, a, b);
}

std::vector<Turn> feasible_turns(const RoadNetwork& net, LaneId lane) {
  std::vector<Turn> out;
  for (Turn t : {Turn::Left, Turn::Right, Turn::Straight})
    if (net.successor_for(lane, t)) out.push_back(t);
  return out;
}

std::vector<Turn> feasible_actions(const WorldState& world, std::size_t pursuer) {
  if (pursuer >= world.pursuer_count) throw std::out_of_range("unknown pursuer");
  return feasible_turns(world.net(), world.pursuer(pursuer).location.lane);
}

std::vector<double> count_background(const WorldState& world) {
  std::vector<double> bv(world.net().lane_count(), 0.0);
  for (const auto& v : world.background()) bv[v.location.lane] += 1.0;
  return bv;
}

namespace {

LaneId random_next_lane(const RoadNetwork& net, LaneId lane, Rng& rng) {
  const auto turns = feasible_turns(net, lane);
  const Turn t = turns[uniform_index(rng, turns.size())];
  return *net.successor_for(lane, t);
}

LaneId default_next_lane(const RoadNetwork& net, LaneId lane, Turn preferred) {
  if (auto next = net.successor_for(lane, preferred)) return *next;
  return *net.successor_for(lane, feasible_turns(net, lane).front());
}

// Pursuers and evaders are not obstacles to each other; captured evaders are
// off the road.
bool constrains(VehicleKind follower, VehicleKind obstacle) {
  if (follower == VehicleKind::Pursuer && obstacle == VehicleKind::Evader) return false;
  if (follower == VehicleKind::Evader && obstacle == VehicleKind::Pursuer) return false;
  return true;
}

void place(WorldState& world, VehicleKind kind, std::uint32_t id, std::span<const LaneId> lanes,
           std::size_t slot, bool random_lane) {
  const RoadNetwork& net = world.net();
  const double gap = world.config.kinematics.min_gap;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const LaneId lane = random_lane ? static_cast<LaneId>(uniform_index(world.rng, lanes.size()))
                                    : lanes[(slot + attempt) % lanes.size()];
    const double offset = uniform(world.rng, 0.0, net.lane(lane).length);
    const bool clear = std::none_of(world.vehicles.begin(), world.vehicles.end(), [&](const auto& v) {
      return v.location.lane == lane && std::abs(v.location.offset - offset) < gap;
    });
    if (!clear) continue;
    VehicleState v;
    v.id = id;
    v.kind = kind;
    v.location = {lane, offset};
    v.speed = 0.0;
    v.next_lane = kind == VehicleKind::Pursuer ? default_next_lane(net, lane, Turn::Straight)
                                               : random_next_lane(net, lane, world.rng);
    world.vehicles.push_back(v);
    return;
  }
  throw PlacementError("could not place " + std::string(kind_name(kind)) + " " + std::to_string(id) +
                       " with the minimum gap");
}

// Lanes touching the junction closest to (sign*inf, sign*inf) along x+y.
std::vector<LaneId> corner_lanes(const RoadNetwork& net, bool far_corner) {
  roadnet::JunctionId best = 0;
  for (const auto& j : net.junctions()) {
    const auto& b = net.junction(best);
    const double key = j.x + j.y;
    const double best_key = b.x + b.y;
    if (far_corner ? key >= best_key : key < best_key) best = j.id;
  }
  std::vector<LaneId> lanes;
  for (const auto& l : net.lanes())
    if (l.from == best || l.to == best) lanes.push_back(l.id);
  return lanes;
}

// Position of `loc` along the pursuer's path for this step, measured from its
// start: the start lane from `from.offset` on, then the lane it entered. Lanes
// running the other way along the same road map onto the same coordinate.
std::optional<double> path_coordinate(const RoadNetwork& net, const Location& from, const Location& to,
                                      const Location& loc) {
  auto along = [&](LaneId lane, double offset) -> std::optional<double> {
    const roadnet::Lane& a = net.lane(lane);
    const roadnet::Lane& b = net.lane(loc.lane);
    if (loc.lane == lane) return loc.offset - offset;
    if (a.from == b.to && a.to == b.from && a.length == b.length) return (a.length - loc.offset) - offset;
    return std::nullopt;
  };
  if (auto c = along(from.lane, from.offset)) return c;
  if (to.lane != from.lane)
    if (auto c = along(to.lane, 0.0)) return *c + (net.lane(from.lane).length - from.offset);
  return std::nullopt;
}

// The pursuer and its target swapped order along the pursuer's path during the step.
bool passed_through(const RoadNetwork& net, const Location& p0, const Location& p1, const Location& e0,
                    const Location& e1) {
  const auto c0 = path_coordinate(net, p0, p1, e0);
  const auto c1 = path_coordinate(net, p0, p1, e1);
  if (!c0 || !c1) return false;
  const double travelled =
      p1.lane == p0.lane ? p1.offset - p0.offset : net.lane(p0.lane).length - p0.offset + p1.offset;
  const double r0 = *c0, r1 = *c1 - travelled;
  return (r0 > 0.0 && r1 < 0.0) || (r0 < 0.0 && r1 > 0.0);
}

}  // namespace

WorldState reset(const EpisodeConfig& config) {
  config.validate();
  const RoadNetwork& net = *config.scene;
  const std::size_t total = config.pursuers + config.evaders + config.background;
  double capacity = 0.0;
  for (const auto& l : net.lanes()) capacity += std::floor(l.length / config.kinematics.min_gap) + 1.0;
  if (static_cast<double>(total) > capacity)
    throw PlacementError("road network cannot hold " + std::to_string(total) + " vehicles");

  WorldState world;
  world.config = config;
  world.rng.seed(config.seed);
  world.pursuer_count = config.pursuers;
  world.evader_count = config.evaders;
  world.vehicles.reserve(total);
  world.light_phases.assign(net.junction_count(), light_phase_at(0));
  world.entry_locks.assign(net.lane_count(), EntryLock{});

  const auto near = corner_lanes(net, false);
  const auto far = corner_lanes(net, true);
  std::vector<LaneId> all(net.lane_count());
  std::iota(all.begin(), all.end(), LaneId{0});

  std::uint32_t id = 0;
  for (std::size_t n = 0; n < config.pursuers; ++n, ++id) place(world, VehicleKind::Pursuer, id, near, n, false);
  for (std::size_t m = 0; m < config.evaders; ++m, ++id) place(world, VehicleKind::Evader, id, far, m, false);
  for (std::size_t b = 0; b < config.background; ++b, ++id)
    place(world, VehicleKind::Background, id, all, b, true);
  return world;
}

StepEvents step(WorldState& world, std::span<const PursuerCommand> commands) {
  if (world.done) throw std::logic_error("step called on a finished episode");
  if (commands.size() != world.pursuer_count)
    throw std::invalid_argument("expected one command per pursuer (" +
                                std::to_string(world.pursuer_count) + "), got " +
                                std::to_string(commands.size()));
  const RoadNetwork& net = world.net();
  const Kinematics& kin = world.config.kinematics;
  const double gap = kin.min_gap;
  const double dt = kin.dt;

  for (std::size_t n = 0; n < commands.size(); ++n) {
    const auto& cmd = commands[n];
    if (cmd.target >= world.evader_count)
      throw std::invalid_argument("pursuer " + std::to_string(n) + " targets unknown evader " +
                                  std::to_string(cmd.target));
    if (world.evader(cmd.target).captured)
      throw std::invalid_argument("pursuer " + std::to_string(n) + " targets captured evader " +
                                  std::to_string(cmd.target));
    VehicleState& p = world.vehicles[n];
    if (p.entry_granted) continue;  // committed to the junction
    const auto next = net.successor_for(p.location.lane, cmd.action);
    if (!next)
      throw std::invalid_argument("pursuer " + std::to_string(n) + ": turn '" +
                                  roadnet::turn_name(cmd.action) + "' is not available on lane " +
                                  std::to_string(p.location.lane));
    p.next_lane = *next;
  }

  // Obstacles per lane: positions at the start of the step (vehicles only move
  // forward, so these are conservative) plus vehicles that entered this step.
  struct Obstacle {
    double offset;
    VehicleKind kind;
  };
  const std::size_t L = net.lane_count();
  std::vector<std::vector<Obstacle>> obstacles(L);
  std::vector<std::size_t> order;
  order.reserve(world.vehicles.size());
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    const auto& v = world.vehicles[i];
    if (v.kind == VehicleKind::Evader && v.captured) continue;
    obstacles[v.location.lane].push_back({v.location.offset, v.kind});
    order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& va = world.vehicles[a].location;
    const auto& vb = world.vehicles[b].location;
    if (va.lane != vb.lane) return va.lane < vb.lane;
    if (va.offset != vb.offset) return va.offset > vb.offset;
    return a < b;
  });

  auto rear_on = [&](LaneId lane, VehicleKind kind) {
    double rear = std::numeric_limits<double>::infinity();
    for (const auto& o : obstacles[lane])
      if (constrains(kind, o.kind)) rear = std::min(rear, o.offset);
    return rear;
  };

  const LightPhase phase = light_phase_at(world.step);
  std::vector<Location> start(world.vehicles.size());
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) start[i] = world.vehicles[i].location;

  std::size_t segment = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t idx = order[k];
    VehicleState& v = world.vehicles[idx];
    const LaneId lane = v.location.lane;
    const double x = v.location.offset;
    const double len = net.lane(lane).length;
    if (start[order[segment]].lane != lane) segment = k;

    // Same-lane leaders, already advanced this step.
    double limit = std::numeric_limits<double>::infinity();
    for (std::size_t q = segment; q < k; ++q) {
      const std::size_t u = order[q];
      const auto& other = world.vehicles[u];
      if (other.location.lane != lane || !constrains(v.kind, other.kind)) continue;
      limit = std::min(limit, other.location.offset - gap);
    }

    const double v_lo = std::max(0.0, v.speed - kin.decel_max * dt);
    const double v_hi = std::min(v.speed + kin.accel_max * dt, kin.v_max);
    auto reach = [&](double s) { return x + s * dt + stopping_distance(s, kin.decel_max, dt); };

    if (!v.entry_granted && reach(v_hi) > len && lane_has_green(net, lane, phase)) {
      EntryLock& lock = world.entry_locks[v.next_lane];
      const bool lock_ok = lock.owner < 0 || lock.owner == static_cast<std::int64_t>(lane);
      if (lock_ok && rear_on(v.next_lane, v.kind) >= gap) {
        lock.owner = lane;
        ++lock.holders;
        v.entry_granted = true;
      }
    }
    if (v.entry_granted) {
      const double next_len = net.lane(v.next_lane).length;
      limit = std::min(limit, len + std::min(rear_on(v.next_lane, v.kind) - gap, next_len));
    } else {
      limit = std::min(limit, len);
    }

    double speed = v_lo;
    if (reach(v_hi) <= limit) {
      speed = v_hi;
    } else if (reach(v_lo) <= limit) {
      double lo = v_lo, hi = v_hi;
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (reach(mid) <= limit ? lo : hi) = mid;
      }
      speed = lo;
    }
    double pos = x + speed * dt;
    if (pos > limit) pos = std::max(x, limit);  // unreachable under the safe-speed rule

    v.speed = speed;
    if (pos > len && v.entry_granted) {
      const LaneId next = v.next_lane;
      EntryLock& lock = world.entry_locks[next];
      if (--lock.holders == 0) lock.owner = -1;
      v.entry_granted = false;
      v.location = {next, std::min(pos - len, net.lane(next).length)};
      obstacles[next].push_back({v.location.offset, v.kind});
      if (v.kind == VehicleKind::Pursuer) {
        const Turn keep = net.turn_between(lane, next).value_or(Turn::Straight);
        v.next_lane = default_next_lane(net, next, keep);
      } else {
        v.next_lane = random_next_lane(net, next, world.rng);
      }
    } else {
      v.location.offset = std::min(pos, len);
    }
  }

  StepEvents events;
  for (std::size_t n = 0; n < world.pursuer_count; ++n) {
    const std::uint32_t m = commands[n].target;
    VehicleState& e = world.vehicles[world.pursuer_count + m];
    if (e.captured) continue;
    const bool close = capture_distance(net, world.vehicles[n].location, e.location) < world.config.capture_distance;
    if (close || passed_through(net, start[n], world.vehicles[n].location, start[world.pursuer_count + m], e.location)) {
      e.captured = true;
      e.speed = 0.0;
      if (e.entry_granted) {
        EntryLock& lock = world.entry_locks[e.next_lane];
        if (--lock.holders == 0) lock.owner = -1;
        e.entry_granted = false;
      }
      events.captures.push_back({static_cast<std::uint32_t>(n), m});
    }
  }

  ++world.step;
  std::fill(world.light_phases.begin(), world.light_phases.end(), light_phase_at(world.step));
  world.done = world.evaders_remaining() == 0 || world.step >= world.config.max_steps;
  events.done = world.done;
  return events;
}

std::uint64_t state_hash(const WorldState& world) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&](std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xFF;
      h *= 0x100000001B3ULL;
    }
  };
  mix(world.step);
  mix(world.done);
  for (const auto& v : world.vehicles) {
    mix(v.id);
    mix(static_cast<std::uint64_t>(v.kind));
    mix(v.location.lane);
    mix(std::bit_cast<std::uint64_t>(v.location.offset));
    mix(std::bit_cast<std::uint64_t>(v.speed));
    mix(v.captured);
    mix(v.next_lane);
    mix(v.entry_granted);
  }
  for (auto p : world.light_phases) mix(static_cast<std::uint64_t>(p));
  for (const auto& l : world.entry_locks) {
    mix(static_cast<std::uint64_t>(l.owner));
    mix(l.holders);
  }
  return h;
}

}  // namespace mvp::sim
