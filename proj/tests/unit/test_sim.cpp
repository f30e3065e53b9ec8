#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"
#include "mvp/sim.hpp"

using namespace mvp;
using namespace mvp::sim;

namespace {

void put(WorldState& w, std::size_t idx, Location loc, double speed) {
  auto& v = w.vehicles[idx];
  v.location = loc;
  v.speed = speed;
  v.entry_granted = false;
  v.next_lane = w.net().successors(loc.lane)[0];
}

// Distinct lanes far from any other vehicle, for hand-built situations.
WorldState quiet_world(std::size_t pursuers, std::size_t evaders) {
  auto cfg = testutil::episode(3, 3, 500.0, pursuers, evaders, 0, 1);
  return reset(cfg);
}

}  // namespace

TEST_CASE("reset places pursuers and evaders at opposite corners at rest") {
  auto cfg = testutil::episode(3, 3, 500.0, 6, 3, 40, 7);
  const auto w = reset(cfg);
  const auto& net = w.net();
  REQUIRE(w.vehicles.size() == 49);
  for (std::size_t n = 0; n < 6; ++n) {
    const auto [x, y] = testutil::position(net, w.pursuer(n).location);
    CHECK(x <= 500.0);
    CHECK(y <= 500.0);
    CHECK(w.pursuer(n).speed == 0.0);
  }
  for (std::size_t m = 0; m < 3; ++m) {
    const auto [x, y] = testutil::position(net, w.evader(m).location);
    CHECK(x >= 1000.0);
    CHECK(y >= 1000.0);
    CHECK(w.evader(m).speed == 0.0);
    CHECK_FALSE(w.evader(m).captured);
  }
  CHECK(w.step == 0);
  CHECK_FALSE(w.done);
}

TEST_CASE("reset is deterministic") {
  auto cfg = testutil::episode(3, 3, 500.0, 6, 3, 40, 7);
  const auto a = reset(cfg), b = reset(cfg);
  CHECK(state_hash(a) == state_hash(b));
  for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
    CHECK(a.vehicles[i].location == b.vehicles[i].location);
    CHECK(a.vehicles[i].next_lane == b.vehicles[i].next_lane);
  }
  cfg.seed = 8;
  CHECK(state_hash(reset(cfg)) != state_hash(a));
}

TEST_CASE("episode config validation and placement capacity") {
  auto cfg = testutil::episode(1, 1, 100.0, 1, 1, 0, 1);
  CHECK_THROWS_AS(reset(cfg), std::invalid_argument);  // N > M required
  cfg = testutil::episode(1, 1, 10.0, 2, 1, 100, 1);
  CHECK_THROWS_AS(reset(cfg), PlacementError);
}

TEST_CASE("background counts") {
  auto cfg = testutil::episode(2, 2, 200.0, 2, 1, 0, 3);
  auto w = reset(cfg);
  const auto zero = count_background(w);
  CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));

  cfg.background = 5;
  w = reset(cfg);
  for (std::size_t b = 0; b < 5; ++b) put(w, w.pursuer_count + w.evader_count + b, {3, 10.0 + 20.0 * b}, 0.0);
  const auto bv = count_background(w);
  CHECK(bv[3] == 5.0);
  CHECK(std::accumulate(bv.begin(), bv.end(), 0.0) == 5.0);
}

TEST_CASE("background population is conserved over a rollout") {
  auto cfg = testutil::episode(2, 2, 200.0, 3, 1, 25, 4, 100);
  auto w = reset(cfg);
  Rng rng(1);
  while (!w.done) {
    step(w, testutil::random_commands(w, rng));
    const auto bv = count_background(w);
    CHECK(std::accumulate(bv.begin(), bv.end(), 0.0) == 25.0);
  }
}

TEST_CASE("one acceleration step from rest on an empty lane") {
  auto w = quiet_world(2, 1);
  put(w, 0, {0, 100.0}, 0.0);
  put(w, 1, {5, 100.0}, 0.0);
  put(w, 2, {10, 100.0}, 0.0);
  step(w, std::vector<PursuerCommand>{{feasible_actions(w, 0)[0], 0}, {feasible_actions(w, 1)[0], 0}});
  for (const auto& v : w.vehicles) CHECK(v.speed == 0.5);
}

TEST_CASE("vehicle at top speed stays at top speed on open road") {
  auto w = quiet_world(2, 1);
  put(w, 0, {0, 0.0}, 20.0);
  put(w, 1, {5, 100.0}, 0.0);
  put(w, 2, {10, 100.0}, 0.0);
  step(w, std::vector<PursuerCommand>{{feasible_actions(w, 0)[0], 0}, {feasible_actions(w, 1)[0], 0}});
  CHECK(w.pursuer(0).speed == 20.0);
  CHECK(w.pursuer(0).location.offset == doctest::Approx(20.0));
}

TEST_CASE("capture below the capture distance, strictly") {
  for (double gap : {4.9, 5.1}) {
    auto w = quiet_world(2, 1);
    put(w, 0, {0, 100.0}, 0.0);
    put(w, 1, {5, 100.0}, 0.0);
    put(w, 2, {0, 100.0 + gap}, 0.0);
    const auto ev = step(w, std::vector<PursuerCommand>{{feasible_actions(w, 0)[0], 0}, {feasible_actions(w, 1)[0], 0}});
    if (gap < 5.0) {
      REQUIRE(ev.captures.size() == 1);
      CHECK(ev.captures[0] == CaptureEvent{0, 0});
      CHECK(w.evader(0).captured);
      CHECK(ev.done);
    } else {
      CHECK(ev.captures.empty());
      CHECK_FALSE(w.evader(0).captured);
    }
  }
}

TEST_CASE("a pursuer that drives past its target within the step captures it") {
  auto w = quiet_world(2, 1);
  put(w, 0, {0, 100.0}, 20.0);
  put(w, 1, {5, 100.0}, 0.0);
  put(w, 2, {0, 112.0}, 0.0);
  const auto ev = step(w, std::vector<PursuerCommand>{{feasible_actions(w, 0)[0], 0}, {feasible_actions(w, 1)[0], 0}});
  CHECK(w.pursuer(0).location.offset == doctest::Approx(120.0));
  REQUIRE(ev.captures.size() == 1);
  CHECK(w.evader(0).captured);
}

TEST_CASE("head-on crossing on the opposite lane captures") {
  auto w = quiet_world(2, 1);
  const auto& net = w.net();
  const auto& l0 = net.lane(0);
  roadnet::LaneId back = 0;
  for (const auto& l : net.lanes())
    if (l.from == l0.to && l.to == l0.from) back = l.id;
  REQUIRE(back != 0);
  put(w, 0, {0, 100.0}, 20.0);
  put(w, 1, {5, 100.0}, 0.0);
  put(w, 2, {back, l0.length - 130.0}, 20.0);  // 30 m ahead, driving towards the pursuer
  const auto ev = step(w, std::vector<PursuerCommand>{{feasible_actions(w, 0)[0], 0}, {feasible_actions(w, 1)[0], 0}});
  CHECK(ev.captures.size() == 1);
}

TEST_CASE("no capture when the target stays ahead") {
  auto w = quiet_world(2, 1);
  put(w, 0, {0, 100.0}, 20.0);
  put(w, 1, {5, 100.0}, 0.0);
  put(w, 2, {0, 140.0}, 0.0);
  CHECK(step(w, std::vector<PursuerCommand>{{feasible_actions(w, 0)[0], 0}, {feasible_actions(w, 1)[0], 0}})
            .captures.empty());
}

TEST_CASE("only the assigned target can be captured") {
  auto w = quiet_world(3, 2);
  put(w, 0, {0, 100.0}, 0.0);
  put(w, 1, {5, 100.0}, 0.0);
  put(w, 2, {7, 100.0}, 0.0);
  put(w, 3, {0, 102.0}, 0.0);
  put(w, 4, {10, 100.0}, 0.0);
  std::vector<PursuerCommand> cmds;
  for (std::size_t n = 0; n < 3; ++n) cmds.push_back({feasible_actions(w, n)[0], 1});
  CHECK(step(w, cmds).captures.empty());
  CHECK_FALSE(w.evader(0).captured);
}

TEST_CASE("step rejects malformed commands") {
  auto w = quiet_world(2, 1);
  CHECK_THROWS_AS(step(w, std::vector<PursuerCommand>{{Turn::Straight, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(step(w, std::vector<PursuerCommand>{{feasible_actions(w, 0)[0], 3}, {feasible_actions(w, 1)[0], 0}}),
                  std::invalid_argument);
  // Pursuer 0 on a corner lane with a single way out.
  const auto& net = w.net();
  for (const auto& l : net.lanes())
    if (l.to == 0) {
      put(w, 0, {l.id, 10.0}, 0.0);
      break;
    }
  const auto feasible = feasible_actions(w, 0);
  REQUIRE(feasible.size() < 3);
  Turn missing = Turn::Left;
  for (Turn t : {Turn::Left, Turn::Right, Turn::Straight})
    if (std::find(feasible.begin(), feasible.end(), t) == feasible.end()) missing = t;
  CHECK_THROWS_AS(step(w, std::vector<PursuerCommand>{{missing, 0}, {feasible_actions(w, 1)[0], 0}}),
                  std::invalid_argument);
}

TEST_CASE("feasible actions follow the junction geometry") {
  const auto net = roadnet::generate_grid(2, 2, 100.0);
  for (const auto& l : net.lanes()) {
    const auto f = feasible_turns(net, l.id);
    CHECK_FALSE(f.empty());
    if (l.to == 4) CHECK(f.size() == 3);
    if (l.to == 0 || l.to == 2 || l.to == 6 || l.to == 8) {
      CHECK(f.size() >= 1);
      CHECK(f.size() <= 2);
    }
  }
  const auto corner = roadnet::generate_grid(1, 1, 100.0);
  for (const auto& l : corner.lanes()) CHECK(feasible_turns(corner, l.id).size() == 1);
}

TEST_CASE("rollout invariants") {
  auto cfg = testutil::episode(3, 3, 500.0, 6, 3, 40, 21, 300);
  auto w = reset(cfg);
  const auto& k = cfg.kinematics;
  Rng rng(2);
  std::vector<std::optional<Location>> frozen(w.evader_count);
  bool was_done = false;
  while (!w.done) {
    const auto before = w.vehicles;
    step(w, testutil::random_commands(w, rng));
    for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
      const auto& v = w.vehicles[i];
      CHECK(v.speed >= 0.0);
      CHECK(v.speed <= k.v_max);
      // A captured evader stops in place.
      if (v.kind == VehicleKind::Evader && v.captured) continue;
      CHECK(v.speed - before[i].speed <= k.accel_max * k.dt + 1e-12);
      CHECK(before[i].speed - v.speed <= k.decel_max * k.dt + 1e-12);
    }
    for (std::size_t a = 0; a < w.vehicles.size(); ++a)
      for (std::size_t b = a + 1; b < w.vehicles.size(); ++b) {
        const auto& va = w.vehicles[a];
        const auto& vb = w.vehicles[b];
        if (va.location.lane != vb.location.lane) continue;
        if ((va.kind == VehicleKind::Evader && va.captured) || (vb.kind == VehicleKind::Evader && vb.captured)) continue;
        const bool chase = (va.kind == VehicleKind::Pursuer && vb.kind == VehicleKind::Evader) ||
                           (va.kind == VehicleKind::Evader && vb.kind == VehicleKind::Pursuer);
        if (chase) continue;
        CHECK(std::abs(va.location.offset - vb.location.offset) >= k.min_gap - 1e-9);
      }
    for (std::size_t m = 0; m < w.evader_count; ++m) {
      if (frozen[m]) CHECK(w.evader(m).location == *frozen[m]);
      if (w.evader(m).captured && !frozen[m]) frozen[m] = w.evader(m).location;
    }
    CHECK(w.step <= cfg.max_steps);
    if (was_done) CHECK(w.done);
    was_done = w.done;
  }
  CHECK((w.evaders_remaining() == 0 || w.step == cfg.max_steps));
}

TEST_CASE("episode ends at the step limit with evaders alive") {
  auto cfg = testutil::episode(3, 3, 500.0, 2, 1, 0, 5, 3);
  auto w = reset(cfg);
  Rng rng(1);
  for (int i = 0; i < 3; ++i) step(w, testutil::random_commands(w, rng));
  CHECK(w.done);
  CHECK(w.step == 3);
  CHECK(w.evaders_remaining() == 1);
}

TEST_CASE("identical seeds and actions give identical trajectories") {
  auto cfg = testutil::episode(3, 3, 500.0, 6, 3, 40, 9, 200);
  auto run = [&] {
    auto w = reset(cfg);
    Rng rng(4);
    std::vector<std::uint64_t> hashes;
    while (!w.done) {
      step(w, testutil::random_commands(w, rng));
      hashes.push_back(state_hash(w));
    }
    return hashes;
  };
  CHECK(run() == run());
}
