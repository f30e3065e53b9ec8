#include <algorithm>
#include <functional>
#include <sstream>

#include "doctest.h"
#include "mvp/rng.hpp"
#include "mvp/roadnet.hpp"

using namespace mvp;
using namespace mvp::roadnet;

namespace {

// One-way square ring 0 -> 1 -> 2 -> 3 -> 0, lane i leaves junction i.
RoadNetwork ring(double len = 100.0) {
  std::vector<Junction> j{{0, 0, 0}, {1, len, 0}, {2, len, len}, {3, 0, len}};
  std::vector<Lane> l{{0, 0, 1, len}, {1, 1, 2, len}, {2, 2, 3, len}, {3, 3, 0, len}};
  return RoadNetwork(j, l);
}

// Exhaustive enumeration of lane sequences (no lane repeated) from a to b.
double brute_force_distance(const RoadNetwork& net, const Location& a, const Location& b) {
  if (a.lane == b.lane && b.offset >= a.offset) return b.offset - a.offset;
  double best = kUnreachable;
  std::vector<bool> seen(net.lane_count(), false);
  std::function<void(LaneId, double)> walk = [&](LaneId lane, double so_far) {
    for (LaneId next : net.successors(lane)) {
      if (next == b.lane) best = std::min(best, so_far + b.offset);
      if (seen[next]) continue;
      seen[next] = true;
      walk(next, so_far + net.lane(next).length);
      seen[next] = false;
    }
  };
  seen[a.lane] = true;
  walk(a.lane, net.lane(a.lane).length - a.offset);
  return best;
}

Location random_location(const RoadNetwork& net, Rng& rng) {
  const auto lane = static_cast<LaneId>(uniform_index(rng, net.lane_count()));
  return {lane, uniform(rng, 0.0, net.lane(lane).length)};
}

}  // namespace

TEST_CASE("grid junction and lane counts") {
  for (std::size_t x = 1; x <= 5; ++x)
    for (std::size_t y = 1; y <= 5; ++y) {
      const auto net = generate_grid(x, y, 100.0);
      CHECK(net.junction_count() == (x + 1) * (y + 1));
      CHECK(net.lane_count() == 2 * (x * (y + 1) + y * (x + 1)));
    }
  CHECK(generate_grid(3, 3, 500.0).junction_count() == 16);
  CHECK(generate_grid(3, 3, 500.0).lane_count() == 48);
  CHECK(generate_grid(4, 5, 400.0).junction_count() == 30);
  CHECK(generate_grid(4, 5, 400.0).lane_count() == 98);
}

TEST_CASE("lane codes") {
  CHECK(lane_code(5, 48).to_string() == "000101");
  CHECK(lane_code(0, 2).to_string() == "0");
  CHECK(code_width(1) == 1);
  CHECK(code_width(48) == 6);
  std::vector<std::string> codes;
  for (LaneId i = 0; i < 8; ++i) {
    codes.push_back(lane_code(i, 8).to_string());
    CHECK(lane_code(i, 8).decode() == i);
  }
  std::sort(codes.begin(), codes.end());
  CHECK(std::unique(codes.begin(), codes.end()) == codes.end());
  CHECK_THROWS_AS(lane_code(48, 48), std::out_of_range);
}

TEST_CASE("network distance on a one-way ring") {
  const auto net = ring();
  CHECK(network_distance(net, {0, 10}, {0, 60}) == 50.0);
  CHECK(network_distance(net, {0, 30}, {0, 30}) == 0.0);
  // b behind a: the path loops through the other three lanes.
  CHECK(network_distance(net, {0, 60}, {0, 10}) == brute_force_distance(net, {0, 60}, {0, 10}));
  CHECK(network_distance(net, {0, 60}, {0, 10}) == 40.0 + 300.0 + 10.0);
  CHECK(network_distance(net, {2, 25}, {1, 5}) == 75.0 + 100.0 + 100.0 + 5.0);
  CHECK(network_distance(net, {2, 25}, {1, 5}) == brute_force_distance(net, {2, 25}, {1, 5}));
}

TEST_CASE("network distance agrees with exhaustive path search on a grid") {
  const auto net = generate_grid(2, 1, 80.0);
  Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_location(net, rng), b = random_location(net, rng);
    const double d = network_distance(net, a, b);
    CHECK(d >= 0.0);
    CHECK(d == doctest::Approx(brute_force_distance(net, a, b)).epsilon(1e-12));
  }
}

TEST_CASE("network distance triangle inequality") {
  const auto net = generate_grid(2, 2, 60.0);
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_location(net, rng), b = random_location(net, rng), c = random_location(net, rng);
    CHECK(network_distance(net, a, c) <= network_distance(net, a, b) + network_distance(net, b, c) + 1e-9);
  }
}

TEST_CASE("road distance is a direction-free metric bounded by driving distance") {
  const auto net = generate_grid(2, 2, 60.0);
  Rng rng(5);
  for (int i = 0; i < 300; ++i) {
    const auto a = random_location(net, rng), b = random_location(net, rng), c = random_location(net, rng);
    const double ab = road_distance(net, a, b);
    CHECK(ab >= 0.0);
    CHECK(ab == doctest::Approx(road_distance(net, b, a)).epsilon(1e-12));
    CHECK(ab <= network_distance(net, a, b) + 1e-9);
    CHECK(road_distance(net, a, c) <= ab + road_distance(net, b, c) + 1e-9);
  }
}

TEST_CASE("road distance moves by at most the distance a vehicle drives") {
  const auto net = generate_grid(2, 2, 60.0);
  Rng rng(9);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_location(net, rng), b = random_location(net, rng);
    const double s = uniform(rng, 0.0, 20.0);
    // Advance a by s metres along its lane and, past the end, onto a successor.
    Location moved = a;
    const double len = net.lane(a.lane).length;
    if (a.offset + s <= len) {
      moved.offset += s;
    } else {
      const auto succ = net.successors(a.lane);
      moved = {succ[uniform_index(rng, succ.size())], a.offset + s - len};
    }
    CHECK(std::abs(road_distance(net, moved, b) - road_distance(net, a, b)) <= s + 1e-9);
  }
}

TEST_CASE("road distance between opposite lanes of one road") {
  const auto net = generate_grid(1, 1, 100.0);
  // Find a lane and its reverse.
  for (const auto& l : net.lanes())
    for (const auto& r : net.lanes())
      if (l.from == r.to && l.to == r.from) {
        CHECK(road_distance(net, {l.id, 30.0}, {r.id, 70.0}) == doctest::Approx(0.0));
        CHECK(road_distance(net, {l.id, 30.0}, {r.id, 60.0}) == doctest::Approx(10.0));
      }
}

TEST_CASE("strong connectivity") {
  CHECK_FALSE(generate_grid(1, 1, 100.0).strongly_connected());
  CHECK(generate_grid(2, 2, 100.0).strongly_connected());
  CHECK(generate_grid(3, 3, 500.0).strongly_connected());
  CHECK(generate_grid(4, 5, 400.0).strongly_connected());
}

TEST_CASE("adjacency matrix is binary and follows junctions") {
  const auto net = generate_grid(3, 3, 500.0);
  const auto adj = adjacency_matrix(net);
  const std::size_t L = net.lane_count();
  REQUIRE(adj.size() == L * L);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j) {
      CHECK(adj[i * L + j] <= 1);
      if (adj[i * L + j]) CHECK(net.lane(static_cast<LaneId>(j)).from == net.lane(static_cast<LaneId>(i)).to);
    }
}

TEST_CASE("turn classes at grid junctions") {
  const auto net = generate_grid(2, 2, 100.0);
  // Junction 4 is the centre of a 3x3 junction lattice: every incoming lane has all three turns.
  for (const auto& l : net.lanes()) {
    if (l.to != 4) continue;
    std::vector<Turn> turns;
    for (LaneId s : net.successors(l.id)) turns.push_back(*net.turn_between(l.id, s));
    std::sort(turns.begin(), turns.end());
    CHECK(turns == std::vector<Turn>{Turn::Left, Turn::Right, Turn::Straight});
  }
  // Corner junction 0: one way out besides the reversal.
  for (const auto& l : net.lanes())
    if (l.to == 0) CHECK(net.successors(l.id).size() == 1);
}

TEST_CASE("map text round trip") {
  const auto net = generate_grid(3, 2, 250.0);
  std::stringstream ss;
  write_map(ss, net);
  CHECK(parse_map(ss) == net);
}

TEST_CASE("map parse errors carry line numbers") {
  std::istringstream bad_lane("junctions 2\nJ 0 0 0\nJ 1 1 0\nlanes 2\nL 0 0 1 5\nL 1 1 x 5\n");
  try {
    parse_map(bad_lane);
    FAIL("expected MapError");
  } catch (const MapError& e) {
    CHECK(e.line() == 6);
  }
  std::istringstream truncated("# comment\njunctions 2\nJ 0 0 0\n");
  CHECK_THROWS_AS(parse_map(truncated), MapError);
  std::istringstream dead_end("junctions 2\nJ 0 0 0\nJ 1 1 0\nlanes 1\nL 0 0 1 5\n");
  CHECK_THROWS_AS(parse_map(dead_end), MapError);
  std::istringstream missing("junctions 2\nJ 0 0 0\nJ 1 1 0\nlanes 1\nL 0 0 7 5\n");
  CHECK_THROWS_AS(parse_map(missing), MapError);
}
