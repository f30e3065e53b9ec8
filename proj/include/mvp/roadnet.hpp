#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvp::roadnet {

using LaneId = std::uint32_t;
using JunctionId = std::uint32_t;

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

struct Junction {
  JunctionId id = 0;
  double x = 0.0;
  double y = 0.0;
};

struct Lane {
  LaneId id = 0;
  JunctionId from = 0;
  JunctionId to = 0;
  double length = 0.0;
};

// Driving position: metres from the start of `lane`, within [0, length].
struct Location {
  LaneId lane = 0;
  double offset = 0.0;

  friend bool operator==(const Location&, const Location&) = default;
};

// Action classes at a junction. The numeric values are the agent action indices.
enum class Turn : std::uint8_t { Left = 0, Right = 1, Straight = 2 };

inline constexpr std::size_t kTurnCount = 3;

const char* turn_name(Turn t);

// Raised by the map loader; `line` is 1-based, 0 when the error is not tied to a line.
class MapError : public std::runtime_error {
 public:
  MapError(const std::string& what, std::size_t line);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Directed lane graph. Immutable once constructed.
//
// Successors of a lane are the lanes leaving its end junction, excluding the
// immediate reversal; a reversal is kept only at dead ends, where it is the
// sole way out. Shortest end-to-start path lengths between all lane pairs are
// precomputed at construction.
class RoadNetwork {
 public:
  RoadNetwork() = default;
  // Throws MapError when an invariant is violated (bad ids, lengths, dead lanes).
  RoadNetwork(std::vector<Junction> junctions, std::vector<Lane> lanes);

  std::span<const Junction> junctions() const { return junctions_; }
  std::span<const Lane> lanes() const { return lanes_; }
  std::size_t lane_count() const { return lanes_.size(); }
  std::size_t junction_count() const { return junctions_.size(); }
  const Lane& lane(LaneId id) const { return lanes_.at(id); }
  const Junction& junction(JunctionId id) const { return junctions_.at(id); }

  std::span<const LaneId> successors(LaneId id) const;

  // Heading of the lane in degrees, counter-clockwise from +x, in (-180, 180].
  double bearing(LaneId id) const;
  // Action class of moving from `from` onto its successor `to`; empty when the
  // bearing change matches no class.
  std::optional<Turn> turn_between(LaneId from, LaneId to) const;
  // First successor (by id) whose class is `turn`.
  std::optional<LaneId> successor_for(LaneId from, Turn turn) const;

  // Length of the shortest route from the end of `from` to the start of `to`,
  // counting the full length of every intermediate lane. 0 for direct
  // successors, kUnreachable when no route exists.
  double path_length(LaneId from, LaneId to) const {
    return hops_[static_cast<std::size_t>(from) * lanes_.size() + to];
  }

  // Shortest distance between two junctions over roads driven in either
  // direction; kUnreachable when disconnected.
  double junction_distance(JunctionId a, JunctionId b) const {
    return roads_[static_cast<std::size_t>(a) * junctions_.size() + b];
  }

  bool strongly_connected() const;

  friend bool operator==(const RoadNetwork& a, const RoadNetwork& b);

 private:
  void build_successors();
  void build_hops();
  void build_roads();

  std::vector<Junction> junctions_;
  std::vector<Lane> lanes_;
  std::vector<std::size_t> succ_begin_;
  std::vector<LaneId> succ_;
  std::vector<double> hops_;
  std::vector<double> roads_;
};

// Grid of blocks_x x blocks_y blocks: (blocks_x+1)(blocks_y+1) junctions with a
// bidirectional two-lane road on every grid edge. Junction id = y*(blocks_x+1)+x.
RoadNetwork generate_grid(std::size_t blocks_x, std::size_t blocks_y, double lane_length);

RoadNetwork parse_map(std::istream& in);
RoadNetwork load_map(const std::filesystem::path& path);
void write_map(std::ostream& out, const RoadNetwork& net);
void save_map(const std::filesystem::path& path, const RoadNetwork& net);

// L x L row-major 0/1 matrix, entry (i,j) = 1 iff j is a successor of i.
std::vector<std::uint8_t> adjacency_matrix(const RoadNetwork& net);

// Bit width of lane codes: ceil(log2 L), at least 1.
std::size_t code_width(std::size_t lane_count);

struct LaneCode {
  std::vector<std::uint8_t> bits;  // big-endian, one entry per bit

  LaneId decode() const;
  std::string to_string() const;
  friend bool operator==(const LaneCode&, const LaneCode&) = default;
};

// Throws std::out_of_range when lane_id >= lane_count.
LaneCode lane_code(LaneId lane_id, std::size_t lane_count);

// Shortest driving distance from a to b along lane connectivity.
double network_distance(const RoadNetwork& net, const Location& a, const Location& b);

// Shortest on-road distance from a to b ignoring driving direction. Moving
// either location by s metres changes it by at most s.
double road_distance(const RoadNetwork& net, const Location& a, const Location& b);

// Straight-line distance between the planar positions; debugging only.
double euclidean_distance(const RoadNetwork& net, const Location& a, const Location& b);

}  // namespace mvp::roadnet
