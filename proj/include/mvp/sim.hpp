#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mvp/rng.hpp"
#include "mvp/roadnet.hpp"

namespace mvp::sim {

using roadnet::LaneId;
using roadnet::Location;
using roadnet::RoadNetwork;
using roadnet::Turn;

struct Kinematics {
  double v_max = 20.0;     // m/s
  double accel_max = 0.5;  // m/s^2
  double decel_max = 4.5;  // m/s^2
  double min_gap = 5.0;    // m, same-lane spacing
  double dt = 1.0;         // s per step
};

// Every junction runs the same fixed cycle: north-south green for the first
// half, east-west green for the second.
inline constexpr std::size_t kLightCycle = 30;

enum class VehicleKind : std::uint8_t { Pursuer, Evader, Background };
enum class LightPhase : std::uint8_t { NorthSouth = 0, EastWest = 1 };

const char* kind_name(VehicleKind k);

struct VehicleState {
  std::uint32_t id = 0;
  VehicleKind kind = VehicleKind::Background;
  Location location;
  double speed = 0.0;
  bool captured = false;  // evaders only
  LaneId next_lane = 0;   // route intent at the end of the current lane
  bool entry_granted = false;
};

struct EpisodeConfig {
  std::size_t pursuers = 6;
  std::size_t evaders = 3;
  std::size_t background = 0;
  std::uint64_t seed = 0;
  std::shared_ptr<const RoadNetwork> scene;
  double capture_distance = 5.0;  // d_min
  std::size_t max_steps = 800;    // st
  Kinematics kinematics;

  // Throws std::invalid_argument.
  void validate() const;
};

class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CaptureEvent {
  std::uint32_t pursuer = 0;  // pursuer index
  std::uint32_t evader = 0;   // evader index

  friend bool operator==(const CaptureEvent&, const CaptureEvent&) = default;
};

struct StepEvents {
  std::vector<CaptureEvent> captures;
  bool done = false;
};

// Per-pursuer input for one step: the turn to take at the upcoming junction
// and the evader it is currently assigned to (only that evader can be captured).
struct PursuerCommand {
  Turn action = Turn::Straight;
  std::uint32_t target = 0;
};

// Owner of a lane-entry lock: vehicles from one incoming lane at a time may
// hold permission to enter a lane.
struct EntryLock {
  std::int64_t owner = -1;  // incoming lane id, -1 when free
  std::uint32_t holders = 0;
};

struct WorldState {
  std::size_t step = 0;
  std::vector<VehicleState> vehicles;  // pursuers, then evaders, then background
  std::vector<LightPhase> light_phases;  // per junction
  std::vector<EntryLock> entry_locks;    // per lane
  std::size_t pursuer_count = 0;
  std::size_t evader_count = 0;
  bool done = false;
  Rng rng;
  EpisodeConfig config;

  const RoadNetwork& net() const { return *config.scene; }
  const VehicleState& pursuer(std::size_t n) const { return vehicles.at(n); }
  const VehicleState& evader(std::size_t m) const { return vehicles.at(pursuer_count + m); }
  std::span<const VehicleState> background() const {
    return std::span<const VehicleState>(vehicles).subspan(pursuer_count + evader_count);
  }
  std::size_t evaders_remaining() const;
  std::vector<bool> captured_mask() const;
};

WorldState reset(const EpisodeConfig& config);

// Advances one time step in place. Throws std::invalid_argument for a wrong
// command count, an unknown or captured target, or an infeasible turn.
StepEvents step(WorldState& world, std::span<const PursuerCommand> commands);

// Background vehicles per lane.
std::vector<double> count_background(const WorldState& world);

// Turns available at the end of the pursuer's current lane, in action order.
std::vector<Turn> feasible_actions(const WorldState& world, std::size_t pursuer);
std::vector<Turn> feasible_turns(const RoadNetwork& net, LaneId lane);

LightPhase light_phase_at(std::size_t step);
// Whether traffic on `lane` may enter the junction at its end during `phase`.
bool lane_has_green(const RoadNetwork& net, LaneId lane, LightPhase phase);

// Stopping distance after the current step when braking at `decel` each step.
double stopping_distance(double speed, double decel, double dt);

// Capture and reward metric: on-road distance regardless of driving direction.
double capture_distance(const RoadNetwork& net, const Location& a, const Location& b);

// FNV-1a over the dynamic state; equal hashes for bit-identical states.
std::uint64_t state_hash(const WorldState& world);

}  // namespace mvp::sim
