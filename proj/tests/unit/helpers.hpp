#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "mvp/rng.hpp"
#include "mvp/roadnet.hpp"
#include "mvp/sim.hpp"
#include "mvp/config.hpp"

namespace testutil {

inline mvp::sim::EpisodeConfig episode(std::size_t bx, std::size_t by, double len, std::size_t pursuers,
                                       std::size_t evaders, std::size_t background, std::uint64_t seed,
                                       std::size_t max_steps = 800) {
  mvp::sim::EpisodeConfig c;
  c.scene = std::make_shared<const mvp::roadnet::RoadNetwork>(mvp::roadnet::generate_grid(bx, by, len));
  c.pursuers = pursuers;
  c.evaders = evaders;
  c.background = background;
  c.seed = seed;
  c.max_steps = max_steps;
  return c;
}

inline std::pair<double, double> position(const mvp::roadnet::RoadNetwork& net, const mvp::roadnet::Location& loc) {
  const auto& l = net.lane(loc.lane);
  const auto& a = net.junction(l.from);
  const auto& b = net.junction(l.to);
  const double t = loc.offset / l.length;
  return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
}

// Random feasible turns, targets = the lowest live evader.
inline std::vector<mvp::sim::PursuerCommand> random_commands(const mvp::sim::WorldState& w, mvp::Rng& rng) {
  std::uint32_t target = 0;
  while (w.evader(target).captured) ++target;
  std::vector<mvp::sim::PursuerCommand> cmds(w.pursuer_count);
  for (std::size_t n = 0; n < w.pursuer_count; ++n) {
    const auto feasible = mvp::sim::feasible_actions(w, n);
    cmds[n] = {feasible[mvp::uniform_index(rng, feasible.size())], target};
  }
  return cmds;
}

// A scene and network sizes small enough for many training epochs in a test.
inline mvp::trainer::TrainConfig tiny_config(std::uint64_t seed = 3) {
  mvp::trainer::TrainConfig c;
  c.blocks_x = 2;
  c.blocks_y = 2;
  c.lane_length = 100.0;
  c.scenario = "custom";
  c.pursuers = 2;
  c.evaders = 1;
  c.background = 4;
  c.max_steps = 20;
  c.max_epoch = 10;
  c.max_cap = 4;
  c.k_sample = 2;
  c.q_hidden = {16, 16};
  c.pn_hidden = {8, 4};
  c.f_dim = 4;
  c.heads = 2;
  c.d_k = 4;
  c.seed = seed;
  return c;
}

}  // namespace testutil
