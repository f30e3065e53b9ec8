#pragma once

// Training configuration and its flat `key = value` text form.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mvp/agent.hpp"
#include "mvp/roadnet.hpp"
#include "mvp/sim.hpp"

namespace mvp::trainer {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Ablation { None, NoPrioritization, NoCognition };

std::string_view ablation_name(Ablation a);
Ablation parse_ablation(std::string_view text);

struct TrainConfig {
  // Scene.
  std::size_t blocks_x = 3;
  std::size_t blocks_y = 3;
  double lane_length = 500.0;
  std::string map_path;  // overrides the grid when set
  std::string scenario = "p6e3";
  std::size_t pursuers = 6;
  std::size_t evaders = 3;
  std::size_t background = 240;
  std::size_t max_steps = 800;
  double capture_distance = 5.0;
  sim::Kinematics kinematics;

  // Reward.
  agent::RewardParams reward;

  // Learning.
  std::size_t max_epoch = 300;
  double gamma = 0.9;
  double alpha = 1e-4;
  double tau = 0.001;
  double lambda = 0.5;
  double beta0 = 0.01;
  double zeta = 0.01;
  std::size_t history_k = 5;
  std::size_t max_cap = 64;
  std::size_t k_sample = 8;
  double epsilon_start = 0.9;
  double epsilon_end = 0.05;
  double epsilon_fraction = 0.6;
  double pn_lr = 1e-2;
  double pn_grad_clip = 10.0;  // 0 disables

  // Network shapes.
  std::vector<std::size_t> q_hidden{128, 128};
  std::vector<std::size_t> pn_hidden{64, 32};
  std::size_t f_dim = 32;
  std::size_t heads = 4;
  std::size_t d_k = 16;
  std::size_t conv_channels = 4;
  std::size_t conv_kernel = 3;
  std::size_t conv_stride = 2;

  // Run.
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::None;
  bool cotrain_cognition = false;
  bool separate_test_episode = false;
  std::size_t test_episodes = 1;  // per epoch, when separate_test_episode is set

  bool disable_prioritization() const { return ablation == Ablation::NoPrioritization; }
  bool disable_cognition() const { return ablation == Ablation::NoCognition; }

  // Throws ConfigError.
  void validate() const;
};

// Applies one key; scenario and blocks keys also apply their presets.
// Throws ConfigError for unknown keys or malformed values.
void set_value(TrainConfig& cfg, std::string_view key, std::string_view value);
void apply_scenario(TrainConfig& cfg, std::string_view name);
void apply_blocks(TrainConfig& cfg, std::string_view blocks);

// `key = value` lines; `#` starts a comment. Errors carry the line number.
void apply_config_text(TrainConfig& cfg, std::istream& in);
void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path);
std::string to_config_text(const TrainConfig& cfg);
std::vector<std::string> config_keys();

std::shared_ptr<const roadnet::RoadNetwork> build_scene(const TrainConfig& cfg);
sim::EpisodeConfig episode_config(const TrainConfig& cfg, std::shared_ptr<const roadnet::RoadNetwork> scene,
                                  std::uint64_t seed);

// Linear from epsilon_start to epsilon_end over the first epsilon_fraction of
// max_epoch, then constant.
double epsilon_schedule(const TrainConfig& cfg, std::size_t epoch);

}  // namespace mvp::trainer
