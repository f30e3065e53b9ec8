#pragma once

// Epoch loop: prioritized per-agent training rounds, episode rollout with
// per-step cognition, buffer storage, reward ledger and PN update, plus
// checkpointing of the full training state.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mvp/agent.hpp"
#include "mvp/cognition.hpp"
#include "mvp/config.hpp"
#include "mvp/nn.hpp"
#include "mvp/prioritizer.hpp"
#include "mvp/replay.hpp"
#include "mvp/sim.hpp"

namespace mvp::trainer {

struct EpochReport {
  std::uint64_t epoch = 0;
  bool trained = false;
  bool pn_updated = false;
  double beta = 0.0;
  double epsilon = 0.0;
  std::vector<double> rewards;          // per agent, per-step average over the rollout
  std::vector<double> episode_rewards;  // per agent, rollout total
  // Test episodes run greedily on a held-out seed set that is the same in
  // every epoch; per-agent values are averaged over those episodes.
  std::vector<double> test_rewards;          // per agent, per-step average
  std::vector<double> test_episode_rewards;  // per agent, episode total
  std::vector<double> delta_r;
  std::optional<double> pn_loss;
  std::size_t episode_length = 0;
  std::size_t captures = 0;
  bool done = false;
  double test_length = 0.0;    // mean over test episodes
  std::size_t test_captures = 0;  // summed over test episodes
  double test_success = 0.0;    // fraction of test episodes with every evader captured

  // Mean over agents of the test episode total reward.
  double test_reward_mean() const;

  friend bool operator==(const EpochReport&, const EpochReport&) = default;
};

std::string to_json_line(const EpochReport& r);

struct AuditRow {
  std::uint64_t epoch = 0;
  std::uint32_t agent = 0;
  std::uint64_t entry_id = 0;
  double gain = 0.0;
  double q = 0.0;
  double p = 0.0;
  double omega = 0.0;
  bool sampled = false;
};

std::string audit_header();
std::string audit_line(const AuditRow& row);

// Per-step record for episode traces.
struct StepTrace {
  std::size_t t = 0;
  const sim::WorldState* world = nullptr;  // state after the step
  const sim::StepEvents* events = nullptr;
  const cognition::GroupAttention* attention = nullptr;  // used to choose this step's actions
  std::vector<std::uint32_t> targets;
  std::vector<roadnet::Turn> actions;
  std::vector<double> rewards;
};

std::string trace_line(const StepTrace& s);

// Chooses a pursuer action in place of the Q-network.
using ActionOverride = std::function<roadnet::Turn(const sim::WorldState&, std::size_t pursuer)>;

struct EpisodeOptions {
  std::uint64_t env_seed = 0;
  double epsilon = 0.0;
  std::uint64_t explore_seed = 0;
  bool record_snapshots = false;
  bool nearest_targets = false;  // forced on by the no-cognition ablation
  ActionOverride override_action;
  std::function<void(const StepTrace&)> trace;
  std::uint64_t epoch = 0;  // stored in the records
};

struct EpisodeResult {
  std::vector<replay::EpisodeRecord> records;  // one per agent
  std::size_t length = 0;
  std::size_t captures = 0;
  bool success = false;  // every evader captured
  std::vector<double> total_rewards;
  std::vector<double> step_rewards;  // total / length
};

// Nearest live evader per pursuer by directed network distance, lowest index on ties.
std::vector<std::uint32_t> nearest_targets(const sim::WorldState& world);

class Trainer {
 public:
  explicit Trainer(TrainConfig cfg);
  // Uses `scene` in place of the map or grid named by the config.
  Trainer(TrainConfig cfg, std::shared_ptr<const roadnet::RoadNetwork> scene);

  const TrainConfig& config() const { return cfg_; }
  const roadnet::RoadNetwork& network() const { return *scene_; }
  std::shared_ptr<const roadnet::RoadNetwork> scene() const { return scene_; }
  std::size_t epoch() const { return epoch_; }
  const std::vector<agent::AgentNets>& agents() const { return agents_; }
  std::vector<agent::AgentNets>& agents() { return agents_; }
  const nn::ParamSet& cognition_params() const { return cog_params_; }
  nn::ParamSet& cognition_params() { return cog_params_; }
  const nn::ParamSet& pn_params() const { return pn_params_; }
  const replay::GlobalBuffer& buffer() const { return buffer_; }
  replay::GlobalBuffer& buffer() { return buffer_; }
  const prioritizer::RewardLedger& ledger() const { return ledger_; }
  const agent::QNetwork& qnet() const { return qnet_; }
  const cognition::CognitionNet& cognition() const { return cog_; }
  const prioritizer::PriorityNet& pn() const { return pn_; }

  void set_audit(std::function<void(const AuditRow&)> sink) { audit_ = std::move(sink); }

  EpochReport run_epoch();
  EpisodeResult run_episode(const EpisodeOptions& opts) const;

  // Per agent, the PN inputs of its sampled entries (empty when prioritization is off).
  std::vector<std::vector<prioritizer::PnInput>> train_round(std::uint64_t epoch, double beta);

  void save_checkpoint(const std::filesystem::path& path) const;
  static Trainer load_checkpoint(const std::filesystem::path& path);

 private:
  struct View;
  View observe(const sim::WorldState& world, std::span<const double> conv, bool nearest) const;
  std::vector<double> rebuild_state(const replay::CognitionSnapshot& snap, std::uint32_t agent,
                                    cognition::FeatureCache* fcache, cognition::AttentionCache* acache) const;
  void replay_entry(std::size_t n, const replay::EpisodeRecord& entry, double omega);
  void replay_entry_cotrain(std::size_t n, const replay::EpisodeRecord& entry, double omega);

  TrainConfig cfg_;
  std::shared_ptr<const roadnet::RoadNetwork> scene_;
  std::vector<double> rt_;
  cognition::CognitionNet cog_;
  agent::QNetwork qnet_;
  prioritizer::PriorityNet pn_;
  nn::ParamSet cog_params_;
  nn::ParamSet pn_params_;
  std::vector<agent::AgentNets> agents_;
  replay::GlobalBuffer buffer_;
  prioritizer::RewardLedger ledger_;
  std::size_t epoch_ = 0;
  std::function<void(const AuditRow&)> audit_;
};

}  // namespace mvp::trainer
