#pragma once

// Prioritization network PN and the priority pipeline: episode features,
// predicted reward gain, min-max normalization, annealed probabilities,
// importance weights, and the realized-reward ledger PN is trained against.

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "mvp/agent.hpp"
#include "mvp/nn.hpp"
#include "mvp/replay.hpp"

namespace mvp::prioritizer {

struct EpisodeStats {
  double length = 0.0;
  double total_reward = 0.0;
  double mean_reward = 0.0;
  double std_reward = 0.0;
  double captures = 0.0;
  double mean_distance = 0.0;
  double mean_abs_delta = 0.0;
};

inline constexpr std::size_t kEpisodeFeatureCount = 7;

// Raw statistics; mean |delta| uses the querying agent's current nets.
EpisodeStats episode_statistics(const replay::EpisodeRecord& episode, const agent::QNetwork& qnet,
                                const agent::AgentNets& nets, double gamma);
// Mean and population std of each tensor, in order.
std::vector<double> param_signature(const nn::ParamSet& params);
double signed_log1p(double x);

std::size_t pn_input_width(std::size_t agent_tensor_count);

struct PnInput {
  std::vector<double> values;
  friend bool operator==(const PnInput&, const PnInput&) = default;
};

// signed_log1p of the episode statistics, then the parameter signature.
PnInput featurize(const EpisodeStats& stats, std::span<const double> signature);
PnInput featurize(const replay::EpisodeRecord& episode, const agent::QNetwork& qnet,
                  const agent::AgentNets& nets, double gamma);

class PriorityNet {
 public:
  PriorityNet() = default;
  PriorityNet(std::size_t input_width, std::vector<std::size_t> hidden = {64, 32});

  const nn::Mlp& mlp() const { return mlp_; }
  std::size_t input_width() const { return mlp_.input_width(); }

  nn::ParamSet init(Rng& rng) const;
  double predict_gain(const nn::ParamSet& params, const PnInput& input) const;
  std::vector<double> predict_batch(const nn::ParamSet& params, std::span<const PnInput> inputs) const;

  // Mean squared error over the pairs, and its gradient.
  double loss(const nn::ParamSet& params, std::span<const PnInput> inputs, std::span<const double> realized) const;
  double gradient(const nn::ParamSet& params, std::span<const PnInput> inputs,
                  std::span<const double> realized, nn::ParamSet& grads) const;
  // One SGD step with the gradient rescaled to L2 norm at most max_norm (0
  // disables rescaling); returns the loss before the step.
  double train_step(nn::ParamSet& params, std::span<const PnInput> inputs, std::span<const double> realized,
                    double lr, double max_norm = 0.0) const;

 private:
  nn::Mlp mlp_;
};

// (g - min) / (max - min) + zeta; all 1 + zeta when the gains are constant.
std::vector<double> normalize_priorities(std::span<const double> gains, double zeta);
// q^beta / sum q^beta
std::vector<double> annealed_probabilities(std::span<const double> q, double beta);
// (size * P)^(-lambda), divided by its maximum.
std::vector<double> importance_weights(std::span<const double> p, std::size_t size, double lambda);
double beta_schedule(std::size_t epoch, std::size_t total_epochs, double beta0);

struct PrioritySet {
  std::vector<double> gains;
  std::vector<double> q;
  std::vector<double> p;
  std::vector<double> omega;
  double beta = 0.0;
  double zeta = 0.0;
};

PrioritySet prioritize(std::span<const double> gains, double beta, double zeta, double lambda);
// Uniform P and unit weights, as used when prioritization is disabled.
PrioritySet uniform_priorities(std::size_t size);

// Per-agent history of per-step average test rewards over a sliding window.
class RewardLedger {
 public:
  RewardLedger() = default;
  RewardLedger(std::size_t agents, std::size_t window);

  std::size_t agents() const { return history_.size(); }
  std::size_t window() const { return window_; }
  const std::deque<double>& history(std::size_t agent) const { return history_.at(agent); }
  // Mean of the most recent min(window, size) entries; 0 when empty.
  double base(std::size_t agent) const;
  // new_reward - base (0 for the first entry); then records new_reward.
  double reward_change(std::size_t agent, double new_reward);
  void restore(std::size_t agent, std::deque<double> history);

 private:
  std::size_t window_ = 5;
  std::vector<std::deque<double>> history_;
};

}  // namespace mvp::prioritizer
