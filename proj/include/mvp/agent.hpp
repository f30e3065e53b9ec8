#pragma once

// Per-pursuer DQN: state assembly, Q-values, epsilon-greedy selection, shaped
// reward, importance-weighted TD gradient and soft target update.

#include <cstddef>
#include <span>
#include <vector>

#include "mvp/nn.hpp"
#include "mvp/rng.hpp"
#include "mvp/roadnet.hpp"

namespace mvp::agent {

using roadnet::Turn;

inline constexpr std::size_t kActionCount = roadnet::kTurnCount;

// 2 * embedding + f_dim + evaders.
std::size_t state_width(std::size_t lane_count, std::size_t f_dim, std::size_t evaders);

// concat(emb(own), emb(target), F, W_g row)
std::vector<double> assemble_state(const roadnet::RoadNetwork& net, const roadnet::Location& own,
                                   const roadnet::Location& target, std::span<const double> f,
                                   std::span<const double> wg_row);

struct AgentNets {
  nn::ParamSet online;
  nn::ParamSet target;

  friend bool operator==(const AgentNets&, const AgentNets&) = default;
};

class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(std::size_t state_width, std::vector<std::size_t> hidden = {128, 128});

  const nn::Mlp& mlp() const { return mlp_; }
  std::size_t state_width() const { return mlp_.input_width(); }

  // Target starts as a copy of online.
  AgentNets init(Rng& rng) const;
  std::vector<double> q_values(const nn::ParamSet& params, std::span<const double> state,
                               nn::MlpCache* cache = nullptr) const;
  // rows x kActionCount
  std::vector<double> q_values_batch(const nn::ParamSet& params, std::span<const double> states,
                                     std::size_t rows) const;

 private:
  nn::Mlp mlp_;
};

// With probability epsilon a uniform feasible action, else the feasible argmax
// (lowest index on ties). Throws std::invalid_argument for an empty set.
Turn select_action(std::span<const double> q, std::span<const Turn> feasible, double epsilon, Rng& rng);
Turn greedy_action(std::span<const double> q, std::span<const Turn> feasible);

struct RewardParams {
  double capture_reward = 400.0;  // V
  double step_penalty = 0.02;     // c
  double distance_scale = 5.0;    // sigma
  // Bound on |d_prev - d_t| per step: two vehicles at v_max for dt.
  double max_closing = 0.0;  // 0 disables clipping
};

// V on capture, else -c + sigma * (d_prev - d_t), the difference clamped to
// +-max_closing when that is positive.
double compute_reward(bool captured_by_group, double d_t, double d_prev, const RewardParams& params = {});

struct Transition {
  std::vector<double> state;
  Turn action = Turn::Straight;
  double reward = 0.0;
  std::vector<double> next_state;
  bool terminal = false;
};

struct TdResult {
  nn::ParamSet grads;  // gradient of 0.5 * omega * delta^2 w.r.t. online params
  double delta = 0.0;
  double q = 0.0;
  double target = 0.0;
};

double td_target(const QNetwork& net, const AgentNets& nets, const Transition& tr, double gamma);

// The learning rate is not applied here; pass the result to nn::sgd_step.
// `state_grad`, when given, receives d(0.5 * omega * delta^2)/d(state).
TdResult td_gradient(const QNetwork& net, const AgentNets& nets, const Transition& tr, double omega,
                     double gamma, std::vector<double>* state_grad = nullptr);

// target <- target + tau * (online - target)
void soft_update(AgentNets& nets, double tau);

}  // namespace mvp::agent
