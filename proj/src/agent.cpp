#include "mvp/agent.hpp"

#include <algorithm>
#include <stdexcept>

#include "mvp/cognition.hpp"
#include "mvp/kernels.hpp"

namespace mvp::agent {

std::size_t state_width(std::size_t lane_count, std::size_t f_dim, std::size_t evaders) {
  return 2 * cognition::embedding_width(lane_count) + f_dim + evaders;
}

std::vector<double> assemble_state(const roadnet::RoadNetwork& net, const roadnet::Location& own,
                                   const roadnet::Location& target, std::span<const double> f,
                                   std::span<const double> wg_row) {
  std::vector<double> s = cognition::location_embedding(net, own);
  const auto t = cognition::location_embedding(net, target);
  s.insert(s.end(), t.begin(), t.end());
  s.insert(s.end(), f.begin(), f.end());
  s.insert(s.end(), wg_row.begin(), wg_row.end());
  return s;
}

QNetwork::QNetwork(std::size_t width, std::vector<std::size_t> hidden) {
  std::vector<std::size_t> widths{width};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(kActionCount);
  mlp_ = nn::Mlp(std::move(widths));
}

AgentNets QNetwork::init(Rng& rng) const {
  AgentNets nets;
  nets.online = mlp_.init(rng);
  nets.target = nets.online;
  return nets;
}

std::vector<double> QNetwork::q_values(const nn::ParamSet& params, std::span<const double> state,
                                       nn::MlpCache* cache) const {
  return mlp_.forward(params, state, cache);
}

std::vector<double> QNetwork::q_values_batch(const nn::ParamSet& params, std::span<const double> states,
                                             std::size_t rows) const {
  return mlp_.forward_batch(params, states, rows);
}

Turn greedy_action(std::span<const double> q, std::span<const Turn> feasible) {
  if (feasible.empty()) throw std::invalid_argument("no feasible action");
  if (q.size() != kActionCount) throw std::invalid_argument("expected one Q-value per action");
  Turn best = feasible.front();
  for (Turn a : feasible) {
    const auto i = static_cast<std::size_t>(a);
    const auto b = static_cast<std::size_t>(best);
    if (q[i] > q[b] || (q[i] == q[b] && i < b)) best = a;
  }
  return best;
}

Turn select_action(std::span<const double> q, std::span<const Turn> feasible, double epsilon, Rng& rng) {
  if (feasible.empty()) throw std::invalid_argument("no feasible action");
  if (epsilon > 0.0 && uniform01(rng) < epsilon) return feasible[uniform_index(rng, feasible.size())];
  return greedy_action(q, feasible);
}

double compute_reward(bool captured_by_group, double d_t, double d_prev, const RewardParams& params) {
  if (captured_by_group) return params.capture_reward;
  double closing = d_prev - d_t;
  if (params.max_closing > 0.0) closing = std::clamp(closing, -params.max_closing, params.max_closing);
  return -params.step_penalty + params.distance_scale * closing;
}

double td_target(const QNetwork& net, const AgentNets& nets, const Transition& tr, double gamma) {
  if (tr.terminal) return tr.reward;
  const auto next = net.q_values(nets.target, tr.next_state);
  return tr.reward + gamma * *std::max_element(next.begin(), next.end());
}

TdResult td_gradient(const QNetwork& net, const AgentNets& nets, const Transition& tr, double omega,
                     double gamma, std::vector<double>* state_grad) {
  TdResult out;
  nn::MlpCache cache;
  const auto q = net.q_values(nets.online, tr.state, &cache);
  const auto a = static_cast<std::size_t>(tr.action);
  if (a >= kActionCount) throw std::invalid_argument("action out of range");
  out.q = q[a];
  out.target = td_target(net, nets, tr, gamma);
  out.delta = out.target - out.q;
  std::vector<double> g(kActionCount, 0.0);
  g[a] = -omega * out.delta;
  out.grads = nets.online.zeros_like();
  net.mlp().backward(nets.online, cache, g, out.grads, state_grad);
  return out;
}

void soft_update(AgentNets& nets, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must be in (0, 1]");
  if (!nets.online.same_layout(nets.target)) throw std::invalid_argument("online and target layouts differ");
  if (tau == 1.0) {
    nets.target = nets.online;
    return;
  }
  const auto& k = kernels::active();
  for (std::size_t i = 0; i < nets.online.size(); ++i)
    k.lerp(tau, nets.online[i].data(), nets.target[i].data(), nets.online[i].size());
}

}  // namespace mvp::agent
