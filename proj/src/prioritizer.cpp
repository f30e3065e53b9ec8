#include "mvp/prioritizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvp::prioritizer {

EpisodeStats episode_statistics(const replay::EpisodeRecord& episode, const agent::QNetwork& qnet,
                                const agent::AgentNets& nets, double gamma) {
  EpisodeStats s;
  const std::size_t t_count = episode.length();
  if (t_count == 0) return s;
  const double n = static_cast<double>(t_count);
  s.length = n;
  for (const auto& tr : episode.transitions) s.total_reward += tr.reward;
  s.mean_reward = s.total_reward / n;
  double var = 0.0;
  for (const auto& tr : episode.transitions) var += (tr.reward - s.mean_reward) * (tr.reward - s.mean_reward);
  s.std_reward = std::sqrt(var / n);
  s.captures = static_cast<double>(episode.capture_count());
  double dist = 0.0;
  for (double d : episode.distances) dist += d;
  s.mean_distance = episode.distances.empty() ? 0.0 : dist / static_cast<double>(episode.distances.size());

  const std::size_t w = qnet.state_width();
  std::vector<double> states(t_count * w), next(t_count * w);
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto& tr = episode.transitions[t];
    if (tr.state.size() != w || tr.next_state.size() != w)
      throw std::invalid_argument("episode state width does not match the agent network");
    std::copy(tr.state.begin(), tr.state.end(), states.begin() + t * w);
    std::copy(tr.next_state.begin(), tr.next_state.end(), next.begin() + t * w);
  }
  const auto q = qnet.q_values_batch(nets.online, states, t_count);
  const auto qn = qnet.q_values_batch(nets.target, next, t_count);
  constexpr std::size_t a_count = agent::kActionCount;
  double abs_delta = 0.0;
  for (std::size_t t = 0; t < t_count; ++t) {
    const auto& tr = episode.transitions[t];
    double target = tr.reward;
    if (!tr.terminal) target += gamma * *std::max_element(qn.begin() + t * a_count, qn.begin() + (t + 1) * a_count);
    abs_delta += std::abs(target - q[t * a_count + static_cast<std::size_t>(tr.action)]);
  }
  s.mean_abs_delta = abs_delta / n;
  return s;
}

std::vector<double> param_signature(const nn::ParamSet& params) {
  std::vector<double> out;
  out.reserve(2 * params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& v = params[i].values;
    const double n = static_cast<double>(std::max<std::size_t>(v.size(), 1));
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    out.push_back(mean);
    out.push_back(std::sqrt(var / n));
  }
  return out;
}

double signed_log1p(double x) { return x < 0.0 ? -std::log1p(-x) : std::log1p(x); }

std::size_t pn_input_width(std::size_t agent_tensor_count) { return kEpisodeFeatureCount + 2 * agent_tensor_count; }

PnInput featurize(const EpisodeStats& s, std::span<const double> signature) {
  PnInput in;
  in.values = {s.length, s.total_reward, s.mean_reward, s.std_reward, s.captures, s.mean_distance, s.mean_abs_delta};
  for (double& v : in.values) v = signed_log1p(v);
  in.values.insert(in.values.end(), signature.begin(), signature.end());
  return in;
}

PnInput featurize(const replay::EpisodeRecord& episode, const agent::QNetwork& qnet,
                  const agent::AgentNets& nets, double gamma) {
  return featurize(episode_statistics(episode, qnet, nets, gamma), param_signature(nets.online));
}

PriorityNet::PriorityNet(std::size_t input_width, std::vector<std::size_t> hidden) {
  std::vector<std::size_t> widths{input_width};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  mlp_ = nn::Mlp(std::move(widths));
}

nn::ParamSet PriorityNet::init(Rng& rng) const { return mlp_.init(rng); }

double PriorityNet::predict_gain(const nn::ParamSet& params, const PnInput& input) const {
  return mlp_.forward(params, input.values).front();
}

std::vector<double> PriorityNet::predict_batch(const nn::ParamSet& params, std::span<const PnInput> inputs) const {
  if (inputs.empty()) return {};
  const std::size_t w = input_width();
  std::vector<double> x(inputs.size() * w);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (inputs[i].values.size() != w) throw std::invalid_argument("PN input width mismatch");
    std::copy(inputs[i].values.begin(), inputs[i].values.end(), x.begin() + i * w);
  }
  return mlp_.forward_batch(params, x, inputs.size());
}

double PriorityNet::loss(const nn::ParamSet& params, std::span<const PnInput> inputs,
                         std::span<const double> realized) const {
  if (inputs.size() != realized.size() || inputs.empty())
    throw std::invalid_argument("PN loss needs one realized value per input");
  double sum = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double e = predict_gain(params, inputs[i]) - realized[i];
    sum += e * e;
  }
  return sum / static_cast<double>(inputs.size());
}

double PriorityNet::gradient(const nn::ParamSet& params, std::span<const PnInput> inputs,
                             std::span<const double> realized, nn::ParamSet& grads) const {
  if (inputs.size() != realized.size() || inputs.empty())
    throw std::invalid_argument("PN loss needs one realized value per input");
  const double inv = 1.0 / static_cast<double>(inputs.size());
  double sum = 0.0;
  nn::MlpCache cache;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double e = mlp_.forward(params, inputs[i].values, &cache).front() - realized[i];
    sum += e * e;
    const double g = 2.0 * e * inv;
    mlp_.backward(params, cache, std::span<const double>(&g, 1), grads);
  }
  return sum * inv;
}

double PriorityNet::train_step(nn::ParamSet& params, std::span<const PnInput> inputs,
                               std::span<const double> realized, double lr, double max_norm) const {
  nn::ParamSet grads = params.zeros_like();
  const double l = gradient(params, inputs, realized, grads);
  if (max_norm > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < grads.size(); ++i)
      for (double g : grads[i].values) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > max_norm) grads.scale(max_norm / norm);
  }
  nn::sgd_step(params, grads, lr);
  return l;
}

std::vector<double> normalize_priorities(std::span<const double> gains, double zeta) {
  if (gains.empty()) throw std::invalid_argument("no gains to normalize");
  const auto [lo, hi] = std::minmax_element(gains.begin(), gains.end());
  const double mn = *lo, mx = *hi;
  std::vector<double> q(gains.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = mx == mn ? 1.0 + zeta : (gains[i] - mn) / (mx - mn) + zeta;
  return q;
}

std::vector<double> annealed_probabilities(std::span<const double> q, double beta) {
  if (q.empty()) throw std::invalid_argument("no priorities");
  std::vector<double> p(q.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0.0)) throw std::invalid_argument("priorities must be positive");
    p[i] = std::pow(q[i], beta);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> importance_weights(std::span<const double> p, std::size_t size, double lambda) {
  std::vector<double> w(p.size());
  double mx = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw std::invalid_argument("importance weights need positive probabilities");
    w[i] = std::pow(static_cast<double>(size) * p[i], -lambda);
    mx = std::max(mx, w[i]);
  }
  for (double& v : w) v /= mx;
  return w;
}

double beta_schedule(std::size_t epoch, std::size_t total_epochs, double beta0) {
  if (total_epochs == 0) return 1.0;
  const double b = beta0 + (1.0 - beta0) * static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return std::clamp(b, beta0, 1.0);
}

PrioritySet prioritize(std::span<const double> gains, double beta, double zeta, double lambda) {
  PrioritySet s;
  s.gains.assign(gains.begin(), gains.end());
  s.q = normalize_priorities(gains, zeta);
  s.p = annealed_probabilities(s.q, beta);
  s.omega = importance_weights(s.p, s.p.size(), lambda);
  s.beta = beta;
  s.zeta = zeta;
  return s;
}

PrioritySet uniform_priorities(std::size_t size) {
  PrioritySet s;
  s.gains.assign(size, 0.0);
  s.q.assign(size, 1.0);
  s.p.assign(size, 1.0 / static_cast<double>(size));
  s.omega.assign(size, 1.0);
  return s;
}

RewardLedger::RewardLedger(std::size_t agents, std::size_t window) : window_(window), history_(agents) {
  if (window == 0) throw std::invalid_argument("reward window must be positive");
}

double RewardLedger::base(std::size_t agent) const {
  const auto& h = history_.at(agent);
  if (h.empty()) return 0.0;
  const std::size_t n = std::min(window_, h.size());
  double s = 0.0;
  for (std::size_t i = h.size() - n; i < h.size(); ++i) s += h[i];
  return s / static_cast<double>(n);
}

double RewardLedger::reward_change(std::size_t agent, double new_reward) {
  auto& h = history_.at(agent);
  const double change = h.empty() ? 0.0 : new_reward - base(agent);
  h.push_back(new_reward);
  while (h.size() > window_) h.pop_front();
  return change;
}

void RewardLedger::restore(std::size_t agent, std::deque<double> history) { history_.at(agent) = std::move(history); }

}  // namespace mvp::prioritizer
