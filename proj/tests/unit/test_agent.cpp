#include <array>
#include <cmath>

#include "doctest.h"
#include "mvp/agent.hpp"
#include "mvp/roadnet.hpp"

using namespace mvp;
using namespace mvp::agent;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

// 2 inputs, one hidden ReLU unit, 3 outputs.
AgentNets toy_nets(const QNetwork& net) {
  Rng rng(1);
  auto nets = net.init(rng);
  nets.online.at("dense0.weight").values = {0.5, -0.25};
  nets.online.at("dense0.bias").values = {0.1};
  nets.online.at("dense1.weight").values = {1.0, -2.0, 0.5};
  nets.online.at("dense1.bias").values = {0.0, 0.3, -0.1};
  nets.target = nets.online;
  nets.target.at("dense1.bias").values = {0.2, 0.0, 0.0};
  return nets;
}

}  // namespace

TEST_CASE("state assembly") {
  const auto grid = roadnet::generate_grid(3, 3, 500.0);
  CHECK(state_width(48, 32, 3) == 2 * 7 + 32 + 3);
  const std::vector<double> f{0.5, -1.0};
  const std::vector<double> wg{0.2, 0.8};
  const auto s = assemble_state(grid, {5, 250.0}, {0, 0.0}, f, wg);
  CHECK(s == std::vector<double>{0, 0, 0, 1, 0, 1, 0.5, 0, 0, 0, 0, 0, 0, 0, 0.5, -1.0, 0.2, 0.8});
}

TEST_CASE("q values") {
  QNetwork net(4, {5});
  Rng rng(2);
  auto nets = net.init(rng);
  CHECK(nets.online == nets.target);
  for (std::size_t t = 0; t < nets.online.size(); ++t) nets.online[t].values.assign(nets.online[t].size(), 0.0);
  nets.online.at("dense1.bias").values = {0.7, 0.7, 0.7};
  CHECK(net.q_values(nets.online, std::vector<double>{1, 2, 3, 4}) == std::vector<double>{0.7, 0.7, 0.7});

  QNetwork toy(2, {1});
  const auto t = toy_nets(toy);
  // hidden = relu(0.5*2 - 0.25*1 + 0.1) = 0.85
  const auto q = toy.q_values(t.online, std::vector<double>{2.0, 1.0});
  CHECK(q[0] == doctest::Approx(0.85).epsilon(1e-15));
  CHECK(q[1] == doctest::Approx(-1.7 + 0.3).epsilon(1e-15));
  CHECK(q[2] == doctest::Approx(0.425 - 0.1).epsilon(1e-15));
  CHECK(q == toy.q_values(t.online, std::vector<double>{2.0, 1.0}));
  CHECK_THROWS(toy.q_values(t.online, std::vector<double>{1.0}));
}

TEST_CASE("action selection") {
  const std::vector<Turn> all{Turn::Left, Turn::Right, Turn::Straight};
  Rng rng(3);
  CHECK(select_action(std::vector<double>{1, 5, 2}, all, 0.0, rng) == Turn::Right);
  CHECK(select_action(std::vector<double>{9, 5, 2}, std::vector<Turn>{Turn::Right, Turn::Straight}, 0.0, rng) ==
        Turn::Right);
  CHECK(greedy_action(std::vector<double>{4, 4, 1}, all) == Turn::Left);
  CHECK_THROWS_AS(select_action(std::vector<double>{1, 2, 3}, std::vector<Turn>{}, 0.0, rng), std::invalid_argument);

  std::array<int, 3> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[static_cast<int>(select_action(std::vector<double>{0, 9, 0}, all, 1.0, rng))];
  for (int c : counts) CHECK(std::abs(c / double(draws) - 1.0 / 3.0) < 0.01);

  for (int i = 0; i < 1000; ++i) {
    const auto q = random_vec(rng, 3, -5, 5);
    const std::vector<Turn> some{static_cast<Turn>(i % 3), static_cast<Turn>((i + 1) % 3)};
    const Turn a = select_action(q, some, 0.0, rng);
    CHECK((a == some[0] || a == some[1]));
  }
}

TEST_CASE("reward") {
  CHECK(compute_reward(true, 50.0, 60.0) == 400.0);
  CHECK(compute_reward(false, 98.0, 100.0) == doctest::Approx(9.98).epsilon(1e-15));
  CHECK(compute_reward(false, 70.0, 70.0) == -0.02);
  CHECK(compute_reward(false, 100.0, 98.0) == doctest::Approx(-10.02).epsilon(1e-15));
  RewardParams clipped;
  clipped.max_closing = 40.0;
  CHECK(compute_reward(false, 0.0, 100.0, clipped) == doctest::Approx(-0.02 + 200.0).epsilon(1e-15));
}

TEST_CASE("td error on a hand-set net") {
  QNetwork toy(2, {1});
  const auto nets = toy_nets(toy);
  Transition tr;
  tr.state = {2.0, 1.0};
  tr.action = Turn::Right;
  tr.reward = 1.5;
  tr.next_state = {0.0, 0.4};
  // next hidden = relu(-0.1 + 0.1) = 0 -> target Q' = bias = [0.2, 0, 0]; max = 0.2
  const double q_sa = -1.7 + 0.3;
  const auto res = td_gradient(toy, nets, tr, 1.0, 0.9);
  CHECK(res.q == doctest::Approx(q_sa).epsilon(1e-15));
  CHECK(res.target == doctest::Approx(1.5 + 0.9 * 0.2).epsilon(1e-15));
  CHECK(res.delta == doctest::Approx(1.5 + 0.18 - q_sa).epsilon(1e-15));
  tr.terminal = true;
  CHECK(td_gradient(toy, nets, tr, 1.0, 0.9).target == 1.5);
}

TEST_CASE("zero everything gives zero td error and gradient") {
  QNetwork net(3, {4});
  Rng rng(4);
  auto nets = net.init(rng);
  for (auto* ps : {&nets.online, &nets.target})
    for (std::size_t t = 0; t < ps->size(); ++t) (*ps)[t].values.assign((*ps)[t].size(), 0.0);
  Transition tr{{0.1, 0.2, 0.3}, Turn::Left, 0.0, {0.3, 0.2, 0.1}, false};
  const auto res = td_gradient(net, nets, tr, 1.0, 0.9);
  CHECK(res.delta == 0.0);
  for (std::size_t t = 0; t < res.grads.size(); ++t)
    for (double g : res.grads[t].values) CHECK(g == 0.0);
}

TEST_CASE("importance weight algebra") {
  QNetwork net(6, {8, 8});
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto nets = net.init(rng);
    Rng other(100 + trial);
    nets.target = net.init(other).online;
    Transition tr{random_vec(rng, 6), static_cast<Turn>(trial % 3), uniform(rng, -5, 5), random_vec(rng, 6),
                  trial % 4 == 0};

    // Unweighted update from an independent computation of delta.
    const auto q_next = net.q_values(nets.target, tr.next_state);
    nn::MlpCache cache;
    const auto q = net.q_values(nets.online, tr.state, &cache);
    const double y = tr.terminal ? tr.reward : tr.reward + 0.9 * *std::max_element(q_next.begin(), q_next.end());
    const double delta = y - q[static_cast<std::size_t>(tr.action)];
    std::vector<double> out_grad(3, 0.0);
    out_grad[static_cast<std::size_t>(tr.action)] = -delta;
    auto plain = nets.online.zeros_like();
    net.mlp().backward(nets.online, cache, out_grad, plain);

    const auto full = td_gradient(net, nets, tr, 1.0, 0.9);
    CHECK(full.delta == delta);
    auto updated_a = nets.online, updated_b = nets.online;
    nn::sgd_step(updated_a, full.grads, 1e-4);
    nn::sgd_step(updated_b, plain, 1e-4);
    CHECK(updated_a == updated_b);

    const auto half = td_gradient(net, nets, tr, 0.5, 0.9);
    for (std::size_t t = 0; t < full.grads.size(); ++t)
      for (std::size_t i = 0; i < full.grads[t].size(); ++i)
        CHECK(std::abs(half.grads[t].values[i] - 0.5 * full.grads[t].values[i]) <= 1e-12);
  }
}

TEST_CASE("soft update") {
  AgentNets nets;
  nets.online.add("w", nn::Tensor::from({3}, {1.0, 1.0, -2.0}));
  nets.target.add("w", nn::Tensor::from({3}, {0.0, 1.0, 4.0}));
  const auto online = nets.online;
  soft_update(nets, 0.001);
  CHECK(nets.target.at("w").values[0] == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(nets.target.at("w").values[1] == 1.0);
  CHECK(nets.online == online);
  for (std::size_t i = 0; i < 3; ++i) {
    const double lo = std::min(online.at("w").values[i], 0.0 + (i == 2 ? 4.0 : 0.0));
    (void)lo;
  }
  CHECK(nets.target.at("w").values[2] <= 4.0);
  CHECK(nets.target.at("w").values[2] >= -2.0);
  soft_update(nets, 1.0);
  CHECK(nets.target == nets.online);
  CHECK_THROWS(soft_update(nets, 0.0));
  CHECK_THROWS(soft_update(nets, 1.5));
}

TEST_CASE("soft update stays between online and target") {
  QNetwork net(5, {6});
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto nets = net.init(rng);
    Rng other(trial);
    nets.target = net.init(other).online;
    const auto before = nets;
    soft_update(nets, uniform(rng, 0.0001, 1.0));
    for (std::size_t t = 0; t < nets.target.size(); ++t)
      for (std::size_t i = 0; i < nets.target[t].size(); ++i) {
        const double a = before.online[t].values[i], b = before.target[t].values[i];
        CHECK(nets.target[t].values[i] >= std::min(a, b));
        CHECK(nets.target[t].values[i] <= std::max(a, b));
      }
  }
}
