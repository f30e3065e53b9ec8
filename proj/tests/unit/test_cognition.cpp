#include <cmath>
#include <numeric>

#include "doctest.h"
#include "mvp/cognition.hpp"
#include "mvp/roadnet.hpp"

using namespace mvp;
using namespace mvp::cognition;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

std::vector<double> random_vec(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, lo, hi);
  return v;
}

CognitionSpec small_spec(std::size_t lanes, std::size_t evaders, std::size_t heads = 2) {
  CognitionSpec s;
  s.lanes = lanes;
  s.evaders = evaders;
  s.f_dim = 5;
  s.heads = heads;
  s.d_k = 3;
  s.conv_channels = 2;
  s.conv_kernel = 3;
  s.conv_stride = 2;
  return s;
}

struct AttentionInputs {
  std::vector<double> pe, ee, f;
};

AttentionInputs random_inputs(Rng& rng, const CognitionNet& net, std::size_t n) {
  const std::size_t e = net.embed_width();
  return {random_vec(rng, n * e, 0, 1), random_vec(rng, net.spec().evaders * e, 0, 1),
          random_vec(rng, net.spec().f_dim)};
}

}  // namespace

TEST_CASE("location embedding examples") {
  const roadnet::RoadNetwork pair({{0, 0, 0}, {1, 10, 0}}, {{0, 0, 1, 10.0}, {1, 1, 0, 10.0}});
  CHECK(location_embedding(pair, {0, 0.0}) == std::vector<double>{0.0, 0.0});
  const auto grid = roadnet::generate_grid(3, 3, 500.0);
  CHECK(location_embedding(grid, {5, 250.0}) == std::vector<double>{0, 0, 0, 1, 0, 1, 0.5});
  CHECK(embedding_width(48) == 7);
  for (roadnet::LaneId a = 0; a < 48; ++a)
    for (roadnet::LaneId b = a + 1; b < 48; ++b)
      CHECK(location_embedding(grid, {a, 100.0}) != location_embedding(grid, {b, 100.0}));
}

TEST_CASE("uniform logits give uniform group attention and target 0") {
  auto spec = small_spec(8, 4, 1);
  CognitionNet net(spec);
  Rng rng(1);
  auto p = net.init(rng);
  p.at("attention.query").values.assign(p.at("attention.query").size(), 0.0);
  p.at("attention.key").values.assign(p.at("attention.key").size(), 0.0);
  auto& wo = p.at("attention.out.weight").values;
  std::fill(wo.begin(), wo.end(), 0.0);
  for (std::size_t m = 0; m < 4; ++m) wo[m * 4 + m] = 1.0;
  p.at("attention.out.bias").values.assign(4, 0.0);
  const auto in = random_inputs(rng, net, 3);
  const auto g = net.group_attention(p, in.pe, in.ee, in.f, std::vector<bool>(4, false));
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t m = 0; m < 4; ++m) CHECK(g.at(n, m) == 0.25);
    CHECK(g.targets[n] == 0);
  }
}

TEST_CASE("single evader: every pursuer targets it") {
  CognitionNet net(small_spec(8, 1, 3));
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = net.init(rng);
    const auto in = random_inputs(rng, net, 4);
    const auto g = net.group_attention(p, in.pe, in.ee, in.f, {false});
    CHECK(g.w_g.size() == 4);
    for (auto t : g.targets) CHECK(t == 0);
  }
}

TEST_CASE("two heads against a scalar hand computation") {
  // Two lanes (embedding width 2), f_dim 1, so query/key rows are 3 wide; d_k = 1.
  CognitionSpec spec;
  spec.lanes = 2;
  spec.evaders = 2;
  spec.f_dim = 1;
  spec.heads = 2;
  spec.d_k = 1;
  spec.conv_channels = 1;
  spec.conv_kernel = 1;
  spec.conv_stride = 1;
  CognitionNet net(spec);
  Rng rng(3);
  auto p = net.init(rng);
  // query[head][0][col], key[head][0][col]
  p.at("attention.query").values = {0.1, 0.2, 0.3, -0.2, 0.1, 0.4};
  p.at("attention.key").values = {0.5, -0.1, 0.2, 0.3, 0.3, -0.3};
  p.at("attention.out.weight").values = {0.6, 0.1, 0.2, 0.3, -0.1, 0.5, 0.4, 0.2};
  p.at("attention.out.bias").values = {0.01, -0.02};
  const std::vector<double> pe{1, 0.5, 0, 0.25};  // pursuer rows [bit, offset]
  const std::vector<double> ee{0, 0.75, 1, 1.0};
  const std::vector<double> f{2.0};
  const auto g = net.group_attention(p, pe, ee, f, {false, false});

  const double qw[2][3] = {{0.1, 0.2, 0.3}, {-0.2, 0.1, 0.4}};
  const double kw[2][3] = {{0.5, -0.1, 0.2}, {0.3, 0.3, -0.3}};
  const double prow[2][3] = {{1, 0.5, 2}, {0, 0.25, 2}};
  const double erow[2][3] = {{0, 0.75, 2}, {1, 1.0, 2}};
  const double wo[2][4] = {{0.6, 0.1, 0.2, 0.3}, {-0.1, 0.5, 0.4, 0.2}};
  const double bo[2] = {0.01, -0.02};
  for (int n = 0; n < 2; ++n) {
    double heads[4];
    for (int h = 0; h < 2; ++h) {
      double q = qw[h][0] * prow[n][0] + qw[h][1] * prow[n][1] + qw[h][2] * prow[n][2];
      double k0 = kw[h][0] * erow[0][0] + kw[h][1] * erow[0][1] + kw[h][2] * erow[0][2];
      double k1 = kw[h][0] * erow[1][0] + kw[h][1] * erow[1][1] + kw[h][2] * erow[1][2];
      const double a0 = std::exp(q * k0), a1 = std::exp(q * k1);
      heads[2 * h] = a0 / (a0 + a1);
      heads[2 * h + 1] = a1 / (a0 + a1);
    }
    for (int m = 0; m < 2; ++m) {
      double v = bo[m];
      for (int j = 0; j < 4; ++j) v += wo[m][j] * heads[j];
      CHECK(g.at(n, m) == doctest::Approx(v).epsilon(1e-12));
    }
    CHECK(g.targets[n] == (g.at(n, 1) > g.at(n, 0) ? 1u : 0u));
  }
}

TEST_CASE("head rows are distributions and captured columns are masked") {
  CognitionNet net(small_spec(16, 4, 3));
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = net.init(rng);
    const auto in = random_inputs(rng, net, 5);
    std::vector<bool> captured(4);
    for (std::size_t m = 0; m < 4; ++m) captured[m] = uniform01(rng) < 0.4;
    if (std::all_of(captured.begin(), captured.end(), [](bool c) { return c; })) captured[2] = false;
    AttentionCache cache;
    const auto g = net.group_attention(p, in.pe, in.ee, in.f, captured, &cache);
    for (std::size_t h = 0; h < 3; ++h)
      for (std::size_t n = 0; n < 5; ++n) {
        double s = 0.0;
        for (std::size_t m = 0; m < 4; ++m) {
          const double v = cache.heads[(h * 5 + n) * 4 + m];
          if (captured[m]) CHECK(v == 0.0);
          else CHECK(v > 0.0);
          s += v;
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
      }
    for (std::size_t n = 0; n < 5; ++n) {
      CHECK_FALSE(captured[g.targets[n]]);
      for (std::size_t m = 0; m < 4; ++m)
        if (captured[m]) CHECK(g.at(n, m) == 0.0);
    }
    // Groups partition the pursuers by target.
    std::vector<int> seen(5, 0);
    for (std::size_t m = 0; m < 4; ++m)
      for (auto n : g.groups[m]) {
        CHECK(g.targets[n] == m);
        ++seen[n];
      }
    for (int s : seen) CHECK(s == 1);
  }
  const auto p = net.init(rng);
  const auto in = random_inputs(rng, net, 2);
  CHECK_THROWS_AS(net.group_attention(p, in.pe, in.ee, in.f, std::vector<bool>(4, true)), std::invalid_argument);
}

TEST_CASE("argmax target is invariant to positive row scaling") {
  Rng rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto row = random_vec(rng, 5, -2, 2);
    std::vector<bool> captured(5);
    for (std::size_t m = 0; m < 5; ++m) captured[m] = uniform01(rng) < 0.3;
    captured[trial % 5] = false;
    const double c = std::exp(uniform(rng, -5, 5));
    auto scaled = row;
    for (double& v : scaled) v *= c;
    CHECK(masked_argmax(scaled, captured) == masked_argmax(row, captured));
  }
  CHECK(masked_argmax(std::vector<double>{1, 3, 3}, {false, false, false}) == 1);
  CHECK(masked_argmax(std::vector<double>{1, 3, 3}, {false, true, false}) == 2);
  CHECK_THROWS_AS(masked_argmax(std::vector<double>{1}, {true}), std::invalid_argument);
}

TEST_CASE("traffic feature examples") {
  const auto grid = roadnet::generate_grid(2, 2, 100.0);
  const auto adj = roadnet::adjacency_matrix(grid);
  const std::vector<double> rt(adj.begin(), adj.end());
  CognitionNet net(small_spec(grid.lane_count(), 2));
  Rng rng(7);
  auto p = net.init(rng);
  std::vector<double> bv(grid.lane_count(), 0.0);
  bv[3] = 2.0;
  const auto f1 = net.traffic_feature(p, rt, bv);
  CHECK(f1 == net.traffic_feature(p, rt, bv));
  CHECK(f1 == net.feature_from_conv(p, net.conv_features(p, rt), bv));
  auto bv2 = bv;
  bv2[7] += 1.0;
  CHECK(net.traffic_feature(p, rt, bv2) != f1);
  for (const char* name : {"feature.conv.weight", "feature.conv.bias", "feature.dense0.weight", "feature.dense0.bias"})
    p.at(name).values.assign(p.at(name).size(), 0.0);
  const auto zero = net.traffic_feature(p, rt, bv);
  CHECK(std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; }));
  CHECK_THROWS(net.traffic_feature(p, rt, std::vector<double>(3, 0.0)));
}

TEST_CASE("feature extractor gradients match central differences") {
  const auto grid = roadnet::generate_grid(1, 2, 100.0);
  const auto adj = roadnet::adjacency_matrix(grid);
  const std::vector<double> rt(adj.begin(), adj.end());
  CognitionNet net(small_spec(grid.lane_count(), 2));
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = net.init(rng);
    const auto bv = random_vec(rng, grid.lane_count(), 0, 4);
    const auto c = random_vec(rng, net.spec().f_dim);
    FeatureCache cache;
    net.traffic_feature(p, rt, bv, &cache);
    auto grads = p.zeros_like();
    net.feature_backward(p, cache, c, grads);
    auto loss = [&] {
      const auto f = net.traffic_feature(p, rt, bv);
      return std::inner_product(f.begin(), f.end(), c.begin(), 0.0);
    };
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p.name(t).rfind("feature.", 0) != 0) continue;
      for (std::size_t i = 0; i < p[t].size(); ++i) {
        const double keep = p[t].values[i];
        p[t].values[i] = keep + 1e-4;
        const double up = loss();
        p[t].values[i] = keep - 1e-4;
        const double down = loss();
        p[t].values[i] = keep;
        CHECK_MESSAGE(rel_err((up - down) / 2e-4, grads[t].values[i]) < 1e-4, p.name(t), "[", i, "]");
      }
    }
  }
}

TEST_CASE("attention gradients match central differences") {
  CognitionNet net(small_spec(8, 3, 2));
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = net.init(rng);
    const auto in = random_inputs(rng, net, 3);
    std::vector<bool> captured{false, trial % 3 == 0, false};
    const auto c = random_vec(rng, 9);
    AttentionCache cache;
    net.group_attention(p, in.pe, in.ee, in.f, captured, &cache);
    auto grads = p.zeros_like();
    std::vector<double> f_grad;
    net.attention_backward(p, cache, c, grads, &f_grad);
    auto loss = [&](const std::vector<double>& f) {
      const auto g = net.group_attention(p, in.pe, in.ee, f, captured);
      return std::inner_product(g.w_g.begin(), g.w_g.end(), c.begin(), 0.0);
    };
    for (std::size_t t = 0; t < p.size(); ++t) {
      if (p.name(t).rfind("attention.", 0) != 0) continue;
      for (std::size_t i = 0; i < p[t].size(); ++i) {
        const double keep = p[t].values[i];
        p[t].values[i] = keep + 1e-4;
        const double up = loss(in.f);
        p[t].values[i] = keep - 1e-4;
        const double down = loss(in.f);
        p[t].values[i] = keep;
        CHECK_MESSAGE(rel_err((up - down) / 2e-4, grads[t].values[i]) < 1e-4, p.name(t), "[", i, "]");
      }
    }
    for (std::size_t i = 0; i < in.f.size(); ++i) {
      auto fp = in.f, fm = in.f;
      fp[i] += 1e-4;
      fm[i] -= 1e-4;
      CHECK(rel_err((loss(fp) - loss(fm)) / 2e-4, f_grad[i]) < 1e-4);
    }
  }
}
