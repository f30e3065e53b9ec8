#include <array>
#include <cmath>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "mvp/replay.hpp"

using namespace mvp;
using roadnet::Turn;
using namespace mvp::replay;

namespace {

EpisodeRecord make_episode(std::size_t length, double reward, std::size_t captures = 0) {
  EpisodeRecord e;
  for (std::size_t t = 0; t < length; ++t) {
    e.transitions.push_back({{0.0, 1.0}, Turn::Straight, reward, {1.0, 0.0}, t + 1 == length});
    e.distances.push_back(10.0);
    e.captures.push_back(t < captures);
  }
  return e;
}

}  // namespace

TEST_CASE("append assigns ids and evicts the oldest") {
  GlobalBuffer buf(4);
  CHECK(buf.empty());
  for (int i = 0; i < 4; ++i) CHECK(buf.append(make_episode(3, i)) == static_cast<std::uint64_t>(i));
  CHECK(buf.full());
  CHECK(buf.append(make_episode(3, 4.0)) == 4);
  CHECK(buf.size() == 4);
  CHECK(buf[0].id == 1);
  CHECK(buf[3].id == 4);
  CHECK(buf[3].transitions[0].reward == 4.0);
  CHECK_THROWS(GlobalBuffer(0));
  buf.clear();
  CHECK(buf.empty());
  CHECK(buf.next_id() == 5);
}

TEST_CASE("episode record summaries") {
  auto e = make_episode(4, 2.5, 1);
  CHECK(e.total_reward() == 10.0);
  CHECK(e.mean_reward() == 2.5);
  CHECK(e.capture_count() == 1);
  CHECK_NOTHROW(e.validate(4));
  CHECK_THROWS_AS(e.validate(3), std::invalid_argument);
  auto bad = e;
  bad.distances.pop_back();
  CHECK_THROWS_AS(bad.validate(10), std::invalid_argument);
  CHECK_THROWS_AS(EpisodeRecord{}.validate(10), std::invalid_argument);
  bad = e;
  bad.transitions[2].next_state = {1.0};
  CHECK_THROWS_AS(bad.validate(10), std::invalid_argument);
}

TEST_CASE("sampling examples") {
  Rng rng(1);
  const std::vector<double> one_hot{0.0, 0.0, 1.0, 0.0};
  for (int i = 0; i < 20; ++i) CHECK(sample_personalized(one_hot, 1, rng) == std::vector<std::size_t>{2});
  const std::vector<double> uniform4(4, 0.25);
  auto all = sample_personalized(uniform4, 4, rng);
  CHECK(std::set<std::size_t>(all.begin(), all.end()) == std::set<std::size_t>{0, 1, 2, 3});
  for (int i = 0; i < 200; ++i) {
    const auto picks = sample_personalized(std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.0}, 3, rng);
    CHECK(std::set<std::size_t>(picks.begin(), picks.end()).size() == 3);
    CHECK(std::find(picks.begin(), picks.end(), 4u) == picks.end());
  }
}

TEST_CASE("single-draw frequencies follow the distribution") {
  Rng rng(2);
  const std::vector<double> p{0.7, 0.1, 0.1, 0.1};
  std::array<int, 4> counts{};
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++counts[sample_personalized(p, 1, rng)[0]];
  for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(counts[i] / double(draws) - p[i]) < 0.01);
}

TEST_CASE("second draw renormalizes over the remaining entries") {
  // P(second = j | first = i) = p_j / (1 - p_i); marginal of the second draw is the oracle.
  const std::vector<double> p{0.5, 0.3, 0.2};
  std::array<double, 3> expect{};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (i != j) expect[j] += p[i] * p[j] / (1.0 - p[i]);
  Rng rng(3);
  std::array<int, 3> counts{};
  const int draws = 100000;
  for (int d = 0; d < draws; ++d) ++counts[sample_personalized(p, 2, rng)[1]];
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(counts[j] / double(draws) - expect[j]) < 0.01);
}

TEST_CASE("sampling errors") {
  Rng rng(4);
  CHECK_THROWS_AS(sample_personalized(std::vector<double>{0.5, 0.5}, 3, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_personalized(std::vector<double>{0.5, 0.4}, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_personalized(std::vector<double>{1.2, -0.2}, 1, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_personalized(std::vector<double>{1.0, 0.0}, 2, rng), std::invalid_argument);
}

TEST_CASE("buffer description") {
  GlobalBuffer buf(3);
  buf.append(make_episode(2, 1.0, 1));
  buf.append(make_episode(4, -0.5));
  const auto doc = nlohmann::json::parse(describe_buffer(buf));
  CHECK(doc["size"] == 2);
  CHECK(doc["max_cap"] == 3);
  CHECK(doc["entries"].size() == 2);
  CHECK(doc["entries"][1]["length"] == 4);
  CHECK(doc["summary"]["mean_length"].get<double>() == 3.0);
  CHECK(doc["summary"]["mean_total_reward"].get<double>() == 0.0);
  CHECK(doc["summary"]["total_captures"] == 1);
}

TEST_CASE("restore keeps ids") {
  GlobalBuffer a(3);
  for (int i = 0; i < 5; ++i) a.append(make_episode(2, i));
  GlobalBuffer b(3);
  b.restore(a.entries(), a.next_id());
  CHECK(b.entries().size() == 3);
  CHECK(b[0].id == a[0].id);
  CHECK(b.append(make_episode(1, 0.0)) == 5);
  GlobalBuffer small(2);
  CHECK_THROWS(small.restore(a.entries(), a.next_id()));
}
