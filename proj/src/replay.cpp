#include "mvp/replay.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace mvp::replay {

double EpisodeRecord::total_reward() const {
  double s = 0.0;
  for (const auto& t : transitions) s += t.reward;
  return s;
}

double EpisodeRecord::mean_reward() const {
  return transitions.empty() ? 0.0 : total_reward() / static_cast<double>(transitions.size());
}

std::size_t EpisodeRecord::capture_count() const {
  return static_cast<std::size_t>(std::count(captures.begin(), captures.end(), true));
}

void EpisodeRecord::validate(std::size_t max_steps) const {
  if (transitions.empty()) throw std::invalid_argument("episode has no transitions");
  if (transitions.size() > max_steps) throw std::invalid_argument("episode longer than the step limit");
  if (distances.size() != transitions.size() || captures.size() != transitions.size())
    throw std::invalid_argument("episode side data does not match its transitions");
  if (!snapshots.empty() && snapshots.size() != transitions.size() + 1)
    throw std::invalid_argument("episode snapshots do not match its transitions");
  const std::size_t width = transitions.front().state.size();
  for (const auto& t : transitions)
    if (t.state.size() != width || t.next_state.size() != width)
      throw std::invalid_argument("episode states have inconsistent widths");
}

GlobalBuffer::GlobalBuffer(std::size_t max_cap) : max_cap_(max_cap) {
  if (max_cap == 0) throw std::invalid_argument("buffer capacity must be positive");
}

std::uint64_t GlobalBuffer::append(EpisodeRecord episode) {
  episode.id = next_id_++;
  entries_.push_back(std::move(episode));
  while (entries_.size() > max_cap_) entries_.pop_front();
  return entries_.back().id;
}

void GlobalBuffer::clear() { entries_.clear(); }

void GlobalBuffer::restore(std::deque<EpisodeRecord> entries, std::uint64_t next_id) {
  if (entries.size() > max_cap_) throw std::invalid_argument("restored buffer exceeds capacity");
  entries_ = std::move(entries);
  next_id_ = next_id;
}

std::vector<std::size_t> sample_personalized(std::span<const double> p, std::size_t k, Rng& rng) {
  if (k > p.size()) throw std::invalid_argument("cannot sample more entries than the buffer holds");
  double total = 0.0;
  std::size_t positive = 0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("sampling probabilities must be nonnegative");
    total += v;
    positive += v > 0.0;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("sampling probabilities must sum to 1");
  if (positive < k) throw std::invalid_argument("too few entries with positive probability");

  std::vector<double> w(p.begin(), p.end());
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t draw = 0; draw < k; ++draw) {
    const double mass = std::accumulate(w.begin(), w.end(), 0.0);
    const double u = uniform01(rng) * mass;
    double acc = 0.0;
    std::size_t pick = w.size();
    std::size_t last_live = w.size();
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      last_live = i;
      acc += w[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    if (pick == w.size()) pick = last_live;
    out.push_back(pick);
    w[pick] = 0.0;
  }
  return out;
}

std::string describe_buffer(const GlobalBuffer& buffer) {
  nlohmann::json entries = nlohmann::json::array();
  double length_sum = 0.0, reward_sum = 0.0;
  std::size_t capture_sum = 0;
  for (const auto& e : buffer.entries()) {
    entries.push_back({{"id", e.id},
                       {"agent", e.agent},
                       {"epoch", e.epoch},
                       {"scenario", e.scenario},
                       {"length", e.length()},
                       {"total_reward", e.total_reward()},
                       {"mean_reward", e.mean_reward()},
                       {"captures", e.capture_count()}});
    length_sum += static_cast<double>(e.length());
    reward_sum += e.total_reward();
    capture_sum += e.capture_count();
  }
  const double n = buffer.empty() ? 1.0 : static_cast<double>(buffer.size());
  nlohmann::json doc{{"size", buffer.size()},
                     {"max_cap", buffer.max_cap()},
                     {"next_id", buffer.next_id()},
                     {"summary",
                      {{"mean_length", length_sum / n},
                       {"mean_total_reward", reward_sum / n},
                       {"total_captures", capture_sum}}},
                     {"entries", std::move(entries)}};
  return doc.dump(2);
}

}  // namespace mvp::replay
