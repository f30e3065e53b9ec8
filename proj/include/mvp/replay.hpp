#pragma once

// Global episode-level experience buffer with oldest-first eviction and
// probability-weighted sampling without replacement.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "mvp/agent.hpp"
#include "mvp/rng.hpp"
#include "mvp/roadnet.hpp"

namespace mvp::replay {

// Inputs needed to rebuild an agent state under different cognition params.
struct CognitionSnapshot {
  std::vector<double> bv;
  std::vector<roadnet::Location> pursuers;
  std::vector<roadnet::Location> evaders;
  std::vector<bool> captured;
  std::uint32_t target = 0;

  friend bool operator==(const CognitionSnapshot&, const CognitionSnapshot&) = default;
};

struct EpisodeRecord {
  std::uint64_t id = 0;
  std::uint32_t agent = 0;
  std::uint64_t epoch = 0;
  std::string scenario;
  std::vector<agent::Transition> transitions;
  std::vector<double> distances;  // distance to target after each step
  std::vector<bool> captures;     // group captured the target at this step
  // One per transition plus the state after the last one; empty unless
  // cognition co-training is on.
  std::vector<CognitionSnapshot> snapshots;

  std::size_t length() const { return transitions.size(); }
  double total_reward() const;
  double mean_reward() const;
  std::size_t capture_count() const;
  // Throws std::invalid_argument on an empty or inconsistent record.
  void validate(std::size_t max_steps) const;
};

class GlobalBuffer {
 public:
  explicit GlobalBuffer(std::size_t max_cap = 64);

  std::size_t max_cap() const { return max_cap_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool full() const { return entries_.size() >= max_cap_; }
  const EpisodeRecord& operator[](std::size_t i) const { return entries_.at(i); }
  const std::deque<EpisodeRecord>& entries() const { return entries_; }
  std::uint64_t next_id() const { return next_id_; }

  // Assigns the record id; evicts the oldest entry beyond max_cap.
  std::uint64_t append(EpisodeRecord episode);
  void clear();

  // Restores exact contents (ids included), e.g. from a checkpoint.
  void restore(std::deque<EpisodeRecord> entries, std::uint64_t next_id);

 private:
  std::size_t max_cap_;
  std::deque<EpisodeRecord> entries_;
  std::uint64_t next_id_ = 0;
};

// k distinct indices drawn sequentially with probability proportional to P
// among the entries not yet drawn. Throws std::invalid_argument when P is not
// a distribution over the buffer or has fewer than k positive entries.
std::vector<std::size_t> sample_personalized(std::span<const double> p, std::size_t k, Rng& rng);

// Buffer summary for inspection tools, as JSON text.
std::string describe_buffer(const GlobalBuffer& buffer);

}  // namespace mvp::replay
