#pragma once

// Evaluation metrics, the scripted greedy pursuer, and helpers shared by the
// command-line front end.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mvp/sim.hpp"
#include "mvp/trainer.hpp"

namespace mvp::harness {

struct EvalMetrics {
  std::size_t episodes = 0;
  double ar = 0.0;     // mean per-episode reward (agents averaged)
  double sdr = 0.0;    // population std of that reward
  double ats = 0.0;    // mean episode length
  double sdts = 0.0;   // population std of episode length
  double sr = 0.0;     // fraction of episodes with every evader captured
  double ar_step = 0.0;  // mean per-step reward
};

struct EpisodeSummary {
  std::size_t episode = 0;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::size_t captures = 0;
  bool success = false;
  double reward = 0.0;           // mean over agents of the episode total
  double reward_per_step = 0.0;  // mean over agents of total / steps
};

struct EvalResult {
  EvalMetrics metrics;
  std::vector<EpisodeSummary> episodes;
};

enum class EvalPolicy { Learned, GreedyBaseline };

EvalPolicy parse_policy(std::string_view text);

EvalMetrics summarize(std::span<const EpisodeSummary> episodes);

// Greedy (epsilon 0) episodes with seeds derived from `seed`. Throws
// std::invalid_argument when episodes is 0.
EvalResult evaluate(const trainer::Trainer& trainer, std::size_t episodes, std::uint64_t seed,
                    EvalPolicy policy = EvalPolicy::Learned,
                    std::function<void(std::size_t, const trainer::StepTrace&)> trace = {});

std::string episodes_csv(const EvalResult& result);
std::string metrics_csv(const EvalMetrics& m);
// Parses episodes_csv output back into summaries.
std::vector<EpisodeSummary> parse_episodes_csv(const std::string& text);

// Feasible action whose successor lane start is nearest (directed network
// distance) to a live evader; lowest index on ties.
roadnet::Turn greedy_baseline_policy(const sim::WorldState& world, std::size_t pursuer);

// A trainer over `scene_cfg`'s scene carrying the trained parameters of
// `trained`. Throws trainer::ConfigError when lane, pursuer or evader counts differ.
trainer::Trainer retarget(const trainer::Trainer& trained, const trainer::TrainConfig& scene_cfg);

}  // namespace mvp::harness
