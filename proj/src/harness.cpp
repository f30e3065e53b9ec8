#include "mvp/harness.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mvp::harness {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double pop_std(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

EvalPolicy parse_policy(std::string_view text) {
  if (text == "learned") return EvalPolicy::Learned;
  if (text == "greedy") return EvalPolicy::GreedyBaseline;
  throw std::invalid_argument("unknown policy '" + std::string(text) + "' (learned, greedy)");
}

EvalMetrics summarize(std::span<const EpisodeSummary> episodes) {
  EvalMetrics m;
  m.episodes = episodes.size();
  std::vector<double> rewards, steps, per_step;
  double successes = 0.0;
  for (const auto& e : episodes) {
    rewards.push_back(e.reward);
    steps.push_back(static_cast<double>(e.steps));
    per_step.push_back(e.reward_per_step);
    successes += e.success ? 1.0 : 0.0;
  }
  m.ar = mean_of(rewards);
  m.sdr = pop_std(rewards, m.ar);
  m.ats = mean_of(steps);
  m.sdts = pop_std(steps, m.ats);
  m.sr = episodes.empty() ? 0.0 : successes / static_cast<double>(episodes.size());
  m.ar_step = mean_of(per_step);
  return m;
}

EvalResult evaluate(const trainer::Trainer& trainer, std::size_t episodes, std::uint64_t seed, EvalPolicy policy,
                    std::function<void(std::size_t, const trainer::StepTrace&)> trace) {
  if (episodes == 0) throw std::invalid_argument("evaluation needs at least one episode");
  EvalResult out;
  for (std::size_t i = 0; i < episodes; ++i) {
    trainer::EpisodeOptions opts;
    opts.env_seed = derive_seed(seed, {kStreamEval, i});
    if (policy == EvalPolicy::GreedyBaseline) {
      opts.override_action = greedy_baseline_policy;
      opts.nearest_targets = true;
    }
    if (trace) opts.trace = [&trace, i](const trainer::StepTrace& s) { trace(i, s); };
    const auto r = trainer.run_episode(opts);
    EpisodeSummary s;
    s.episode = i;
    s.seed = opts.env_seed;
    s.steps = r.length;
    s.captures = r.captures;
    s.success = r.success;
    s.reward = mean_of(r.total_rewards);
    s.reward_per_step = mean_of(r.step_rewards);
    out.episodes.push_back(s);
  }
  out.metrics = summarize(out.episodes);
  return out;
}

std::string episodes_csv(const EvalResult& result) {
  std::string out = "episode,seed,steps,captures,success,reward,reward_per_step\n";
  for (const auto& e : result.episodes)
    out += std::to_string(e.episode) + "," + std::to_string(e.seed) + "," + std::to_string(e.steps) + "," +
           std::to_string(e.captures) + "," + (e.success ? "1" : "0") + "," + g17(e.reward) + "," +
           g17(e.reward_per_step) + "\n";
  return out;
}

std::string metrics_csv(const EvalMetrics& m) {
  return "episodes,AR,SDR,ATS,SDTS,SR,AR_per_step\n" + std::to_string(m.episodes) + "," + g17(m.ar) + "," +
         g17(m.sdr) + "," + g17(m.ats) + "," + g17(m.sdts) + "," + g17(m.sr) + "," + g17(m.ar_step) + "\n";
}

std::vector<EpisodeSummary> parse_episodes_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<EpisodeSummary> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string f[7];
    for (auto& s : f)
      if (!std::getline(row, s, ',')) throw std::invalid_argument("malformed episode row: " + line);
    EpisodeSummary e;
    e.episode = std::stoull(f[0]);
    e.seed = std::stoull(f[1]);
    e.steps = std::stoull(f[2]);
    e.captures = std::stoull(f[3]);
    e.success = f[4] == "1";
    e.reward = std::stod(f[5]);
    e.reward_per_step = std::stod(f[6]);
    out.push_back(e);
  }
  return out;
}

roadnet::Turn greedy_baseline_policy(const sim::WorldState& world, std::size_t pursuer) {
  const auto& net = world.net();
  const auto lane = world.pursuer(pursuer).location.lane;
  const auto feasible = sim::feasible_actions(world, pursuer);
  roadnet::Turn best = feasible.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (auto a : feasible) {
    const auto next = net.successor_for(lane, a);
    if (!next) continue;
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < world.evader_count; ++m) {
      if (world.evader(m).captured) continue;
      d = std::min(d, roadnet::network_distance(net, {*next, 0.0}, world.evader(m).location));
    }
    if (d < best_d) {
      best_d = d;
      best = a;
    }
  }
  return best;
}

trainer::Trainer retarget(const trainer::Trainer& trained, const trainer::TrainConfig& scene_cfg) {
  trainer::TrainConfig cfg = trained.config();
  cfg.blocks_x = scene_cfg.blocks_x;
  cfg.blocks_y = scene_cfg.blocks_y;
  cfg.lane_length = scene_cfg.lane_length;
  cfg.map_path = scene_cfg.map_path;
  cfg.scenario = scene_cfg.scenario;
  cfg.pursuers = scene_cfg.pursuers;
  cfg.evaders = scene_cfg.evaders;
  cfg.background = scene_cfg.background;
  cfg.max_steps = scene_cfg.max_steps;
  auto scene = trainer::build_scene(cfg);
  if (scene->lane_count() != trained.network().lane_count() || cfg.evaders != trained.config().evaders ||
      cfg.pursuers != trained.config().pursuers)
    throw trainer::ConfigError("checkpoint was trained with " + std::to_string(trained.network().lane_count()) +
                               " lanes, " + std::to_string(trained.config().pursuers) + " pursuers and " +
                               std::to_string(trained.config().evaders) + " evaders; scenario has " +
                               std::to_string(scene->lane_count()) + ", " + std::to_string(cfg.pursuers) + " and " +
                               std::to_string(cfg.evaders));
  trainer::Trainer out(cfg, scene);
  out.cognition_params() = trained.cognition_params();
  out.agents() = trained.agents();
  return out;
}

}  // namespace mvp::harness
