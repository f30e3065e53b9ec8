// Command-line front end: train, eval, gen-map, inspect-buffer, dump-trace.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mvp/config.hpp"
#include "mvp/harness.hpp"
#include "mvp/kernels.hpp"
#include "mvp/roadnet.hpp"
#include "mvp/trainer.hpp"

namespace fs = std::filesystem;
using namespace mvp;

namespace {

struct SceneFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string scenario;
  std::string map;
  std::string blocks;
  std::optional<double> lane_length;
  std::optional<std::size_t> background;
  std::optional<std::size_t> max_steps;
  std::optional<std::size_t> epochs;
  std::string ablation;

  void add(CLI::App* app) {
    app->add_option("--config", config, "Config file (key = value lines)")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "Run seed");
    app->add_option("--scenario", scenario, "Pursuer/evader preset")->check(CLI::IsMember({"p6e3", "p7e4", "p8e5"}));
    auto* m = app->add_option("--map", map, "Map file")->check(CLI::ExistingFile);
    app->add_option("--blocks", blocks, "Grid size XxY")->excludes(m);
    app->add_option("--lane-length", lane_length, "Grid lane length in meters");
    app->add_option("--background", background, "Background vehicle count");
    app->add_option("--max-steps", max_steps, "Episode step limit");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--ablation", ablation, "Ablation preset")
        ->check(CLI::IsMember({"none", "no-prioritization", "no-cognition"}));
  }

  // Defaults, then the config file, then flags.
  trainer::TrainConfig resolve() const {
    trainer::TrainConfig cfg;
    if (!config.empty()) trainer::apply_config_file(cfg, config);
    apply(cfg);
    return cfg;
  }

  void apply(trainer::TrainConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (!scenario.empty()) trainer::apply_scenario(cfg, scenario);
    if (!blocks.empty()) trainer::apply_blocks(cfg, blocks);
    if (!map.empty()) cfg.map_path = map;
    if (lane_length) cfg.lane_length = *lane_length;
    if (background) cfg.background = *background;
    if (max_steps) cfg.max_steps = *max_steps;
    if (epochs) cfg.max_epoch = *epochs;
    if (!ablation.empty()) cfg.ablation = trainer::parse_ablation(ablation);
  }

  bool scene_given() const { return !scenario.empty() || !blocks.empty() || !map.empty() || lane_length || background || max_steps; }
};

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + p.string() + "'");
  return out;
}

int run_train(const SceneFlags& flags, const std::string& out_dir, bool dump_config, bool separate_test,
              bool cotrain, const std::string& resume, std::size_t checkpoint_every) {
  trainer::TrainConfig cfg = flags.resolve();
  if (separate_test) cfg.separate_test_episode = true;
  if (cotrain) cfg.cotrain_cognition = true;
  cfg.validate();
  if (dump_config) {
    std::cout << trainer::to_config_text(cfg);
    return 0;
  }
  fs::create_directories(out_dir);
  trainer::Trainer tr = resume.empty() ? trainer::Trainer(cfg) : trainer::Trainer::load_checkpoint(resume);
  const auto& c = tr.config();
  open_out(fs::path(out_dir) / "config.txt") << trainer::to_config_text(c);

  const bool append = !resume.empty();
  const auto mode = append ? std::ios::app : std::ios::trunc;
  std::ofstream log(fs::path(out_dir) / "train_log.jsonl", mode);
  std::ofstream audit(fs::path(out_dir) / "priority_audit.csv", mode);
  std::ofstream metrics(fs::path(out_dir) / "metrics.csv", mode);
  if (!log || !audit || !metrics) throw std::runtime_error("cannot write outputs in '" + out_dir + "'");
  if (!append) {
    audit << trainer::audit_header() << "\n";
    metrics << "epoch,trained,reward_per_step,episode_reward,test_reward_per_step,test_episode_reward,"
               "episode_length,captures,done,test_success,pn_loss\n";
  }
  tr.set_audit([&audit](const trainer::AuditRow& r) { audit << trainer::audit_line(r) << "\n"; });

  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  while (tr.epoch() < c.max_epoch) {
    const auto r = tr.run_epoch();
    log << trainer::to_json_line(r) << "\n";
    metrics << r.epoch << "," << r.trained << "," << mean(r.rewards) << "," << mean(r.episode_rewards) << ","
            << mean(r.test_rewards) << "," << r.test_reward_mean() << "," << r.episode_length << "," << r.captures
            << "," << r.done << "," << r.test_success << "," << (r.pn_loss ? std::to_string(*r.pn_loss) : "") << "\n";
    if (checkpoint_every && tr.epoch() % checkpoint_every == 0)
      tr.save_checkpoint(fs::path(out_dir) / ("checkpoint_" + std::to_string(tr.epoch()) + ".bin"));
  }
  tr.save_checkpoint(fs::path(out_dir) / "checkpoint.bin");
  std::cout << "trained " << c.max_epoch << " epochs; outputs in " << out_dir << "\n";
  return 0;
}

trainer::Trainer load_for_scene(const std::string& checkpoint, const SceneFlags& flags) {
  trainer::Trainer tr = trainer::Trainer::load_checkpoint(checkpoint);
  if (!flags.scene_given()) return tr;
  trainer::TrainConfig scene = tr.config();
  flags.apply(scene);
  return harness::retarget(tr, scene);
}

int run_eval(const SceneFlags& flags, const std::string& checkpoint, std::size_t episodes, const std::string& policy,
             const std::string& out_dir) {
  const auto tr = load_for_scene(checkpoint, flags);
  const std::uint64_t seed = flags.seed.value_or(tr.config().seed);
  const auto res = harness::evaluate(tr, episodes, seed, harness::parse_policy(policy));
  fs::create_directories(out_dir);
  open_out(fs::path(out_dir) / "metrics.csv") << harness::metrics_csv(res.metrics);
  open_out(fs::path(out_dir) / "episodes.csv") << harness::episodes_csv(res);
  const auto& m = res.metrics;
  std::cout << "episodes " << m.episodes << "  AR " << m.ar << "  SDR " << m.sdr << "  ATS " << m.ats << "  SDTS "
            << m.sdts << "  SR " << m.sr << "  AR/step " << m.ar_step << "\n";
  return 0;
}

int run_gen_map(const std::string& blocks, std::optional<double> lane_length, const std::string& out) {
  trainer::TrainConfig cfg;
  trainer::apply_blocks(cfg, blocks);
  if (lane_length) cfg.lane_length = *lane_length;
  const auto net = roadnet::generate_grid(cfg.blocks_x, cfg.blocks_y, cfg.lane_length);
  if (out.empty() || out == "-") {
    roadnet::write_map(std::cout, net);
  } else {
    roadnet::save_map(out, net);
  }
  std::cerr << net.junction_count() << " junctions, " << net.lane_count() << " lanes\n";
  return 0;
}

int run_inspect(const std::string& checkpoint) {
  const auto tr = trainer::Trainer::load_checkpoint(checkpoint);
  std::cout << replay::describe_buffer(tr.buffer()) << "\n";
  return 0;
}

int run_dump_trace(const SceneFlags& flags, const std::string& checkpoint, std::size_t episodes,
                   const std::string& policy, const std::string& out_dir) {
  const auto tr = checkpoint.empty() ? trainer::Trainer(flags.resolve()) : load_for_scene(checkpoint, flags);
  const std::uint64_t seed = flags.seed.value_or(tr.config().seed);
  fs::create_directories(out_dir);
  std::optional<std::ofstream> file;
  std::size_t current = static_cast<std::size_t>(-1);
  const auto res = harness::evaluate(tr, episodes, seed, harness::parse_policy(policy),
                                     [&](std::size_t ep, const trainer::StepTrace& s) {
                                       if (ep != current) {
                                         current = ep;
                                         file.emplace(open_out(fs::path(out_dir) / ("trace_" + std::to_string(ep) + ".jsonl")));
                                       }
                                       *file << trainer::trace_line(s) << "\n";
                                     });
  std::cout << "wrote " << res.episodes.size() << " trace(s) to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-vehicle pursuit with prioritized personalized replay"};
  app.require_subcommand(1);
  std::string kernels = "reference";
  app.add_option("--kernels", kernels, "Numeric kernels")->check(CLI::IsMember({"reference", "scalar", "simd", "avx2"}));

  SceneFlags train_flags, eval_flags, trace_flags;
  std::string out_dir = "run";
  bool dump_config = false, separate_test = false, cotrain = false;
  std::string resume;
  std::size_t checkpoint_every = 0;
  auto* train = app.add_subcommand("train", "Train agents and the prioritization network");
  train_flags.add(train);
  train->add_option("--out", out_dir, "Output directory");
  train->add_flag("--dump-config", dump_config, "Print the resolved config and exit");
  train->add_flag("--separate-test-episode", separate_test, "Run a greedy test episode each epoch");
  train->add_flag("--cotrain-cognition", cotrain, "Train cognition parameters with agent 0's loss");
  train->add_option("--resume", resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  train->add_option("--checkpoint-every", checkpoint_every, "Save a checkpoint every N epochs");

  std::string checkpoint, policy = "learned", eval_out = "eval";
  std::size_t episodes = 100;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_flags.add(eval);
  eval->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "Episode count")->check(CLI::PositiveNumber);
  eval->add_option("--policy", policy, "learned or greedy")->check(CLI::IsMember({"learned", "greedy"}));
  eval->add_option("--out", eval_out, "Output directory");

  std::string blocks_pos, blocks_opt, map_out;
  std::optional<double> map_lane;
  auto* gen = app.add_subcommand("gen-map", "Write a grid map file");
  gen->add_option("grid", blocks_pos, "Grid size XxY");
  gen->add_option("--blocks", blocks_opt, "Grid size XxY");
  gen->add_option("--lane-length", map_lane, "Lane length in meters");
  gen->add_option("--out", map_out, "Output path (stdout when omitted)");

  std::string inspect_ckpt;
  auto* inspect = app.add_subcommand("inspect-buffer", "Print buffer contents of a checkpoint as JSON");
  inspect->add_option("--checkpoint", inspect_ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);

  std::string trace_ckpt, trace_policy = "learned", trace_out = "traces";
  std::size_t trace_episodes = 1;
  auto* dump = app.add_subcommand("dump-trace", "Write per-step JSON-lines traces");
  trace_flags.add(dump);
  dump->add_option("--checkpoint", trace_ckpt, "Checkpoint (fresh parameters when omitted)")->check(CLI::ExistingFile);
  dump->add_option("--episodes", trace_episodes, "Episode count")->check(CLI::PositiveNumber);
  dump->add_option("--policy", trace_policy, "learned or greedy")->check(CLI::IsMember({"learned", "greedy"}));
  dump->add_option("--out", trace_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    kernels::set_mode(kernels::parse_mode(kernels));
    if (*train) return run_train(train_flags, out_dir, dump_config, separate_test, cotrain, resume, checkpoint_every);
    if (*eval) return run_eval(eval_flags, checkpoint, episodes, policy, eval_out);
    if (*gen) {
      const std::string b = !blocks_opt.empty() ? blocks_opt : blocks_pos;
      if (b.empty()) throw std::invalid_argument("gen-map needs a grid size, e.g. gen-map 3x3");
      return run_gen_map(b, map_lane, map_out);
    }
    if (*inspect) return run_inspect(inspect_ckpt);
    if (*dump) return run_dump_trace(trace_flags, trace_ckpt, trace_episodes, trace_policy, trace_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
