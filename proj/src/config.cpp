#include "mvp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace mvp::trainer {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const std::string s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + s + "'");
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const std::string s = trim(v);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty())
    throw ConfigError("'" + std::string(key) + "' expects a nonnegative integer, got '" + s + "'");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError("'" + std::string(key) + "' expects true or false, got '" + s + "'");
}

std::vector<std::size_t> parse_widths(std::string_view key, std::string_view v) {
  std::vector<std::size_t> out;
  std::stringstream ss{std::string(v)};
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_u64(key, item));
  if (out.empty()) throw ConfigError("'" + std::string(key) + "' expects a comma-separated width list");
  return out;
}

std::string widths_text(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

struct Field {
  const char* key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, std::string_view)> set;
};

#define MVP_DOUBLE(name, member)                                                    \
  Field{name, [](const TrainConfig& c) { return fmt(c.member); },                   \
        [](TrainConfig& c, std::string_view v) { c.member = parse_double(name, v); }}
#define MVP_SIZE(name, member)                                                      \
  Field{name, [](const TrainConfig& c) { return std::to_string(c.member); },        \
        [](TrainConfig& c, std::string_view v) { c.member = parse_u64(name, v); }}
#define MVP_BOOL(name, member)                                                      \
  Field{name, [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }, \
        [](TrainConfig& c, std::string_view v) { c.member = parse_bool(name, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      Field{"blocks", [](const TrainConfig& c) { return std::to_string(c.blocks_x) + "x" + std::to_string(c.blocks_y); },
            [](TrainConfig& c, std::string_view v) { apply_blocks(c, trim(v)); }},
      MVP_DOUBLE("lane_length", lane_length),
      Field{"map", [](const TrainConfig& c) { return c.map_path; },
            [](TrainConfig& c, std::string_view v) { c.map_path = trim(v); }},
      Field{"scenario", [](const TrainConfig& c) { return c.scenario; },
            [](TrainConfig& c, std::string_view v) { apply_scenario(c, trim(v)); }},
      MVP_SIZE("pursuers", pursuers),
      MVP_SIZE("evaders", evaders),
      MVP_SIZE("background", background),
      MVP_SIZE("max_steps", max_steps),
      MVP_DOUBLE("capture_distance", capture_distance),
      MVP_DOUBLE("v_max", kinematics.v_max),
      MVP_DOUBLE("accel_max", kinematics.accel_max),
      MVP_DOUBLE("decel_max", kinematics.decel_max),
      MVP_DOUBLE("min_gap", kinematics.min_gap),
      MVP_DOUBLE("dt", kinematics.dt),
      MVP_DOUBLE("capture_reward", reward.capture_reward),
      MVP_DOUBLE("step_penalty", reward.step_penalty),
      MVP_DOUBLE("distance_scale", reward.distance_scale),
      MVP_DOUBLE("reward_clip", reward.max_closing),
      MVP_SIZE("max_epoch", max_epoch),
      MVP_DOUBLE("gamma", gamma),
      MVP_DOUBLE("alpha", alpha),
      MVP_DOUBLE("tau", tau),
      MVP_DOUBLE("lambda", lambda),
      MVP_DOUBLE("beta0", beta0),
      MVP_DOUBLE("zeta", zeta),
      MVP_SIZE("history_k", history_k),
      MVP_SIZE("max_cap", max_cap),
      MVP_SIZE("k_sample", k_sample),
      MVP_DOUBLE("epsilon_start", epsilon_start),
      MVP_DOUBLE("epsilon_end", epsilon_end),
      MVP_DOUBLE("epsilon_fraction", epsilon_fraction),
      MVP_DOUBLE("pn_lr", pn_lr),
      MVP_DOUBLE("pn_grad_clip", pn_grad_clip),
      Field{"q_hidden", [](const TrainConfig& c) { return widths_text(c.q_hidden); },
            [](TrainConfig& c, std::string_view v) { c.q_hidden = parse_widths("q_hidden", v); }},
      Field{"pn_hidden", [](const TrainConfig& c) { return widths_text(c.pn_hidden); },
            [](TrainConfig& c, std::string_view v) { c.pn_hidden = parse_widths("pn_hidden", v); }},
      MVP_SIZE("f_dim", f_dim),
      MVP_SIZE("heads", heads),
      MVP_SIZE("d_k", d_k),
      MVP_SIZE("conv_channels", conv_channels),
      MVP_SIZE("conv_kernel", conv_kernel),
      MVP_SIZE("conv_stride", conv_stride),
      MVP_SIZE("seed", seed),
      Field{"ablation", [](const TrainConfig& c) { return std::string(ablation_name(c.ablation)); },
            [](TrainConfig& c, std::string_view v) { c.ablation = parse_ablation(trim(v)); }},
      MVP_BOOL("cotrain_cognition", cotrain_cognition),
      MVP_BOOL("separate_test_episode", separate_test_episode),
      MVP_SIZE("test_episodes", test_episodes),
  };
  return table;
}

#undef MVP_DOUBLE
#undef MVP_SIZE
#undef MVP_BOOL

}  // namespace

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoPrioritization: return "no-prioritization";
    case Ablation::NoCognition: return "no-cognition";
  }
  return "none";
}

Ablation parse_ablation(std::string_view text) {
  if (text == "none") return Ablation::None;
  if (text == "no-prioritization") return Ablation::NoPrioritization;
  if (text == "no-cognition") return Ablation::NoCognition;
  throw ConfigError("unknown ablation '" + std::string(text) + "' (none, no-prioritization, no-cognition)");
}

void apply_scenario(TrainConfig& cfg, std::string_view name) {
  if (name == "p6e3") {
    cfg.pursuers = 6, cfg.evaders = 3;
  } else if (name == "p7e4") {
    cfg.pursuers = 7, cfg.evaders = 4;
  } else if (name == "p8e5") {
    cfg.pursuers = 8, cfg.evaders = 5;
  } else if (name != "custom") {
    throw ConfigError("unknown scenario '" + std::string(name) + "' (p6e3, p7e4, p8e5)");
  }
  cfg.scenario = std::string(name);
}

void apply_blocks(TrainConfig& cfg, std::string_view blocks) {
  const auto x = blocks.find('x');
  if (x == std::string_view::npos) throw ConfigError("blocks must look like 3x3, got '" + std::string(blocks) + "'");
  const auto bx = parse_u64("blocks", blocks.substr(0, x));
  const auto by = parse_u64("blocks", blocks.substr(x + 1));
  if (bx == 0 || by == 0) throw ConfigError("blocks must be positive");
  cfg.blocks_x = bx;
  cfg.blocks_y = by;
  cfg.map_path.clear();
  if (bx == 3 && by == 3) {
    cfg.lane_length = 500.0;
    cfg.background = 240;
  } else if (bx == 4 && by == 5) {
    cfg.lane_length = 400.0;
    cfg.background = 500;
  }
}

void set_value(TrainConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void apply_config_text(TrainConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    try {
      set_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(number) + ": " + e.what());
    }
  }
}

void apply_config_file(TrainConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  apply_config_text(cfg, in);
}

std::string to_config_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) {
    const std::string v = f.get(cfg);
    out += std::string(f.key) + " =" + (v.empty() ? "" : " " + v) + "\n";
  }
  return out;
}

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(pursuers >= 1 && evaders >= 1, "need at least one pursuer and one evader");
  need(max_steps >= 1, "max_steps must be positive");
  need(lane_length > 0.0, "lane_length must be positive");
  need(gamma >= 0.0 && gamma < 1.0, "gamma must be in [0, 1)");
  need(alpha > 0.0, "alpha must be positive");
  need(tau > 0.0 && tau <= 1.0, "tau must be in (0, 1]");
  need(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0, 1]");
  need(beta0 >= 0.0 && beta0 <= 1.0, "beta0 must be in [0, 1]");
  need(zeta > 0.0, "zeta must be positive");
  need(history_k >= 1, "history_k must be positive");
  need(max_cap >= 1, "max_cap must be positive");
  need(k_sample >= 1 && k_sample <= max_cap, "k_sample must be in [1, max_cap]");
  need(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0,
       "epsilon values must be in [0, 1]");
  need(epsilon_fraction >= 0.0 && epsilon_fraction <= 1.0, "epsilon_fraction must be in [0, 1]");
  need(pn_lr > 0.0, "pn_lr must be positive");
  need(pn_grad_clip >= 0.0, "pn_grad_clip must be nonnegative");
  need(test_episodes > 0, "test_episodes must be positive");
  need(f_dim >= 1 && heads >= 1 && d_k >= 1 && conv_channels >= 1 && conv_kernel >= 1 && conv_stride >= 1,
       "cognition widths must be positive");
  need(reward.max_closing >= 0.0, "reward_clip must be nonnegative");
}

std::shared_ptr<const roadnet::RoadNetwork> build_scene(const TrainConfig& cfg) {
  if (!cfg.map_path.empty()) return std::make_shared<const roadnet::RoadNetwork>(roadnet::load_map(cfg.map_path));
  return std::make_shared<const roadnet::RoadNetwork>(
      roadnet::generate_grid(cfg.blocks_x, cfg.blocks_y, cfg.lane_length));
}

sim::EpisodeConfig episode_config(const TrainConfig& cfg, std::shared_ptr<const roadnet::RoadNetwork> scene,
                                  std::uint64_t seed) {
  sim::EpisodeConfig e;
  e.pursuers = cfg.pursuers;
  e.evaders = cfg.evaders;
  e.background = cfg.background;
  e.seed = seed;
  e.scene = std::move(scene);
  e.capture_distance = cfg.capture_distance;
  e.max_steps = cfg.max_steps;
  e.kinematics = cfg.kinematics;
  return e;
}

double epsilon_schedule(const TrainConfig& cfg, std::size_t epoch) {
  const double horizon = cfg.epsilon_fraction * static_cast<double>(cfg.max_epoch);
  if (horizon <= 0.0) return cfg.epsilon_end;
  const double frac = std::min(1.0, static_cast<double>(epoch) / horizon);
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

}  // namespace mvp::trainer
