#include "mvp/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mvp/checkpoint.hpp"

namespace mvp::trainer {

using nlohmann::json;

namespace {

const char* const kFormat = "mvp-trainer";

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json number_array(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(finite_or_null(x));
  return a;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double EpochReport::test_reward_mean() const {
  if (test_episode_rewards.empty()) return 0.0;
  double s = 0.0;
  for (double r : test_episode_rewards) s += r;
  return s / static_cast<double>(test_episode_rewards.size());
}

std::string to_json_line(const EpochReport& r) {
  json j{{"epoch", r.epoch},
         {"trained", r.trained},
         {"pn_updated", r.pn_updated},
         {"beta", r.beta},
         {"epsilon", r.epsilon},
         {"rewards", number_array(r.rewards)},
         {"episode_rewards", number_array(r.episode_rewards)},
         {"test_rewards", number_array(r.test_rewards)},
         {"test_episode_rewards", number_array(r.test_episode_rewards)},
         {"test_reward_mean", finite_or_null(r.test_reward_mean())},
         {"delta_r", number_array(r.delta_r)},
         {"pn_loss", r.pn_loss ? finite_or_null(*r.pn_loss) : json(nullptr)},
         {"episode_length", r.episode_length},
         {"captures", r.captures},
         {"done", r.done},
         {"test_length", r.test_length},
         {"test_captures", r.test_captures},
         {"test_success", r.test_success}};
  return j.dump();
}

std::string audit_header() { return "epoch,agent,entry_id,gain,q,p,omega,sampled"; }

std::string audit_line(const AuditRow& r) {
  return std::to_string(r.epoch) + "," + std::to_string(r.agent) + "," + std::to_string(r.entry_id) + "," +
         g17(r.gain) + "," + g17(r.q) + "," + g17(r.p) + "," + g17(r.omega) + "," + (r.sampled ? "1" : "0");
}

std::string trace_line(const StepTrace& s) {
  json vehicles = json::array();
  for (const auto& v : s.world->vehicles)
    vehicles.push_back({{"id", v.id},
                        {"kind", sim::kind_name(v.kind)},
                        {"lane", v.location.lane},
                        {"offset", v.location.offset},
                        {"speed", v.speed},
                        {"captured", v.captured}});
  json lights = json::array();
  for (auto p : s.world->light_phases) lights.push_back(p == sim::LightPhase::NorthSouth ? "ns" : "ew");
  json events = json::array();
  if (s.events)
    for (const auto& c : s.events->captures) events.push_back({{"type", "capture"}, {"pursuer", c.pursuer}, {"evader", c.evader}});
  json wg = json::array();
  if (s.attention)
    for (std::size_t n = 0; n < s.attention->pursuers; ++n) {
      auto row = s.attention->row(n);
      wg.push_back(number_array(row));
    }
  json actions = json::array();
  for (auto a : s.actions) actions.push_back(roadnet::turn_name(a));
  json j{{"t", s.t},
         {"vehicles", std::move(vehicles)},
         {"lights", std::move(lights)},
         {"events", std::move(events)},
         {"w_g", std::move(wg)},
         {"targets", s.targets},
         {"actions", std::move(actions)},
         {"rewards", number_array(s.rewards)},
         {"done", s.world->done}};
  return j.dump();
}

std::vector<std::uint32_t> nearest_targets(const sim::WorldState& world) {
  const auto& net = world.net();
  std::vector<std::uint32_t> out(world.pursuer_count);
  for (std::size_t n = 0; n < world.pursuer_count; ++n) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t pick = world.evader_count;
    for (std::size_t m = 0; m < world.evader_count; ++m) {
      if (world.evader(m).captured) continue;
      const double d = roadnet::network_distance(net, world.pursuer(n).location, world.evader(m).location);
      if (pick == world.evader_count || d < best) {
        best = d;
        pick = m;
      }
    }
    if (pick == world.evader_count) throw std::invalid_argument("no live evader to target");
    out[n] = static_cast<std::uint32_t>(pick);
  }
  return out;
}

struct Trainer::View {
  std::vector<double> bv;
  std::vector<double> f;
  cognition::GroupAttention attention;
  std::vector<std::vector<double>> states;
  std::vector<double> distances;
};

Trainer::Trainer(TrainConfig cfg) : Trainer(cfg, build_scene(cfg)) {}

Trainer::Trainer(TrainConfig cfg, std::shared_ptr<const roadnet::RoadNetwork> scene)
    : cfg_(std::move(cfg)), scene_(std::move(scene)), buffer_(cfg_.max_cap), ledger_(cfg_.pursuers, cfg_.history_k) {
  cfg_.validate();
  if (!scene_) throw std::invalid_argument("trainer needs a scene");
  const auto adj = roadnet::adjacency_matrix(*scene_);
  rt_.assign(adj.begin(), adj.end());
  const std::size_t lanes = scene_->lane_count();
  cognition::CognitionSpec spec;
  spec.lanes = lanes;
  spec.evaders = cfg_.evaders;
  spec.f_dim = cfg_.f_dim;
  spec.heads = cfg_.heads;
  spec.d_k = cfg_.d_k;
  spec.conv_channels = cfg_.conv_channels;
  spec.conv_kernel = cfg_.conv_kernel;
  spec.conv_stride = cfg_.conv_stride;
  cog_ = cognition::CognitionNet(spec);
  qnet_ = agent::QNetwork(agent::state_width(lanes, cfg_.f_dim, cfg_.evaders), cfg_.q_hidden);

  Rng cog_rng(derive_seed(cfg_.seed, {kStreamInit, 0}));
  cog_params_ = cog_.init(cog_rng);
  for (std::size_t n = 0; n < cfg_.pursuers; ++n) {
    Rng rng(derive_seed(cfg_.seed, {kStreamInit, 1, n}));
    agents_.push_back(qnet_.init(rng));
  }
  pn_ = prioritizer::PriorityNet(prioritizer::pn_input_width(agents_.front().online.size()), cfg_.pn_hidden);
  Rng pn_rng(derive_seed(cfg_.seed, {kStreamInit, 2}));
  pn_params_ = pn_.init(pn_rng);
}

Trainer::View Trainer::observe(const sim::WorldState& world, std::span<const double> conv, bool nearest) const {
  const auto& net = *scene_;
  View v;
  v.bv = sim::count_background(world);
  v.f = cog_.feature_from_conv(cog_params_, conv, v.bv);
  const auto captured = world.captured_mask();
  const std::size_t n_count = world.pursuer_count, m_count = world.evader_count;
  if (nearest) {
    v.attention.pursuers = n_count;
    v.attention.evaders = m_count;
    v.attention.w_g.assign(n_count * m_count, 0.0);
    v.attention.targets = nearest_targets(world);
    v.attention.groups = cognition::groups_from_targets(v.attention.targets, m_count);
  } else {
    std::vector<double> pe, ee;
    for (std::size_t n = 0; n < n_count; ++n) {
      auto e = cognition::location_embedding(net, world.pursuer(n).location);
      pe.insert(pe.end(), e.begin(), e.end());
    }
    for (std::size_t m = 0; m < m_count; ++m) {
      auto e = cognition::location_embedding(net, world.evader(m).location);
      ee.insert(ee.end(), e.begin(), e.end());
    }
    v.attention = cog_.group_attention(cog_params_, pe, ee, v.f, captured);
  }
  for (std::size_t n = 0; n < n_count; ++n) {
    const auto& own = world.pursuer(n).location;
    const auto& tgt = world.evader(v.attention.targets[n]).location;
    v.states.push_back(agent::assemble_state(net, own, tgt, v.f, v.attention.row(n)));
    v.distances.push_back(sim::capture_distance(net, own, tgt));
  }
  return v;
}

EpisodeResult Trainer::run_episode(const EpisodeOptions& opts) const {
  const auto& net = *scene_;
  sim::WorldState world = sim::reset(episode_config(cfg_, scene_, opts.env_seed));
  const auto conv = cog_.conv_features(cog_params_, rt_);
  const bool nearest = opts.nearest_targets || cfg_.disable_cognition();
  Rng explore(opts.explore_seed);
  const std::size_t n_count = cfg_.pursuers;

  EpisodeResult res;
  res.records.resize(n_count);
  for (std::size_t n = 0; n < n_count; ++n) {
    res.records[n].agent = static_cast<std::uint32_t>(n);
    res.records[n].epoch = opts.epoch;
    res.records[n].scenario = cfg_.scenario;
  }

  auto snapshot = [&](const sim::WorldState& w, std::span<const double> bv, std::uint32_t target) {
    replay::CognitionSnapshot s;
    s.bv.assign(bv.begin(), bv.end());
    for (std::size_t n = 0; n < w.pursuer_count; ++n) s.pursuers.push_back(w.pursuer(n).location);
    for (std::size_t m = 0; m < w.evader_count; ++m) s.evaders.push_back(w.evader(m).location);
    s.captured = w.captured_mask();
    s.target = target;
    return s;
  };

  View view = observe(world, conv, nearest);
  std::vector<sim::PursuerCommand> commands(n_count);
  std::vector<roadnet::Turn> actions(n_count);
  while (!world.done) {
    const auto& targets = view.attention.targets;
    if (opts.record_snapshots)
      for (std::size_t n = 0; n < n_count; ++n) res.records[n].snapshots.push_back(snapshot(world, view.bv, targets[n]));
    for (std::size_t n = 0; n < n_count; ++n) {
      if (opts.override_action) {
        actions[n] = opts.override_action(world, n);
      } else {
        const auto feasible = sim::feasible_actions(world, n);
        const auto q = qnet_.q_values(agents_[n].online, view.states[n]);
        actions[n] = agent::select_action(q, feasible, opts.epsilon, explore);
      }
      commands[n] = {actions[n], targets[n]};
    }
    const sim::StepEvents events = sim::step(world, commands);
    std::optional<View> next;
    if (!world.done) next = observe(world, conv, nearest);

    std::vector<double> rewards(n_count);
    for (std::size_t n = 0; n < n_count; ++n) {
      const auto& tgt = world.evader(targets[n]);
      const bool captured = tgt.captured;
      const double d_t = captured ? 0.0 : sim::capture_distance(net, world.pursuer(n).location, tgt.location);
      rewards[n] = agent::compute_reward(captured, d_t, view.distances[n], cfg_.reward);
      agent::Transition tr;
      tr.state = view.states[n];
      tr.action = actions[n];
      tr.reward = rewards[n];
      tr.terminal = captured || world.step >= cfg_.max_steps || !next;
      tr.next_state = tr.terminal ? tr.state : next->states[n];
      auto& rec = res.records[n];
      rec.transitions.push_back(std::move(tr));
      rec.distances.push_back(d_t);
      rec.captures.push_back(captured);
    }
    res.captures += events.captures.size();
    if (opts.trace) {
      StepTrace st;
      st.t = world.step - 1;
      st.world = &world;
      st.events = &events;
      st.attention = &view.attention;
      st.targets = targets;
      st.actions = actions;
      st.rewards = rewards;
      opts.trace(st);
    }
    if (next) {
      view = std::move(*next);
    } else if (opts.record_snapshots) {
      const auto bv = sim::count_background(world);
      for (std::size_t n = 0; n < n_count; ++n)
        res.records[n].snapshots.push_back(snapshot(world, bv, res.records[n].snapshots.back().target));
    }
  }

  res.length = world.step;
  res.success = world.evaders_remaining() == 0;
  for (const auto& rec : res.records) {
    res.total_rewards.push_back(rec.total_reward());
    res.step_rewards.push_back(rec.mean_reward());
  }
  return res;
}

std::vector<double> Trainer::rebuild_state(const replay::CognitionSnapshot& snap, std::uint32_t agent,
                                           cognition::FeatureCache* fcache,
                                           cognition::AttentionCache* acache) const {
  const auto& net = *scene_;
  const auto f = cog_.traffic_feature(cog_params_, rt_, snap.bv, fcache);
  std::vector<double> row(cfg_.evaders, 0.0);
  if (!cfg_.disable_cognition()) {
    std::vector<double> pe, ee;
    for (const auto& l : snap.pursuers) {
      auto e = cognition::location_embedding(net, l);
      pe.insert(pe.end(), e.begin(), e.end());
    }
    for (const auto& l : snap.evaders) {
      auto e = cognition::location_embedding(net, l);
      ee.insert(ee.end(), e.begin(), e.end());
    }
    const auto ga = cog_.group_attention(cog_params_, pe, ee, f, snap.captured, acache);
    const auto r = ga.row(agent);
    row.assign(r.begin(), r.end());
  }
  return agent::assemble_state(net, snap.pursuers.at(agent), snap.evaders.at(snap.target), f, row);
}

void Trainer::replay_entry(std::size_t n, const replay::EpisodeRecord& entry, double omega) {
  auto& nets = agents_[n];
  for (const auto& tr : entry.transitions) {
    const auto res = agent::td_gradient(qnet_, nets, tr, omega, cfg_.gamma);
    nn::sgd_step(nets.online, res.grads, cfg_.alpha);
    agent::soft_update(nets, cfg_.tau);
  }
}

void Trainer::replay_entry_cotrain(std::size_t n, const replay::EpisodeRecord& entry, double omega) {
  if (entry.snapshots.size() != entry.transitions.size() + 1) {
    replay_entry(n, entry, omega);
    return;
  }
  auto& nets = agents_[n];
  const std::size_t e = cog_.embed_width(), fd = cfg_.f_dim, m_count = cfg_.evaders;
  for (std::size_t t = 0; t < entry.transitions.size(); ++t) {
    const auto& stored = entry.transitions[t];
    cognition::FeatureCache fc;
    cognition::AttentionCache ac;
    agent::Transition tr;
    tr.state = rebuild_state(entry.snapshots[t], entry.agent, &fc, &ac);
    tr.action = stored.action;
    tr.reward = stored.reward;
    tr.terminal = stored.terminal;
    tr.next_state = tr.terminal ? tr.state : rebuild_state(entry.snapshots[t + 1], entry.agent, nullptr, nullptr);

    std::vector<double> sg;
    const auto res = agent::td_gradient(qnet_, nets, tr, omega, cfg_.gamma, &sg);
    nn::ParamSet cg = cog_params_.zeros_like();
    std::vector<double> df(sg.begin() + 2 * e, sg.begin() + 2 * e + fd);
    if (!cfg_.disable_cognition()) {
      std::vector<double> dwg(entry.snapshots[t].pursuers.size() * m_count, 0.0);
      std::copy_n(sg.begin() + 2 * e + fd, m_count, dwg.begin() + entry.agent * m_count);
      std::vector<double> df_att;
      cog_.attention_backward(cog_params_, ac, dwg, cg, &df_att);
      for (std::size_t i = 0; i < fd; ++i) df[i] += df_att[i];
    }
    cog_.feature_backward(cog_params_, fc, df, cg);
    nn::sgd_step(nets.online, res.grads, cfg_.alpha);
    nn::sgd_step(cog_params_, cg, cfg_.alpha);
    agent::soft_update(nets, cfg_.tau);
  }
}

std::vector<std::vector<prioritizer::PnInput>> Trainer::train_round(std::uint64_t epoch, double beta) {
  if (!buffer_.full()) throw std::logic_error("training round needs a full buffer");
  const std::size_t n_count = agents_.size();
  std::vector<std::vector<prioritizer::PnInput>> used(n_count);
  for (std::size_t n = 0; n < n_count; ++n) {
    prioritizer::PrioritySet ps;
    std::vector<prioritizer::PnInput> inputs;
    if (cfg_.disable_prioritization()) {
      ps = prioritizer::uniform_priorities(buffer_.size());
    } else {
      inputs.reserve(buffer_.size());
      for (const auto& entry : buffer_.entries())
        inputs.push_back(prioritizer::featurize(entry, qnet_, agents_[n], cfg_.gamma));
      ps = prioritizer::prioritize(pn_.predict_batch(pn_params_, inputs), beta, cfg_.zeta, cfg_.lambda);
    }
    Rng rng(derive_seed(cfg_.seed, {kStreamSample, epoch, n}));
    const auto picks = replay::sample_personalized(ps.p, cfg_.k_sample, rng);
    if (audit_) {
      std::vector<bool> sampled(buffer_.size(), false);
      for (auto i : picks) sampled[i] = true;
      for (std::size_t i = 0; i < buffer_.size(); ++i)
        audit_({epoch, static_cast<std::uint32_t>(n), buffer_[i].id, ps.gains[i], ps.q[i], ps.p[i], ps.omega[i],
                sampled[i]});
    }
    for (auto i : picks) {
      if (cfg_.cotrain_cognition && n == 0)
        replay_entry_cotrain(n, buffer_[i], ps.omega[i]);
      else
        replay_entry(n, buffer_[i], ps.omega[i]);
      if (!inputs.empty()) used[n].push_back(inputs[i]);
    }
  }
  return used;
}

EpochReport Trainer::run_epoch() {
  const std::uint64_t e = epoch_;
  EpochReport report;
  report.epoch = e;
  report.beta = prioritizer::beta_schedule(e, cfg_.max_epoch, cfg_.beta0);
  report.epsilon = epsilon_schedule(cfg_, e);

  std::vector<std::vector<prioritizer::PnInput>> pn_inputs;
  if (buffer_.full()) {
    pn_inputs = train_round(e, report.beta);
    report.trained = true;
  }

  EpisodeOptions opts;
  opts.env_seed = derive_seed(cfg_.seed, {kStreamEnv, e});
  opts.epsilon = report.epsilon;
  opts.explore_seed = derive_seed(cfg_.seed, {kStreamExplore, e});
  opts.record_snapshots = cfg_.cotrain_cognition;
  opts.epoch = e;
  EpisodeResult rollout = run_episode(opts);
  report.rewards = rollout.step_rewards;
  report.episode_rewards = rollout.total_rewards;
  report.episode_length = rollout.length;
  report.captures = rollout.captures;
  report.done = rollout.success;
  for (auto& rec : rollout.records) {
    rec.validate(cfg_.max_steps);
    buffer_.append(std::move(rec));
  }

  if (cfg_.separate_test_episode) {
    const std::size_t k = cfg_.test_episodes;
    report.test_rewards.assign(agents_.size(), 0.0);
    report.test_episode_rewards.assign(agents_.size(), 0.0);
    for (std::size_t i = 0; i < k; ++i) {
      EpisodeOptions test;
      test.env_seed = derive_seed(cfg_.seed, {kStreamTest, i});
      test.epoch = e;
      const EpisodeResult r = run_episode(test);
      for (std::size_t n = 0; n < agents_.size(); ++n) {
        report.test_rewards[n] += r.step_rewards[n] / static_cast<double>(k);
        report.test_episode_rewards[n] += r.total_rewards[n] / static_cast<double>(k);
      }
      report.test_length += static_cast<double>(r.length) / static_cast<double>(k);
      report.test_captures += r.captures;
      report.test_success += (r.success ? 1.0 : 0.0) / static_cast<double>(k);
    }
  } else {
    report.test_rewards = report.rewards;
    report.test_episode_rewards = report.episode_rewards;
    report.test_length = static_cast<double>(report.episode_length);
    report.test_captures = report.captures;
    report.test_success = report.done ? 1.0 : 0.0;
  }

  for (std::size_t n = 0; n < agents_.size(); ++n) report.delta_r.push_back(ledger_.reward_change(n, report.test_rewards[n]));

  if (report.trained && !cfg_.disable_prioritization()) {
    std::vector<prioritizer::PnInput> inputs;
    std::vector<double> realized;
    for (std::size_t n = 0; n < pn_inputs.size(); ++n)
      for (const auto& in : pn_inputs[n]) {
        inputs.push_back(in);
        realized.push_back(report.delta_r[n]);
      }
    if (!inputs.empty()) {
      report.pn_loss = pn_.train_step(pn_params_, inputs, realized, cfg_.pn_lr, cfg_.pn_grad_clip);
      report.pn_updated = true;
    }
  }
  ++epoch_;
  return report;
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  nn::Archive a;
  a.put_text("format", kFormat);
  a.put_text("config", to_config_text(cfg_));
  std::ostringstream map;
  roadnet::write_map(map, *scene_);
  a.put_text("scene", map.str());
  a.put("state.epoch", nn::Tensor::from({1}, {static_cast<double>(epoch_)}));
  a.put("state.buffer_next_id", nn::Tensor::from({1}, {static_cast<double>(buffer_.next_id())}));
  a.put_params("cognition.", cog_params_);
  a.put_params("pn.", pn_params_);
  for (std::size_t n = 0; n < agents_.size(); ++n) {
    a.put_params("agent_" + std::to_string(n) + "_online.", agents_[n].online);
    a.put_params("agent_" + std::to_string(n) + "_target.", agents_[n].target);
    const auto& h = ledger_.history(n);
    a.put("ledger." + std::to_string(n), nn::Tensor::from({h.size()}, std::vector<double>(h.begin(), h.end())));
  }
  a.put("buffer.size", nn::Tensor::from({1}, {static_cast<double>(buffer_.size())}));
  for (std::size_t i = 0; i < buffer_.size(); ++i) {
    const auto& ep = buffer_[i];
    const std::string p = "buffer." + std::to_string(i) + ".";
    const std::size_t t_count = ep.length(), w = ep.transitions.front().state.size();
    a.put(p + "meta", nn::Tensor::from({3}, {static_cast<double>(ep.id), static_cast<double>(ep.agent),
                                             static_cast<double>(ep.epoch)}));
    a.put_text(p + "scenario", ep.scenario);
    nn::Tensor s({t_count, w}), ns({t_count, w}), steps({t_count, 5});
    for (std::size_t t = 0; t < t_count; ++t) {
      const auto& tr = ep.transitions[t];
      std::copy(tr.state.begin(), tr.state.end(), s.values.begin() + t * w);
      std::copy(tr.next_state.begin(), tr.next_state.end(), ns.values.begin() + t * w);
      double* row = steps.data() + t * 5;
      row[0] = static_cast<double>(tr.action);
      row[1] = tr.reward;
      row[2] = tr.terminal ? 1.0 : 0.0;
      row[3] = ep.distances[t];
      row[4] = ep.captures[t] ? 1.0 : 0.0;
    }
    a.put(p + "states", std::move(s));
    a.put(p + "next_states", std::move(ns));
    a.put(p + "steps", std::move(steps));
    if (!ep.snapshots.empty()) {
      const std::size_t k = ep.snapshots.size(), lanes = ep.snapshots.front().bv.size();
      const std::size_t np = ep.snapshots.front().pursuers.size(), ne = ep.snapshots.front().evaders.size();
      nn::Tensor bv({k, lanes}), pl({k, np, 2}), el({k, ne, 2}), cap({k, ne}), tg({k});
      for (std::size_t j = 0; j < k; ++j) {
        const auto& sn = ep.snapshots[j];
        std::copy(sn.bv.begin(), sn.bv.end(), bv.values.begin() + j * lanes);
        for (std::size_t q = 0; q < np; ++q) {
          pl.values[(j * np + q) * 2] = sn.pursuers[q].lane;
          pl.values[(j * np + q) * 2 + 1] = sn.pursuers[q].offset;
        }
        for (std::size_t q = 0; q < ne; ++q) {
          el.values[(j * ne + q) * 2] = sn.evaders[q].lane;
          el.values[(j * ne + q) * 2 + 1] = sn.evaders[q].offset;
          cap.values[j * ne + q] = sn.captured[q] ? 1.0 : 0.0;
        }
        tg.values[j] = sn.target;
      }
      a.put(p + "snap_bv", std::move(bv));
      a.put(p + "snap_pursuers", std::move(pl));
      a.put(p + "snap_evaders", std::move(el));
      a.put(p + "snap_captured", std::move(cap));
      a.put(p + "snap_target", std::move(tg));
    }
  }
  a.save(path);
}

Trainer Trainer::load_checkpoint(const std::filesystem::path& path) {
  const nn::Archive a = nn::Archive::load(path);
  if (a.text("format") != kFormat) throw nn::CheckpointError("not a trainer checkpoint");
  TrainConfig cfg;
  std::istringstream ctext(a.text("config"));
  apply_config_text(cfg, ctext);
  std::istringstream mtext(a.text("scene"));
  auto scene = std::make_shared<const roadnet::RoadNetwork>(roadnet::parse_map(mtext));
  Trainer tr(cfg, scene);

  auto scalar = [&](const std::string& name) {
    const auto& t = a.tensor(name);
    if (t.size() != 1) throw nn::CheckpointError("checkpoint entry '" + name + "' is not a scalar");
    return t.values[0];
  };
  tr.epoch_ = static_cast<std::size_t>(scalar("state.epoch"));
  a.get_params("cognition.", tr.cog_params_);
  a.get_params("pn.", tr.pn_params_);
  for (std::size_t n = 0; n < tr.agents_.size(); ++n) {
    a.get_params("agent_" + std::to_string(n) + "_online.", tr.agents_[n].online);
    a.get_params("agent_" + std::to_string(n) + "_target.", tr.agents_[n].target);
    const auto& h = a.tensor("ledger." + std::to_string(n));
    tr.ledger_.restore(n, std::deque<double>(h.values.begin(), h.values.end()));
  }

  std::deque<replay::EpisodeRecord> entries;
  const auto count = static_cast<std::size_t>(scalar("buffer.size"));
  const std::size_t w = tr.qnet_.state_width();
  for (std::size_t i = 0; i < count; ++i) {
    const std::string p = "buffer." + std::to_string(i) + ".";
    replay::EpisodeRecord ep;
    const auto& meta = a.tensor(p + "meta");
    if (meta.size() != 3) throw nn::CheckpointError("corrupt buffer metadata");
    ep.id = static_cast<std::uint64_t>(meta.values[0]);
    ep.agent = static_cast<std::uint32_t>(meta.values[1]);
    ep.epoch = static_cast<std::uint64_t>(meta.values[2]);
    ep.scenario = a.text(p + "scenario");
    const auto& s = a.tensor(p + "states");
    const auto& ns = a.tensor(p + "next_states");
    const auto& steps = a.tensor(p + "steps");
    if (s.rank() != 2 || s.shape[1] != w || ns.shape != s.shape || steps.rank() != 2 || steps.shape[0] != s.shape[0] ||
        steps.shape[1] != 5)
      throw nn::CheckpointError("corrupt buffer entry " + std::to_string(i));
    const std::size_t t_count = s.shape[0];
    for (std::size_t t = 0; t < t_count; ++t) {
      agent::Transition trn;
      trn.state.assign(s.values.begin() + t * w, s.values.begin() + (t + 1) * w);
      trn.next_state.assign(ns.values.begin() + t * w, ns.values.begin() + (t + 1) * w);
      const double* row = steps.data() + t * 5;
      trn.action = static_cast<roadnet::Turn>(static_cast<int>(row[0]));
      trn.reward = row[1];
      trn.terminal = row[2] != 0.0;
      ep.transitions.push_back(std::move(trn));
      ep.distances.push_back(row[3]);
      ep.captures.push_back(row[4] != 0.0);
    }
    if (a.has(p + "snap_bv")) {
      const auto& bv = a.tensor(p + "snap_bv");
      const auto& pl = a.tensor(p + "snap_pursuers");
      const auto& el = a.tensor(p + "snap_evaders");
      const auto& cap = a.tensor(p + "snap_captured");
      const auto& tg = a.tensor(p + "snap_target");
      const std::size_t k = bv.shape.at(0), lanes = bv.shape.at(1), np = pl.shape.at(1), ne = el.shape.at(1);
      for (std::size_t j = 0; j < k; ++j) {
        replay::CognitionSnapshot sn;
        sn.bv.assign(bv.values.begin() + j * lanes, bv.values.begin() + (j + 1) * lanes);
        for (std::size_t q = 0; q < np; ++q)
          sn.pursuers.push_back({static_cast<roadnet::LaneId>(pl.values[(j * np + q) * 2]), pl.values[(j * np + q) * 2 + 1]});
        for (std::size_t q = 0; q < ne; ++q) {
          sn.evaders.push_back({static_cast<roadnet::LaneId>(el.values[(j * ne + q) * 2]), el.values[(j * ne + q) * 2 + 1]});
          sn.captured.push_back(cap.values[j * ne + q] != 0.0);
        }
        sn.target = static_cast<std::uint32_t>(tg.values[j]);
        ep.snapshots.push_back(std::move(sn));
      }
    }
    ep.validate(tr.cfg_.max_steps);
    entries.push_back(std::move(ep));
  }
  tr.buffer_.restore(std::move(entries), static_cast<std::uint64_t>(scalar("state.buffer_next_id")));
  return tr;
}

}  // namespace mvp::trainer
