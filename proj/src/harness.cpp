#include "mgrl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace mgrl {

using nlohmann::json;

const char* const kMetricsHeader =
    "epoch,env_steps,success_rate,mean_final_distance,expected_distance,critic_loss,"
    "actor_q_term,sl_loss,model_loss,mean_relabel_goal_distance";

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv_row(const EpochMetrics& m) {
  std::string row = std::to_string(m.epoch) + ',' + std::to_string(m.env_steps);
  for (double v : {m.success_rate, m.mean_final_distance, m.expected_distance, m.critic_loss,
                   m.actor_q_term, m.sl_loss, m.model_loss, m.mean_relabel_goal_distance})
    row += ',' + format_double(v);
  return row;
}

void apply_algo_preset(RunConfig& cfg) {
  AgentConfig& a = cfg.agent;
  if (cfg.algo == "ddpg") {
    a.relabel_mode = RelabelMode::kNone;
    a.use_sl = false;
  } else if (cfg.algo == "her") {
    a.relabel_mode = RelabelMode::kHerFuture;
    a.use_sl = false;
  } else if (cfg.algo == "mher") {
    a.relabel_mode = RelabelMode::kMbr;
    a.use_sl = true;
  } else if (cfg.algo == "gcsl") {
    a.relabel_mode = RelabelMode::kHerFuture;
    a.use_sl = true;
  } else if (cfg.algo == "mve") {
    a.relabel_mode = RelabelMode::kNone;
    a.use_sl = false;
  } else {
    throw std::invalid_argument("unknown algo: " + cfg.algo);
  }
}

void finalize_config(RunConfig& cfg, const GoalEnvSpec& spec) {
  if (cfg.episodes_per_epoch <= 0)
    cfg.episodes_per_epoch = (spec.name == "planar-reacher") ? 15 : 1;
}

bool uses_model(const RunConfig& cfg) {
  return cfg.agent.relabel_mode == RelabelMode::kMbr || cfg.sl_from_mbr || cfg.algo == "mve";
}

namespace {

json agent_to_json(const AgentConfig& c) {
  return json{{"gamma", c.gamma},
              {"alpha", c.alpha},
              {"use_sl", c.use_sl},
              {"n_mbr_steps", c.n_mbr_steps},
              {"relabel_mode", to_string(c.relabel_mode)},
              {"p_relabel", c.p_relabel},
              {"goal_noise_std", c.goal_noise_std},
              {"lr_actor", c.lr_actor},
              {"lr_critic", c.lr_critic},
              {"polyak", c.polyak},
              {"eps_random", c.eps_random},
              {"noise_std", c.noise_std},
              {"target_clip", c.target_clip},
              {"normalize_inputs", c.normalize_inputs},
              {"hidden_units", c.hidden_units}};
}

void overlay_agent_field(AgentConfig& a, const std::string& key, const json& v) {
  if (key == "gamma") a.gamma = v;
  else if (key == "alpha") a.alpha = v;
  else if (key == "use_sl") a.use_sl = v;
  else if (key == "n_mbr_steps") a.n_mbr_steps = v;
  else if (key == "relabel_mode") a.relabel_mode = relabel_mode_from_string(v);
  else if (key == "p_relabel") a.p_relabel = v;
  else if (key == "goal_noise_std") a.goal_noise_std = v;
  else if (key == "lr_actor") a.lr_actor = v;
  else if (key == "lr_critic") a.lr_critic = v;
  else if (key == "polyak") a.polyak = v;
  else if (key == "eps_random") a.eps_random = v;
  else if (key == "noise_std") a.noise_std = v;
  else if (key == "target_clip") a.target_clip = v;
  else if (key == "normalize_inputs") a.normalize_inputs = v;
  else if (key == "hidden_units") a.hidden_units = v;
  else throw std::invalid_argument("unknown agent config key: " + key);
}

}  // namespace

std::string run_config_to_json(const RunConfig& cfg) {
  json j{{"env", cfg.env},
         {"algo", cfg.algo},
         {"agent", agent_to_json(cfg.agent)},
         {"seed", cfg.seed},
         {"epochs", cfg.epochs},
         {"episodes_per_epoch", cfg.episodes_per_epoch},
         {"batches_per_episode", cfg.batches_per_episode},
         {"batch_size", cfg.batch_size},
         {"model_updates_per_batch", cfg.model_updates_per_batch},
         {"model_hidden_layers", cfg.model_hidden_layers},
         {"model_hidden_units", cfg.model_hidden_units},
         {"model_lr", cfg.model_lr},
         {"warmup_updates", cfg.warmup_updates},
         {"warmup_batch_size", cfg.warmup_batch_size},
         {"warmup_episodes", cfg.warmup_episodes},
         {"eval_episodes", cfg.eval_episodes},
         {"mve_horizon", cfg.mve_horizon},
         {"sl_from_mbr", cfg.sl_from_mbr},
         {"buffer_capacity", cfg.buffer_capacity},
         {"dump_relabel", cfg.dump_relabel},
         {"out_dir", cfg.out_dir}};
  return j.dump(2);
}

void overlay_config_json(RunConfig& cfg, const std::string& json_text) {
  json j = json::parse(json_text);
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "env") cfg.env = v;
    else if (key == "algo") cfg.algo = v;
    else if (key == "agent") {
      if (!v.is_object()) throw std::invalid_argument("agent config must be an object");
      for (const auto& [k2, v2] : v.items()) overlay_agent_field(cfg.agent, k2, v2);
    } else if (key == "seed") cfg.seed = v;
    else if (key == "epochs") cfg.epochs = v;
    else if (key == "episodes_per_epoch") cfg.episodes_per_epoch = v;
    else if (key == "batches_per_episode") cfg.batches_per_episode = v;
    else if (key == "batch_size") cfg.batch_size = v;
    else if (key == "model_updates_per_batch") cfg.model_updates_per_batch = v;
    else if (key == "model_hidden_layers") cfg.model_hidden_layers = v;
    else if (key == "model_hidden_units") cfg.model_hidden_units = v;
    else if (key == "model_lr") cfg.model_lr = v;
    else if (key == "warmup_updates") cfg.warmup_updates = v;
    else if (key == "warmup_batch_size") cfg.warmup_batch_size = v;
    else if (key == "warmup_episodes") cfg.warmup_episodes = v;
    else if (key == "eval_episodes") cfg.eval_episodes = v;
    else if (key == "mve_horizon") cfg.mve_horizon = v;
    else if (key == "sl_from_mbr") cfg.sl_from_mbr = v;
    else if (key == "buffer_capacity") cfg.buffer_capacity = v;
    else if (key == "dump_relabel") cfg.dump_relabel = v;
    else if (key == "out_dir") cfg.out_dir = v;
    else throw std::invalid_argument("unknown config key: " + key);
  }
}

EvalResult eval_rollouts_fixed(const Policy& policy, const GoalEnv& env, const Matrix& starts,
                               const Matrix& goals, double gamma) {
  if (starts.cols() != goals.cols() || starts.cols() == 0)
    throw std::invalid_argument("eval starts/goals mismatch");
  const int episodes = static_cast<int>(starts.cols());
  const int horizon = env.spec().horizon;
  Matrix states = starts;
  Vector ed = Vector::Zero(episodes);
  double disc = 1.0;
  for (int t = 0; t < horizon; ++t) {
    for (int e = 0; e < episodes; ++e)
      ed(e) += disc * (env.phi(states.col(e)) - goals.col(e)).squaredNorm();
    const Matrix actions = policy.act(states, goals);
    for (int e = 0; e < episodes; ++e)
      states.col(e) = env.transition(states.col(e), actions.col(e));
    disc *= gamma;
  }
  EvalResult out;
  double successes = 0.0, dist = 0.0;
  for (int e = 0; e < episodes; ++e) {
    successes += env.is_success(states.col(e), goals.col(e)) ? 1.0 : 0.0;
    dist += (env.phi(states.col(e)) - goals.col(e)).norm();
  }
  out.success_rate = successes / episodes;
  out.mean_final_distance = dist / episodes;
  out.expected_distance = ed.mean();
  return out;
}

EvalResult eval_rollouts(const Policy& policy, const GoalEnv& env, int episodes, double gamma,
                         Rng& rng) {
  if (episodes <= 0) throw std::invalid_argument("eval episode count must be positive");
  Matrix starts(env.spec().state_dim, episodes), goals(env.spec().goal_dim, episodes);
  for (int e = 0; e < episodes; ++e) {
    EnvState s = env.reset(rng);
    starts.col(e) = s.state;
    goals.col(e) = s.goal;
  }
  return eval_rollouts_fixed(policy, env, starts, goals, gamma);
}

double evaluate(const Policy& policy, const GoalEnv& env, int episodes, Rng& rng) {
  return eval_rollouts(policy, env, episodes, 0.98, rng).success_rate;
}

double expected_distance(const Policy& policy, const GoalEnv& env, int episodes, double gamma,
                         Rng& rng) {
  return eval_rollouts(policy, env, episodes, gamma, rng).expected_distance;
}

TrainRun::TrainRun(RunConfig cfg)
    : cfg_(std::move(cfg)),
      env_(make_env(cfg_.env)),
      buffer_(cfg_.buffer_capacity, env_->spec().horizon),
      env_rng_(derive_seed(cfg_.seed, "env")),
      explore_rng_(derive_seed(cfg_.seed, "explore")),
      sample_rng_(derive_seed(cfg_.seed, "sample")),
      relabel_rng_(derive_seed(cfg_.seed, "relabel")),
      eval_rng_(derive_seed(cfg_.seed, "eval")),
      warmup_rng_(derive_seed(cfg_.seed, "warmup")) {
  finalize_config(cfg_, env_->spec());
  Rng agent_rng(derive_seed(cfg_.seed, "agent-init"));
  if (cfg_.algo == "gcsl") {
    gcsl_ = std::make_unique<GcslAgent>(env_->spec(), cfg_.agent, agent_rng);
  } else {
    actor_critic_ = std::make_unique<ActorCritic>(env_->spec(), cfg_.agent, agent_rng);
  }
  if (uses_model(cfg_)) {
    Rng model_rng(derive_seed(cfg_.seed, "model-init"));
    model_ = std::make_unique<DynamicsModel>(env_->spec().state_dim, env_->spec().action_dim,
                                             cfg_.model_hidden_layers, cfg_.model_hidden_units,
                                             cfg_.model_lr, model_rng);
  }
}

TrainRun::~TrainRun() = default;

Vector TrainRun::policy_action(const Vector& state, const Vector& goal, bool explore,
                               Rng& rng) const {
  return gcsl_ ? gcsl_->select_action(state, goal, explore, rng)
               : actor_critic_->select_action(state, goal, explore, rng);
}

std::vector<Transition> TrainRun::collect_episode(bool random_actions, Rng& reset_rng,
                                                  Rng& action_rng) {
  const GoalEnvSpec& spec = env_->spec();
  EnvState s = env_->reset(reset_rng);
  std::vector<Transition> episode;
  episode.reserve(spec.horizon);
  for (int t = 0; t < spec.horizon; ++t) {
    Vector a(spec.action_dim);
    if (random_actions) {
      for (int d = 0; d < spec.action_dim; ++d)
        a(d) = action_rng.uniform(spec.action_low(d), spec.action_high(d));
    } else {
      a = policy_action(s.state, s.goal, true, action_rng);
    }
    EnvState next = env_->step(s, a);
    Transition tr;
    tr.state = s.state;
    tr.action = a;
    tr.next_state = next.state;
    tr.goal = s.goal;
    tr.reward = env_->sparse_reward(env_->phi(next.state), s.goal);
    tr.t = t;
    episode.push_back(std::move(tr));
    s = next;
  }
  return episode;
}

void TrainRun::warmup() {
  if (!uses_model(cfg_) || warmed_up_) return;
  warmed_up_ = true;
  for (int e = 0; e < cfg_.warmup_episodes; ++e)
    buffer_.store_episode(collect_episode(true, warmup_rng_, warmup_rng_));
  for (int u = 0; u < cfg_.warmup_updates; ++u)
    model_->train_step(buffer_.sample_transitions(cfg_.warmup_batch_size, warmup_rng_));
}

RelabeledBatch TrainRun::relabel(std::vector<Transition> batch) {
  const AgentConfig& a = cfg_.agent;
  switch (a.relabel_mode) {
    case RelabelMode::kNone:
      return relabel_none(std::move(batch));
    case RelabelMode::kHerFuture:
      return relabel_her_future(std::move(batch), buffer_, *env_, a.p_relabel, relabel_rng_);
    case RelabelMode::kMbr: {
      const ActorPolicy pol = gcsl_ ? gcsl_->policy() : actor_critic_->policy();
      return mbr_relabel(std::move(batch), *env_, pol, *model_, a.n_mbr_steps, a.p_relabel,
                         relabel_rng_);
    }
    case RelabelMode::kRandom:
      return relabel_baseline(std::move(batch), buffer_, *env_, BaselineRelabel::kRandom,
                              a.goal_noise_std, a.p_relabel, relabel_rng_);
    case RelabelMode::kGoalNoise:
      return relabel_baseline(std::move(batch), buffer_, *env_, BaselineRelabel::kGoalNoise,
                              a.goal_noise_std, a.p_relabel, relabel_rng_);
  }
  throw std::logic_error("bad relabel mode");
}

EpochMetrics TrainRun::run_epoch() {
  ++epoch_;
  EpochMetrics m;
  m.epoch = epoch_;
  double critic_sum = 0.0, q_sum = 0.0, sl_sum = 0.0, model_sum = 0.0;
  int batch_count = 0, model_count = 0;
  double relabel_dist_sum = 0.0;
  long long relabel_count = 0;

  auto track_relabels = [&](const RelabeledBatch& batch) {
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
      if (!batch.sl_mask[i]) continue;
      const double dist = (batch.rows[i].goal - batch.original_goal[i]).norm();
      relabel_dist_sum += dist;
      ++relabel_count;
      if (cfg_.dump_relabel)
        relabel_rows_.push_back(
            {epoch_, batch.original_goal[i], batch.rows[i].goal, batch.mbr_candidate[i]});
    }
  };

  for (int ep = 0; ep < cfg_.episodes_per_epoch; ++ep) {
    std::vector<Transition> episode = collect_episode(false, env_rng_, explore_rng_);
    if (gcsl_) gcsl_->observe_episode(*env_, episode);
    else actor_critic_->observe_episode(*env_, episode);
    buffer_.store_episode(std::move(episode));
    env_steps_ += env_->spec().horizon;

    for (int b = 0; b < cfg_.batches_per_episode; ++b) {
      std::vector<Transition> batch = buffer_.sample_transitions(cfg_.batch_size, sample_rng_);
      if (model_) {
        for (int u = 0; u < cfg_.model_updates_per_batch; ++u) {
          model_sum += model_->train_step(batch);
          ++model_count;
        }
      }
      RelabeledBatch main = relabel(batch);
      track_relabels(main);
      RelabeledBatch sl_copy;
      const RelabeledBatch* sl = &main;
      if (cfg_.sl_from_mbr) {
        const ActorPolicy pol = gcsl_ ? gcsl_->policy() : actor_critic_->policy();
        sl_copy = mbr_relabel(batch, *env_, pol, *model_, cfg_.agent.n_mbr_steps,
                              cfg_.agent.p_relabel, relabel_rng_);
        track_relabels(sl_copy);
        sl = &sl_copy;
      }
      if (gcsl_) {
        sl_sum += gcsl_->update(main);
      } else if (cfg_.algo == "mve") {
        const Vector targets = actor_critic_->mve_targets(main.rows, *env_, *model_, cfg_.mve_horizon);
        critic_sum += actor_critic_->critic_update_with_targets(main.rows, targets);
        const auto terms = actor_critic_->actor_update_joint(main, 0.0);
        q_sum += terms.q_term;
        sl_sum += terms.sl_term;
      } else {
        critic_sum += actor_critic_->critic_update(main);
        const double alpha_eff = cfg_.agent.use_sl ? cfg_.agent.alpha : 0.0;
        const auto terms = actor_critic_->actor_update_joint_split(main, *sl, alpha_eff);
        q_sum += terms.q_term;
        sl_sum += terms.sl_term;
      }
      if (actor_critic_) actor_critic_->update_target_networks();
      ++batch_count;
    }
  }

  const ActorPolicy pol = gcsl_ ? gcsl_->policy() : actor_critic_->policy();
  const EvalResult ev = eval_rollouts(pol, *env_, cfg_.eval_episodes, cfg_.agent.gamma, eval_rng_);
  m.env_steps = env_steps_;
  m.success_rate = ev.success_rate;
  m.mean_final_distance = ev.mean_final_distance;
  m.expected_distance = ev.expected_distance;
  m.critic_loss = batch_count ? critic_sum / batch_count : 0.0;
  m.actor_q_term = batch_count ? q_sum / batch_count : 0.0;
  m.sl_loss = batch_count ? sl_sum / batch_count : 0.0;
  m.model_loss = model_count ? model_sum / model_count : 0.0;
  m.mean_relabel_goal_distance = relabel_count ? relabel_dist_sum / relabel_count : 0.0;
  metrics_.push_back(m);
  return m;
}

std::vector<EpochMetrics> TrainRun::run(std::ostream* progress) {
  try {
    warmup();
    if (progress) *progress << kMetricsHeader << '\n';
    for (int e = 0; e < cfg_.epochs; ++e) {
      const EpochMetrics m = run_epoch();
      if (progress) *progress << metrics_csv_row(m) << std::endl;
    }
  } catch (const NumericalError& err) {
    if (!cfg_.out_dir.empty()) {
      std::filesystem::create_directories(cfg_.out_dir);
      std::ofstream out(std::filesystem::path(cfg_.out_dir) / "failure.json");
      out << json{{"epoch", epoch_}, {"error", err.what()}}.dump(2) << '\n';
    }
    throw;
  }
  write_outputs();
  return metrics_;
}

void TrainRun::write_outputs() const {
  if (cfg_.out_dir.empty()) return;
  const std::filesystem::path dir(cfg_.out_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.csv");
    out << kMetricsHeader << '\n';
    for (const auto& m : metrics_) out << metrics_csv_row(m) << '\n';
    if (!out) throw std::runtime_error("cannot write metrics.csv");
  }
  {
    std::ofstream out(dir / "config.json");
    out << run_config_to_json(cfg_) << '\n';
  }
  if (cfg_.dump_relabel) {
    const int gd = env_->spec().goal_dim;
    std::ofstream out(dir / "relabel_goals.csv");
    out << "epoch";
    for (int d = 0; d < gd; ++d) out << ",orig_" << d;
    for (int d = 0; d < gd; ++d) out << ",new_" << d;
    out << ",distance\n";
    for (const auto& row : relabel_rows_) {
      out << row.epoch;
      for (int d = 0; d < gd; ++d) out << ',' << format_double(row.original(d));
      for (int d = 0; d < gd; ++d) out << ',' << format_double(row.relabeled(d));
      out << ',' << format_double((row.relabeled - row.original).norm()) << '\n';
    }
    if (uses_model(cfg_)) {
      std::ofstream mc(dir / "mbr_candidates.csv");
      mc << "epoch,row,candidate_index,distance\n";
      int row_in_epoch = 0, last_epoch = -1;
      for (const auto& row : relabel_rows_) {
        if (row.candidate < 0) continue;
        if (row.epoch != last_epoch) {
          row_in_epoch = 0;
          last_epoch = row.epoch;
        }
        mc << row.epoch << ',' << row_in_epoch++ << ',' << row.candidate << ','
           << format_double((row.relabeled - row.original).norm()) << '\n';
      }
    }
  }
  if (actor_critic_) {
    actor_critic_->save(dir / "checkpoint");
  } else if (gcsl_) {
    std::filesystem::create_directories(dir / "checkpoint");
    save_mlp(gcsl_->net(), dir / "checkpoint" / "policy.bin");
  }
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0,1]");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = h - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double(const std::string& s) {
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad numeric field: " + s);
  }
}

}  // namespace

AggregateStats aggregate_stats(const std::vector<std::filesystem::path>& metrics_files) {
  if (metrics_files.empty()) throw std::invalid_argument("no metrics files");
  AggregateStats stats;
  for (const auto& path : metrics_files) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != kMetricsHeader)
      throw std::invalid_argument(path.string() + ": unexpected metrics header");
    std::vector<int> epochs;
    std::vector<long long> steps;
    std::vector<double> success;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != 10) throw std::invalid_argument(path.string() + ": bad metrics row");
      epochs.push_back(static_cast<int>(parse_double(fields[0])));
      steps.push_back(static_cast<long long>(parse_double(fields[1])));
      success.push_back(parse_double(fields[2]));
    }
    if (stats.success_per_seed.empty()) {
      stats.epochs = epochs;
      stats.env_steps = steps;
    } else if (epochs != stats.epochs || steps != stats.env_steps) {
      throw std::invalid_argument(path.string() + ": epochs misaligned across runs");
    }
    stats.success_per_seed.push_back(std::move(success));
  }
  const std::size_t n_epochs = stats.epochs.size();
  stats.median.resize(n_epochs);
  stats.q25.resize(n_epochs);
  stats.q75.resize(n_epochs);
  for (std::size_t e = 0; e < n_epochs; ++e) {
    std::vector<double> column;
    column.reserve(stats.success_per_seed.size());
    for (const auto& run : stats.success_per_seed) column.push_back(run[e]);
    stats.median[e] = quantile(column, 0.5);
    stats.q25[e] = quantile(column, 0.25);
    stats.q75[e] = quantile(column, 0.75);
  }
  return stats;
}

namespace {

std::ofstream open_output_file(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_aggregate_csv(const AggregateStats& stats, const std::filesystem::path& path) {
  std::ofstream out = open_output_file(path);
  out << "epoch,env_steps,success_median,success_q25,success_q75\n";
  for (std::size_t e = 0; e < stats.epochs.size(); ++e)
    out << stats.epochs[e] << ',' << stats.env_steps[e] << ',' << format_double(stats.median[e])
        << ',' << format_double(stats.q25[e]) << ',' << format_double(stats.q75[e]) << '\n';
}

AggregateStats read_aggregate_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch,env_steps,success_median,success_q25,success_q75")
    throw std::invalid_argument(path.string() + ": not an aggregate file");
  AggregateStats stats;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5) throw std::invalid_argument(path.string() + ": bad aggregate row");
    stats.epochs.push_back(static_cast<int>(parse_double(fields[0])));
    stats.env_steps.push_back(static_cast<long long>(parse_double(fields[1])));
    stats.median.push_back(parse_double(fields[2]));
    stats.q25.push_back(parse_double(fields[3]));
    stats.q75.push_back(parse_double(fields[4]));
  }
  if (stats.epochs.empty()) throw std::invalid_argument(path.string() + ": empty aggregate");
  return stats;
}

void render_success_svg(const AggregateStats& stats, const std::filesystem::path& path,
                        const std::string& title) {
  const double width = 640, height = 420;
  const double left = 64, right = 20, top = 44, bottom = 52;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  const double x_min = stats.epochs.front(), x_max = stats.epochs.back();
  auto sx = [&](double epoch) {
    return x_max > x_min ? left + (epoch - x_min) / (x_max - x_min) * plot_w : left + 0.5 * plot_w;
  };
  auto sy = [&](double rate) { return top + (1.0 - rate) * plot_h; };
  char buf[128];
  std::string svg;
  auto addf = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof(buf), fmt, args...);
    svg += buf;
  };
  addf("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
       "viewBox=\"0 0 %.0f %.0f\">\n",
       width, height, width, height);
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  // interquartile band
  svg += "<path d=\"";
  for (std::size_t e = 0; e < stats.epochs.size(); ++e)
    addf("%c%.2f %.2f ", e == 0 ? 'M' : 'L', sx(stats.epochs[e]), sy(stats.q25[e]));
  for (std::size_t e = stats.epochs.size(); e-- > 0;)
    addf("L%.2f %.2f ", sx(stats.epochs[e]), sy(stats.q75[e]));
  svg += "Z\" fill=\"#9ecae1\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";
  // median line
  svg += "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
  for (std::size_t e = 0; e < stats.epochs.size(); ++e)
    addf("%.2f,%.2f ", sx(stats.epochs[e]), sy(stats.median[e]));
  svg += "\"/>\n";
  // axes
  addf("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", left,
       top + plot_h, left + plot_w, top + plot_h);
  addf("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", left, top,
       left, top + plot_h);
  for (double r : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    addf("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", left - 4,
         sy(r), left, sy(r));
    addf("<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"end\">%.2f</text>\n",
         left - 8, sy(r) + 4, r);
  }
  const int tick_step = std::max(1, static_cast<int>((x_max - x_min) / 6.0));
  for (int e = static_cast<int>(x_min); e <= static_cast<int>(x_max); e += tick_step) {
    addf("<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\"/>\n", sx(e),
         top + plot_h, sx(e), top + plot_h + 4);
    addf("<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">%d</text>\n", sx(e),
         top + plot_h + 18, e);
  }
  addf("<text x=\"%.2f\" y=\"%.2f\" font-size=\"14\" text-anchor=\"middle\">%s</text>\n",
       left + plot_w / 2, top - 16, title.c_str());
  addf("<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n",
       left + plot_w / 2, height - 14);
  addf("<text x=\"16\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\" "
       "transform=\"rotate(-90 16 %.2f)\">success rate</text>\n",
       top + plot_h / 2, top + plot_h / 2);
  svg += "</svg>\n";
  std::ofstream out = open_output_file(path);
  out << svg;
}

void dump_relabel_goals(const std::filesystem::path& run_dir,
                        const std::filesystem::path& out_path) {
  const auto src = run_dir / "relabel_goals.csv";
  std::ifstream in(src);
  if (!in) throw std::invalid_argument("no relabel dump in " + run_dir.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,orig_0,", 0) != 0)
    throw std::invalid_argument(src.string() + ": unexpected relabel dump header");
  std::string content = line + '\n';
  const std::size_t columns = split_csv_line(line).size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != columns) throw std::invalid_argument(src.string() + ": ragged dump row");
    if (parse_double(fields.back()) < 0.0)
      throw std::invalid_argument(src.string() + ": negative relabel distance");
    content += line + '\n';
  }
  std::ofstream out = open_output_file(out_path);
  out << content;
}

double success_auc(const std::vector<EpochMetrics>& metrics) {
  double auc = 0.0;
  for (const auto& m : metrics) auc += m.success_rate;
  return auc;
}

}  // namespace mgrl
