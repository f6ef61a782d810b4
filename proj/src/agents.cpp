#include "mgrl/agents.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace mgrl {

using nlohmann::json;

RelabelMode relabel_mode_from_string(const std::string& s) {
  if (s == "none") return RelabelMode::kNone;
  if (s == "her-future") return RelabelMode::kHerFuture;
  if (s == "mbr") return RelabelMode::kMbr;
  if (s == "random") return RelabelMode::kRandom;
  if (s == "goal-noise") return RelabelMode::kGoalNoise;
  throw std::invalid_argument("unknown relabel mode: " + s);
}

std::string to_string(RelabelMode mode) {
  switch (mode) {
    case RelabelMode::kNone: return "none";
    case RelabelMode::kHerFuture: return "her-future";
    case RelabelMode::kMbr: return "mbr";
    case RelabelMode::kRandom: return "random";
    case RelabelMode::kGoalNoise: return "goal-noise";
  }
  throw std::logic_error("bad relabel mode");
}

namespace {

void validate_agent_config(const AgentConfig& cfg) {
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
  if (cfg.alpha < 0.0) throw std::invalid_argument("alpha must be >= 0");
  if (cfg.n_mbr_steps < 0) throw std::invalid_argument("n_mbr_steps must be >= 0");
  if (cfg.p_relabel < 0.0 || cfg.p_relabel > 1.0)
    throw std::invalid_argument("p_relabel must be in [0,1]");
  if (cfg.eps_random < 0.0 || cfg.eps_random > 1.0)
    throw std::invalid_argument("eps_random must be in [0,1]");
  if (cfg.polyak < 0.0 || cfg.polyak > 1.0) throw std::invalid_argument("polyak must be in [0,1]");
  if (cfg.noise_std < 0.0) throw std::invalid_argument("noise_std must be >= 0");
  if (cfg.goal_noise_std < 0.0) throw std::invalid_argument("goal_noise_std must be >= 0");
  if (cfg.lr_actor <= 0.0 || cfg.lr_critic <= 0.0)
    throw std::invalid_argument("learning rates must be > 0");
  if (cfg.hidden_units <= 0) throw std::invalid_argument("hidden_units must be > 0");
}

Matrix stack2(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

Matrix stack3(const Matrix& a, const Matrix& b, const Matrix& c) {
  Matrix out(a.rows() + b.rows() + c.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.middleRows(a.rows(), b.rows()) = b;
  out.bottomRows(c.rows()) = c;
  return out;
}

struct BatchColumns {
  Matrix states, actions, next_states, goals;
  Vector rewards;
};

BatchColumns split_rows(const std::vector<Transition>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty batch");
  const int n = static_cast<int>(rows.size());
  BatchColumns c;
  c.states.resize(rows.front().state.size(), n);
  c.actions.resize(rows.front().action.size(), n);
  c.next_states.resize(rows.front().next_state.size(), n);
  c.goals.resize(rows.front().goal.size(), n);
  c.rewards.resize(n);
  for (int i = 0; i < n; ++i) {
    c.states.col(i) = rows[i].state;
    c.actions.col(i) = rows[i].action;
    c.next_states.col(i) = rows[i].next_state;
    c.goals.col(i) = rows[i].goal;
    c.rewards(i) = rows[i].reward;
  }
  return c;
}

// Masked rows only, for the supervised term.
BatchColumns split_masked(const RelabeledBatch& batch) {
  std::vector<Transition> rows;
  for (std::size_t i = 0; i < batch.rows.size(); ++i)
    if (batch.sl_mask[i]) rows.push_back(batch.rows[i]);
  if (rows.empty()) return {};
  return split_rows(rows);
}

Vector explore_action(Vector deterministic, const GoalEnvSpec& spec, const AgentConfig& cfg,
                      Rng& rng) {
  if (rng.uniform() < cfg.eps_random) {
    Vector a(spec.action_dim);
    for (int d = 0; d < spec.action_dim; ++d)
      a(d) = rng.uniform(spec.action_low(d), spec.action_high(d));
    return a;
  }
  for (int d = 0; d < spec.action_dim; ++d) {
    const double half = 0.5 * (spec.action_high(d) - spec.action_low(d));
    deterministic(d) += cfg.noise_std * half * rng.normal();
  }
  return deterministic.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
}

}  // namespace

Matrix ActorPolicy::act(const Matrix& states, const Matrix& goals) const {
  if (!normalize_) return forward(*net_, stack2(states, goals));
  return forward(*net_, stack2(obs_norm_->normalize(states), goal_norm_->normalize(goals)));
}

ActorCritic::ActorCritic(const GoalEnvSpec& env_spec, const AgentConfig& cfg, Rng& init_rng)
    : env_spec_(env_spec),
      cfg_(cfg),
      obs_norm_(env_spec.state_dim),
      goal_norm_(env_spec.goal_dim) {
  validate_agent_config(cfg);
  const int h = cfg.hidden_units;
  actor_ = init_mlp({env_spec.state_dim + env_spec.goal_dim, h, h, h, env_spec.action_dim},
                    env_spec.action_low, env_spec.action_high, init_rng);
  critic_ = init_mlp({env_spec.state_dim + env_spec.action_dim + env_spec.goal_dim, h, h, h, 1},
                     OutputActivation::kIdentity, init_rng);
  actor_target_ = actor_;
  critic_target_ = critic_;
  actor_adam_ = make_adam_state(actor_);
  critic_adam_ = make_adam_state(critic_);
}

Matrix ActorCritic::actor_input(const Matrix& states, const Matrix& goals) const {
  if (!cfg_.normalize_inputs) return stack2(states, goals);
  return stack2(obs_norm_.normalize(states), goal_norm_.normalize(goals));
}

Matrix ActorCritic::critic_input(const Matrix& states, const Matrix& actions,
                                 const Matrix& goals) const {
  if (!cfg_.normalize_inputs) return stack3(states, actions, goals);
  return stack3(obs_norm_.normalize(states), actions, goal_norm_.normalize(goals));
}

Vector ActorCritic::select_action(const Vector& state, const Vector& goal, bool explore,
                                  Rng& rng) const {
  Vector a = forward(actor_, actor_input(Matrix(state), Matrix(goal))).col(0);
  if (!explore) return a;
  return explore_action(std::move(a), env_spec_, cfg_, rng);
}

Matrix ActorCritic::actions(const Matrix& states, const Matrix& goals) const {
  return forward(actor_, actor_input(states, goals));
}

Matrix ActorCritic::target_actions(const Matrix& states, const Matrix& goals) const {
  return forward(actor_target_, actor_input(states, goals));
}

Vector ActorCritic::q_values(const Matrix& states, const Matrix& actions,
                             const Matrix& goals) const {
  return forward(critic_, critic_input(states, actions, goals)).row(0).transpose();
}

Vector ActorCritic::target_q_values(const Matrix& states, const Matrix& actions,
                                    const Matrix& goals) const {
  return forward(critic_target_, critic_input(states, actions, goals)).row(0).transpose();
}

Vector ActorCritic::clip_targets(Vector y) const {
  if (!cfg_.target_clip) return y;
  const double floor = -1.0 / (1.0 - cfg_.gamma);
  return y.cwiseMax(floor).cwiseMin(0.0);
}

Vector ActorCritic::critic_targets(const std::vector<Transition>& rows) const {
  const BatchColumns c = split_rows(rows);
  const Matrix next_a = target_actions(c.next_states, c.goals);
  const Vector next_q = target_q_values(c.next_states, next_a, c.goals);
  return clip_targets(c.rewards + cfg_.gamma * next_q);
}

double ActorCritic::critic_target(const Transition& row) const {
  return critic_targets({row})(0);
}

Vector ActorCritic::mve_targets(const std::vector<Transition>& rows, const GoalEnv& env,
                                const TransitionModel& model, int horizon) const {
  if (horizon < 1) throw std::invalid_argument("mve horizon must be >= 1");
  const BatchColumns c = split_rows(rows);
  const int n = static_cast<int>(rows.size());
  Vector y = c.rewards;
  Matrix cur = c.next_states;  // virtual state \hat s_{t+i}, starting at the real s_{t+1}
  double disc = cfg_.gamma;
  for (int i = 1; i < horizon; ++i) {
    for (int k = 0; k < n; ++k)
      y(k) += disc * env.sparse_reward(env.phi(cur.col(k)), c.goals.col(k));
    disc *= cfg_.gamma;
    cur = model.predict_next(cur, target_actions(cur, c.goals));
  }
  const Vector boot = target_q_values(cur, target_actions(cur, c.goals), c.goals);
  y += disc * boot;
  return clip_targets(std::move(y));
}

double ActorCritic::mve_target(const Transition& row, const GoalEnv& env,
                               const TransitionModel& model, int horizon) const {
  return mve_targets({row}, env, model, horizon)(0);
}

double ActorCritic::critic_loss_value(const Mlp& critic, const std::vector<Transition>& rows,
                                      const Vector& targets) const {
  const BatchColumns c = split_rows(rows);
  const Matrix q = forward(critic, critic_input(c.states, c.actions, c.goals));
  return (q.row(0).transpose() - targets).squaredNorm() / static_cast<double>(rows.size());
}

LossGrad ActorCritic::critic_loss_grads(const std::vector<Transition>& rows,
                                        const Vector& targets) const {
  if (targets.size() != static_cast<Eigen::Index>(rows.size()))
    throw std::invalid_argument("target count mismatch");
  if (!targets.allFinite()) throw NumericalError("non-finite critic targets");
  const BatchColumns c = split_rows(rows);
  const double n = static_cast<double>(rows.size());
  ForwardCache cache = forward_cached(critic_, critic_input(c.states, c.actions, c.goals));
  const Matrix residual = cache.output() - targets.transpose();
  LossGrad out;
  out.loss = residual.squaredNorm() / n;
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite critic loss");
  out.grads = backward(critic_, cache, (2.0 / n) * residual);
  return out;
}

double ActorCritic::critic_update_with_targets(const std::vector<Transition>& rows,
                                               const Vector& targets) {
  LossGrad lg = critic_loss_grads(rows, targets);
  adam_step(critic_, lg.grads, critic_adam_, cfg_.lr_critic);
  return lg.loss;
}

double ActorCritic::critic_update(const RelabeledBatch& batch) {
  return critic_update_with_targets(batch.rows, critic_targets(batch.rows));
}

double ActorCritic::joint_loss_value(const Mlp& actor, const RelabeledBatch& rl_batch,
                                     const RelabeledBatch& sl_batch, double alpha) const {
  const BatchColumns c = split_rows(rl_batch.rows);
  const Matrix a = forward(actor, actor_input(c.states, c.goals));
  const Matrix q = forward(critic_, critic_input(c.states, a, c.goals));
  double loss = -q.row(0).mean();
  const BatchColumns m = split_masked(sl_batch);
  if (m.states.cols() > 0) {
    const Matrix pi = forward(actor, actor_input(m.states, m.goals));
    loss += alpha * (pi - m.actions).squaredNorm() / static_cast<double>(m.states.cols());
  }
  return loss;
}

ActorCritic::JointGrads ActorCritic::joint_loss_grads(const RelabeledBatch& rl_batch,
                                                      const RelabeledBatch& sl_batch,
                                                      double alpha) const {
  JointGrads out;
  const BatchColumns c = split_rows(rl_batch.rows);
  const double n = static_cast<double>(rl_batch.rows.size());
  ForwardCache actor_cache = forward_cached(actor_, actor_input(c.states, c.goals));
  ForwardCache critic_cache =
      forward_cached(critic_, critic_input(c.states, actor_cache.output(), c.goals));
  out.terms.q_term = -critic_cache.output().row(0).mean();
  if (!std::isfinite(out.terms.q_term)) throw NumericalError("non-finite actor objective");

  // dL/d(action) through the frozen critic, then back through the actor. The
  // action block sits between the (normalized) state and goal blocks.
  Matrix critic_in_grad;
  backward(critic_, critic_cache, Matrix::Constant(1, c.states.cols(), -1.0 / n),
           &critic_in_grad);
  const Matrix d_action = critic_in_grad.middleRows(env_spec_.state_dim, env_spec_.action_dim);
  out.grads = backward(actor_, actor_cache, d_action);

  const BatchColumns m = split_masked(sl_batch);
  if (m.states.cols() > 0) {
    const double count = static_cast<double>(m.states.cols());
    ForwardCache sl_cache = forward_cached(actor_, actor_input(m.states, m.goals));
    const Matrix residual = sl_cache.output() - m.actions;
    out.terms.sl_term = residual.squaredNorm() / count;
    if (alpha != 0.0) {
      GradientBundle sl_grads = backward(actor_, sl_cache, (2.0 / count) * residual);
      out.grads.add_scaled(sl_grads, alpha);
    }
  }
  return out;
}

ActorCritic::ActorLossTerms ActorCritic::actor_update_joint_split(const RelabeledBatch& rl_batch,
                                                                  const RelabeledBatch& sl_batch,
                                                                  double alpha) {
  JointGrads jg = joint_loss_grads(rl_batch, sl_batch, alpha);
  adam_step(actor_, jg.grads, actor_adam_, cfg_.lr_actor);
  return jg.terms;
}

ActorCritic::ActorLossTerms ActorCritic::actor_update_joint(const RelabeledBatch& batch,
                                                            double alpha) {
  return actor_update_joint_split(batch, batch, alpha);
}

void ActorCritic::update_target_networks() {
  polyak_update(actor_target_, actor_, cfg_.polyak);
  polyak_update(critic_target_, critic_, cfg_.polyak);
}

namespace {

// Normalizer food: every visited state, plus the desired goal and the
// achieved goal of each step (relabeled goals are drawn from the latter).
void feed_normalizers(const GoalEnv& env, const std::vector<Transition>& episode,
                      RunningNormalizer& obs_norm, RunningNormalizer& goal_norm) {
  const int t_count = static_cast<int>(episode.size());
  Matrix obs(obs_norm.dim(), t_count + 1);
  for (int t = 0; t < t_count; ++t) obs.col(t) = episode[t].state;
  obs.col(t_count) = episode.back().next_state;
  obs_norm.update(obs);
  Matrix goals(goal_norm.dim(), t_count + 1);
  goals.col(0) = episode.front().goal;
  for (int t = 0; t < t_count; ++t) goals.col(t + 1) = env.phi(episode[t].next_state);
  goal_norm.update(goals);
}

}  // namespace

void ActorCritic::observe_episode(const GoalEnv& env, const std::vector<Transition>& episode) {
  if (!cfg_.normalize_inputs || episode.empty()) return;
  feed_normalizers(env, episode, obs_norm_, goal_norm_);
}

ActorPolicy ActorCritic::policy() const {
  return ActorPolicy(&actor_, &obs_norm_, &goal_norm_, cfg_.normalize_inputs);
}

ActorPolicy ActorCritic::target_policy() const {
  return ActorPolicy(&actor_target_, &obs_norm_, &goal_norm_, cfg_.normalize_inputs);
}

GcslAgent::GcslAgent(const GoalEnvSpec& env_spec, const AgentConfig& cfg, Rng& init_rng)
    : env_spec_(env_spec),
      cfg_(cfg),
      obs_norm_(env_spec.state_dim),
      goal_norm_(env_spec.goal_dim) {
  validate_agent_config(cfg);
  const int h = cfg.hidden_units;
  net_ = init_mlp({env_spec.state_dim + env_spec.goal_dim, h, h, h, env_spec.action_dim},
                  env_spec.action_low, env_spec.action_high, init_rng);
  adam_ = make_adam_state(net_);
}

Vector GcslAgent::select_action(const Vector& state, const Vector& goal, bool explore,
                                Rng& rng) const {
  Vector a = policy().act(state, goal);
  if (!explore) return a;
  return explore_action(std::move(a), env_spec_, cfg_, rng);
}

double GcslAgent::loss_value(const Mlp& net, const RelabeledBatch& batch) const {
  const BatchColumns m = split_masked(batch);
  if (m.states.cols() == 0) return 0.0;
  const Matrix in = cfg_.normalize_inputs
                        ? stack2(obs_norm_.normalize(m.states), goal_norm_.normalize(m.goals))
                        : stack2(m.states, m.goals);
  return (forward(net, in) - m.actions).squaredNorm() / static_cast<double>(m.states.cols());
}

LossGrad GcslAgent::loss_grads(const RelabeledBatch& batch) const {
  const BatchColumns m = split_masked(batch);
  LossGrad out;
  out.grads = zero_gradients(net_);
  if (m.states.cols() == 0) return out;
  const double count = static_cast<double>(m.states.cols());
  const Matrix in = cfg_.normalize_inputs
                        ? stack2(obs_norm_.normalize(m.states), goal_norm_.normalize(m.goals))
                        : stack2(m.states, m.goals);
  ForwardCache cache = forward_cached(net_, in);
  const Matrix residual = cache.output() - m.actions;
  out.loss = residual.squaredNorm() / count;
  if (!std::isfinite(out.loss)) throw NumericalError("non-finite gcsl loss");
  out.grads = backward(net_, cache, (2.0 / count) * residual);
  return out;
}

double GcslAgent::update(const RelabeledBatch& batch) {
  if (batch.relabeled_count() == 0) return 0.0;
  LossGrad lg = loss_grads(batch);
  adam_step(net_, lg.grads, adam_, cfg_.lr_actor);
  return lg.loss;
}

void GcslAgent::observe_episode(const GoalEnv& env, const std::vector<Transition>& episode) {
  if (!cfg_.normalize_inputs || episode.empty()) return;
  feed_normalizers(env, episode, obs_norm_, goal_norm_);
}

ActorPolicy GcslAgent::policy() const {
  return ActorPolicy(&net_, &obs_norm_, &goal_norm_, cfg_.normalize_inputs);
}

namespace {

json config_to_json(const AgentConfig& c) {
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

AgentConfig config_from_json(const json& j) {
  AgentConfig c;
  c.gamma = j.at("gamma");
  c.alpha = j.at("alpha");
  c.use_sl = j.at("use_sl");
  c.n_mbr_steps = j.at("n_mbr_steps");
  c.relabel_mode = relabel_mode_from_string(j.at("relabel_mode"));
  c.p_relabel = j.at("p_relabel");
  c.goal_noise_std = j.at("goal_noise_std");
  c.lr_actor = j.at("lr_actor");
  c.lr_critic = j.at("lr_critic");
  c.polyak = j.at("polyak");
  c.eps_random = j.at("eps_random");
  c.noise_std = j.at("noise_std");
  c.target_clip = j.at("target_clip");
  c.normalize_inputs = j.at("normalize_inputs");
  c.hidden_units = j.at("hidden_units");
  return c;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

json normalizer_to_json(const RunningNormalizer& n) {
  return json{{"sum", vector_to_json(n.raw_sum())},
              {"sumsq", vector_to_json(n.raw_sumsq())},
              {"count", n.count()}};
}

void normalizer_from_json(const json& j, RunningNormalizer& n) {
  n.restore(vector_from_json(j.at("sum")), vector_from_json(j.at("sumsq")), j.at("count"));
}

}  // namespace

void ActorCritic::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  save_mlp(actor_, dir / "actor.bin");
  save_mlp(critic_, dir / "critic.bin");
  save_mlp(actor_target_, dir / "actor_target.bin");
  save_mlp(critic_target_, dir / "critic_target.bin");
  json j{{"env_spec",
          json{{"name", env_spec_.name},
               {"state_dim", env_spec_.state_dim},
               {"action_dim", env_spec_.action_dim},
               {"goal_dim", env_spec_.goal_dim},
               {"action_low", vector_to_json(env_spec_.action_low)},
               {"action_high", vector_to_json(env_spec_.action_high)},
               {"epsilon", env_spec_.epsilon},
               {"horizon", env_spec_.horizon}}},
         {"config", config_to_json(cfg_)},
         {"obs_normalizer", normalizer_to_json(obs_norm_)},
         {"goal_normalizer", normalizer_to_json(goal_norm_)}};
  std::ofstream out(dir / "agent.json");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write agent sidecar");
}

ActorCritic ActorCritic::load(const std::filesystem::path& dir) {
  std::ifstream in(dir / "agent.json");
  if (!in) throw std::runtime_error("cannot open agent sidecar in " + dir.string());
  json j = json::parse(in);
  ActorCritic agent;
  const json& e = j.at("env_spec");
  agent.env_spec_.name = e.at("name");
  agent.env_spec_.state_dim = e.at("state_dim");
  agent.env_spec_.action_dim = e.at("action_dim");
  agent.env_spec_.goal_dim = e.at("goal_dim");
  agent.env_spec_.action_low = vector_from_json(e.at("action_low"));
  agent.env_spec_.action_high = vector_from_json(e.at("action_high"));
  agent.env_spec_.epsilon = e.at("epsilon");
  agent.env_spec_.horizon = e.at("horizon");
  agent.cfg_ = config_from_json(j.at("config"));
  agent.obs_norm_ = RunningNormalizer(agent.env_spec_.state_dim);
  agent.goal_norm_ = RunningNormalizer(agent.env_spec_.goal_dim);
  normalizer_from_json(j.at("obs_normalizer"), agent.obs_norm_);
  normalizer_from_json(j.at("goal_normalizer"), agent.goal_norm_);
  agent.actor_ = load_mlp(dir / "actor.bin");
  agent.critic_ = load_mlp(dir / "critic.bin");
  agent.actor_target_ = load_mlp(dir / "actor_target.bin");
  agent.critic_target_ = load_mlp(dir / "critic_target.bin");
  agent.actor_adam_ = make_adam_state(agent.actor_);
  agent.critic_adam_ = make_adam_state(agent.critic_);
  return agent;
}

}  // namespace mgrl
