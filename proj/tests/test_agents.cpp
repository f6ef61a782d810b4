#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "mgrl/agents.hpp"
#include "mgrl/envs.hpp"
#include "mgrl/rng.hpp"
#include "test_support.hpp"

using namespace mgrl;
using namespace mgrl::test;

namespace {

AgentConfig small_cfg() {
  AgentConfig cfg;
  cfg.hidden_units = 16;
  return cfg;
}

RelabeledBatch make_batch(std::vector<Transition> rows, bool masked) {
  RelabeledBatch b;
  b.sl_mask.assign(rows.size(), masked ? char(1) : char(0));
  b.mbr_candidate.assign(rows.size(), -1);
  for (const auto& r : rows) b.original_goal.push_back(r.goal);
  b.rows = std::move(rows);
  return b;
}

std::vector<Transition> sample_rows(const GoalEnv& env, int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Transition> rows;
  while (static_cast<int>(rows.size()) < count) {
    auto ep = random_episode(env, rng);
    for (auto& tr : ep) {
      rows.push_back(std::move(tr));
      if (static_cast<int>(rows.size()) == count) break;
    }
  }
  return rows;
}

struct Cols {
  Matrix states, actions, goals;
};

Cols columns(const std::vector<Transition>& rows) {
  Cols c;
  const int n = static_cast<int>(rows.size());
  c.states.resize(rows[0].state.size(), n);
  c.actions.resize(rows[0].action.size(), n);
  c.goals.resize(rows[0].goal.size(), n);
  for (int i = 0; i < n; ++i) {
    c.states.col(i) = rows[i].state;
    c.actions.col(i) = rows[i].action;
    c.goals.col(i) = rows[i].goal;
  }
  return c;
}

Transition make_row(const Vector& s, const Vector& a, const Vector& next, const Vector& g,
                    double r) {
  Transition tr;
  tr.state = s;
  tr.action = a;
  tr.next_state = next;
  tr.goal = g;
  tr.reward = r;
  tr.t = 0;
  return tr;
}

}  // namespace

TEST_CASE("agent config validation rejects out-of-range values") {
  auto env = make_env("point2d-large");
  Rng rng(1);
  auto bad = [&](auto mutate) {
    AgentConfig cfg = small_cfg();
    mutate(cfg);
    CHECK_THROWS_AS(ActorCritic(env->spec(), cfg, rng), std::invalid_argument);
    CHECK_THROWS_AS(GcslAgent(env->spec(), cfg, rng), std::invalid_argument);
  };
  bad([](AgentConfig& c) { c.gamma = 0.0; });
  bad([](AgentConfig& c) { c.gamma = 1.0; });
  bad([](AgentConfig& c) { c.gamma = -0.5; });
  bad([](AgentConfig& c) { c.alpha = -1.0; });
  bad([](AgentConfig& c) { c.n_mbr_steps = -1; });
  bad([](AgentConfig& c) { c.p_relabel = 1.5; });
  bad([](AgentConfig& c) { c.p_relabel = -0.1; });
  bad([](AgentConfig& c) { c.eps_random = -0.1; });
  bad([](AgentConfig& c) { c.eps_random = 1.1; });
  bad([](AgentConfig& c) { c.polyak = 2.0; });
  bad([](AgentConfig& c) { c.noise_std = -1.0; });
  bad([](AgentConfig& c) { c.goal_noise_std = -1.0; });
  bad([](AgentConfig& c) { c.lr_actor = 0.0; });
  bad([](AgentConfig& c) { c.lr_critic = -1e-3; });
  bad([](AgentConfig& c) { c.hidden_units = 0; });
  AgentConfig ok = small_cfg();
  CHECK_NOTHROW(ActorCritic(env->spec(), ok, rng));
}

TEST_CASE("deterministic action equals the actor policy output") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(11, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    Vector s = env->sample_start(rng);
    Vector g = env->sample_goal(rng);
    Vector a = agent.select_action(s, g, false, rng);
    Vector p = agent.policy().act(s, g);
    CHECK(bit_equal(a, p));
    CHECK((a.array() > env->spec().action_low.array()).all());
    CHECK((a.array() < env->spec().action_high.array()).all());
  }
}

TEST_CASE("eps_random=1 exploration is uniform over the action box") {
  auto env = make_env("point2d-large");
  AgentConfig cfg = small_cfg();
  cfg.eps_random = 1.0;
  Rng init(derive_seed(12, "agent-init"));
  ActorCritic agent(env->spec(), cfg, init);
  Rng rng(4);
  Vector s = Vector::Zero(2), g = Vector::Zero(2);
  const int n = 10000;
  Vector sum = Vector::Zero(2), lo = Vector::Constant(2, 1.0), hi = Vector::Constant(2, -1.0);
  for (int i = 0; i < n; ++i) {
    Vector a = agent.select_action(s, g, true, rng);
    REQUIRE((a.array() >= -1.0).all());
    REQUIRE((a.array() <= 1.0).all());
    sum += a;
    lo = lo.cwiseMin(a);
    hi = hi.cwiseMax(a);
  }
  // mean of U(-1,1) has std sqrt(1/3)/sqrt(n) ~ 0.0058; allow 5 sigma
  CHECK((sum / n).cwiseAbs().maxCoeff() < 0.03);
  CHECK(lo.maxCoeff() < -0.95);
  CHECK(hi.minCoeff() > 0.95);
}

TEST_CASE("uniform-action branch fires at the eps_random rate") {
  auto env = make_env("point2d-large");
  AgentConfig cfg = small_cfg();
  cfg.eps_random = 0.3;
  cfg.noise_std = 0.0;  // the noise branch now returns the deterministic action
  Rng init(derive_seed(13, "agent-init"));
  ActorCritic agent(env->spec(), cfg, init);
  Rng rng(5);
  Vector s(2), g(2);
  s << 1.0, -2.0;
  g << 3.0, 0.5;
  const Vector det = agent.select_action(s, g, false, rng);
  const int n = 10000;
  int uniform_count = 0;
  for (int i = 0; i < n; ++i) {
    Vector a = agent.select_action(s, g, true, rng);
    if (!bit_equal(a, det)) ++uniform_count;
  }
  // Binomial(1e4, 0.3): 5 sigma is about 230
  CHECK(uniform_count > 2770);
  CHECK(uniform_count < 3230);
}

TEST_CASE("noisy actions stay inside the action box and hit its faces") {
  auto env = make_env("point2d-large");
  AgentConfig cfg = small_cfg();
  cfg.eps_random = 0.0;
  cfg.noise_std = 3.0;  // huge noise so clipping must engage
  Rng init(derive_seed(14, "agent-init"));
  ActorCritic agent(env->spec(), cfg, init);
  Rng rng(6);
  int clipped = 0;
  for (int i = 0; i < 10000; ++i) {
    Vector s = env->sample_start(rng);
    Vector g = env->sample_goal(rng);
    Vector a = agent.select_action(s, g, true, rng);
    REQUIRE((a.array() >= -1.0).all());
    REQUIRE((a.array() <= 1.0).all());
    if ((a.cwiseAbs().array() == 1.0).any()) ++clipped;
  }
  CHECK(clipped > 1000);
}

TEST_CASE("one-step critic target arithmetic and clipping") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(15, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  Vector s(2), a(2), next(2), g(2);
  s << 0.0, 0.0;
  a << 1.0, 0.0;
  next << 1.0, 0.0;
  g << 4.0, 4.0;

  set_constant_output(agent.mutable_critic_target(), -5.0);
  CHECK(agent.critic_target(make_row(s, a, next, g, -1.0)) ==
        doctest::Approx(-1.0 + 0.98 * -5.0).epsilon(1e-12));

  set_constant_output(agent.mutable_critic_target(), -80.0);
  CHECK(agent.critic_target(make_row(s, a, next, g, -1.0)) == -1.0 / (1.0 - 0.98));

  set_constant_output(agent.mutable_critic_target(), 0.0);
  CHECK(agent.critic_target(make_row(s, a, next, g, 0.0)) == 0.0);

  set_constant_output(agent.mutable_critic_target(), 3.0);
  CHECK(agent.critic_target(make_row(s, a, next, g, 0.0)) == 0.0);  // positive targets clip to 0

  AgentConfig unclipped = small_cfg();
  unclipped.target_clip = false;
  Rng init2(derive_seed(15, "agent-init"));
  ActorCritic raw(env->spec(), unclipped, init2);
  set_constant_output(raw.mutable_critic_target(), -80.0);
  CHECK(raw.critic_target(make_row(s, a, next, g, -1.0)) ==
        doctest::Approx(-1.0 + 0.98 * -80.0).epsilon(1e-12));
}

TEST_CASE("critic regression onto its own predictions is a no-op") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(16, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  auto rows = sample_rows(*env, 16, 7);
  Cols c = columns(rows);
  Vector targets = agent.q_values(c.states, c.actions, c.goals);
  const Mlp before = agent.critic();
  double loss = agent.critic_update_with_targets(rows, targets);
  CHECK(loss == 0.0);
  CHECK(same_params(before, agent.critic()));
}

TEST_CASE("critic update rejects bad targets") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(17, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  auto rows = sample_rows(*env, 4, 8);
  CHECK_THROWS_AS(agent.critic_update_with_targets(rows, Vector::Zero(3)), std::invalid_argument);
  Vector nan_targets = Vector::Zero(4);
  nan_targets(2) = std::nan("");
  CHECK_THROWS_AS(agent.critic_update_with_targets(rows, nan_targets), NumericalError);
}

TEST_CASE("critic loss gradients match finite differences") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(18, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  auto rows = sample_rows(*env, 8, 9);
  Vector targets = agent.critic_targets(rows);
  LossGrad lg = agent.critic_loss_grads(rows, targets);
  double err = grad_check(
      agent.critic(), [&](const Mlp& m) { return agent.critic_loss_value(m, rows, targets); },
      lg.grads, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("joint actor loss gradients match finite differences") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(19, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  auto rows = sample_rows(*env, 8, 10);
  RelabeledBatch rl = make_batch(rows, false);
  RelabeledBatch sl = make_batch(rows, false);
  for (std::size_t i = 0; i < sl.sl_mask.size(); i += 2) sl.sl_mask[i] = 1;

  for (double alpha : {0.0, 3.0}) {
    ActorCritic::JointGrads jg = agent.joint_loss_grads(rl, sl, alpha);
    double err = grad_check(
        agent.actor(), [&](const Mlp& m) { return agent.joint_loss_value(m, rl, sl, alpha); },
        jg.grads, 1e-5);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("alpha=0 actor step ignores the supervised batch") {
  auto env = make_env("point2d-large");
  auto rows = sample_rows(*env, 16, 11);
  Rng init_a(derive_seed(20, "agent-init"));
  Rng init_b(derive_seed(20, "agent-init"));
  ActorCritic a(env->spec(), small_cfg(), init_a);
  ActorCritic b(env->spec(), small_cfg(), init_b);
  REQUIRE(same_params(a.actor(), b.actor()));

  RelabeledBatch rl = make_batch(rows, false);
  RelabeledBatch masked = make_batch(rows, true);
  auto terms_a = a.actor_update_joint_split(rl, masked, 0.0);
  auto terms_b = b.actor_update_joint_split(rl, rl, 0.0);
  CHECK(same_params(a.actor(), b.actor()));
  CHECK(terms_a.q_term == terms_b.q_term);
  CHECK(terms_a.sl_term > 0.0);  // reported even though it contributed nothing
  CHECK(terms_b.sl_term == 0.0);
}

TEST_CASE("supervised term vanishes when actions already match the policy") {
  auto env = make_env("point2d-large");
  AgentConfig cfg = small_cfg();
  cfg.normalize_inputs = false;
  Rng init(derive_seed(21, "agent-init"));
  ActorCritic agent(env->spec(), cfg, init);
  auto rows = sample_rows(*env, 12, 12);
  Cols c = columns(rows);
  Matrix pi = agent.actions(c.states, c.goals);
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) rows[i].action = pi.col(i);
  RelabeledBatch batch = make_batch(rows, true);
  auto jg = agent.joint_loss_grads(batch, batch, 3.0);
  CHECK(jg.terms.sl_term == 0.0);
}

TEST_CASE("actor gradient is invariant to a constant critic offset") {
  auto env = make_env("point2d-large");
  auto rows = sample_rows(*env, 16, 13);
  Rng init_a(derive_seed(22, "agent-init"));
  Rng init_b(derive_seed(22, "agent-init"));
  ActorCritic a(env->spec(), small_cfg(), init_a);
  ActorCritic b(env->spec(), small_cfg(), init_b);
  b.mutable_critic().biases.back()(0) += 5.0;

  RelabeledBatch rl = make_batch(rows, false);
  auto terms_a = a.actor_update_joint(rl, 0.0);
  auto terms_b = b.actor_update_joint(rl, 0.0);
  CHECK(terms_b.q_term == doctest::Approx(terms_a.q_term - 5.0).epsilon(1e-12));
  CHECK(same_params(a.actor(), b.actor()));
}

TEST_CASE("target networks follow the geometric polyak path") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(23, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  const Mlp target0 = agent.actor_target();
  agent.mutable_actor().weights[0].array() += 1.0;
  const Mlp& online = agent.actor();
  const int k = 5;
  for (int i = 0; i < k; ++i) agent.update_target_networks();
  const double pk = std::pow(0.9, k);
  for (std::size_t l = 0; l < online.weights.size(); ++l) {
    Matrix expect = online.weights[l] + pk * (target0.weights[l] - online.weights[l]);
    CHECK((agent.actor_target().weights[l] - expect).cwiseAbs().maxCoeff() < 1e-12);
  }
  // critic was never perturbed, so its target must still match it exactly
  CHECK(same_params(agent.critic_target_net(), agent.critic()));
}

TEST_CASE("mve target with horizon 1 equals the one-step target") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(24, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  EnvOracleModel model(*env);
  auto rows = sample_rows(*env, 16, 14);
  Vector one_step = agent.critic_targets(rows);
  Vector mve = agent.mve_targets(rows, *env, model, 1);
  CHECK((mve - one_step).cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(agent.mve_targets(rows, *env, model, 0), std::invalid_argument);
}

TEST_CASE("mve target two-step arithmetic") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(25, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  set_constant_output(agent.mutable_critic_target(), -5.0);
  EnvOracleModel model(*env);
  Vector s(2), a(2), next(2), g(2);
  s << -4.0, -4.0;
  a << 0.0, 0.0;
  next << -4.0, -4.0;
  g << 4.0, 4.0;  // unreachable within two unit steps, so both rewards are -1
  Transition row = make_row(s, a, next, g, -1.0);
  double y = agent.mve_target(row, *env, model, 2);
  CHECK(y == doctest::Approx(-1.0 - 0.98 - 0.9604 * 5.0).epsilon(1e-12));
  CHECK(y == doctest::Approx(-6.782).epsilon(1e-12));
}

TEST_CASE("mve target equals a hand-rolled model expansion") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(26, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  EnvOracleModel model(*env);
  auto rows = sample_rows(*env, 16, 15);
  const int horizon = 3;
  Vector batched = agent.mve_targets(rows, *env, model, horizon);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Transition& row = rows[i];
    double y = row.reward;
    double disc = 0.98;
    Matrix cur = Matrix(row.next_state);
    Matrix goal = Matrix(row.goal);
    for (int h = 1; h < horizon; ++h) {
      y += disc * env->sparse_reward(env->phi(cur.col(0)), row.goal);
      disc *= 0.98;
      cur = model.predict_next(cur, agent.target_actions(cur, goal));
    }
    y += disc * agent.target_q_values(cur, agent.target_actions(cur, goal), goal)(0);
    y = std::min(0.0, std::max(-1.0 / (1.0 - 0.98), y));
    CHECK(agent.mve_target(row, *env, model, horizon) == doctest::Approx(y).epsilon(1e-12));
    CHECK(batched(i) == doctest::Approx(y).epsilon(1e-12));
  }
}

TEST_CASE("gcsl loss definition matches the agent's supervised term") {
  auto env = make_env("point2d-large");
  AgentConfig cfg = small_cfg();
  cfg.normalize_inputs = false;
  Rng init_a(derive_seed(27, "agent-init"));
  Rng init_g(derive_seed(28, "agent-init"));
  ActorCritic ac(env->spec(), cfg, init_a);
  GcslAgent gcsl(env->spec(), cfg, init_g);
  gcsl.mutable_net() = ac.actor();

  auto rows = sample_rows(*env, 16, 16);
  RelabeledBatch batch = make_batch(rows, false);
  for (std::size_t i = 0; i < batch.sl_mask.size(); i += 3) batch.sl_mask[i] = 1;
  auto jg = ac.joint_loss_grads(batch, batch, 3.0);
  double gl = gcsl.loss_value(gcsl.net(), batch);
  CHECK(gl == doctest::Approx(jg.terms.sl_term).epsilon(1e-12));
}

TEST_CASE("gcsl update is a no-op without relabeled rows") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(29, "agent-init"));
  GcslAgent agent(env->spec(), small_cfg(), init);
  auto rows = sample_rows(*env, 8, 17);
  RelabeledBatch batch = make_batch(rows, false);
  const Mlp before = agent.net();
  CHECK(agent.update(batch) == 0.0);
  CHECK(same_params(before, agent.net()));
}

TEST_CASE("gcsl regression onto its own actions is a no-op") {
  auto env = make_env("point2d-large");
  AgentConfig cfg = small_cfg();
  cfg.normalize_inputs = false;
  Rng init(derive_seed(30, "agent-init"));
  GcslAgent agent(env->spec(), cfg, init);
  auto rows = sample_rows(*env, 8, 18);
  Cols c = columns(rows);
  Matrix pi = agent.policy().act(c.states, c.goals);
  for (int i = 0; i < static_cast<int>(rows.size()); ++i) rows[i].action = pi.col(i);
  RelabeledBatch batch = make_batch(rows, true);
  const Mlp before = agent.net();
  CHECK(agent.update(batch) == 0.0);
  CHECK(same_params(before, agent.net()));
}

TEST_CASE("gcsl gradients match finite differences") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(31, "agent-init"));
  GcslAgent agent(env->spec(), small_cfg(), init);
  auto rows = sample_rows(*env, 8, 19);
  RelabeledBatch batch = make_batch(rows, true);
  LossGrad lg = agent.loss_grads(batch);
  double err = grad_check(
      agent.net(), [&](const Mlp& m) { return agent.loss_value(m, batch); }, lg.grads, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("gcsl overfits a fixed batch") {
  auto env = make_env("point2d-large");
  AgentConfig cfg = small_cfg();
  cfg.hidden_units = 32;
  std::vector<double> first, last;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng init(derive_seed(seed, "agent-init"));
    GcslAgent agent(env->spec(), cfg, init);
    auto rows = sample_rows(*env, 16, 100 + seed);
    RelabeledBatch batch = make_batch(rows, true);
    std::vector<double> losses;
    for (int i = 0; i < 200; ++i) losses.push_back(agent.update(batch));
    CHECK(losses.back() < losses.front());
    first.push_back(losses.front());
    last.push_back(losses.back());
  }
  std::sort(first.begin(), first.end());
  std::sort(last.begin(), last.end());
  CHECK(last[2] < 0.5 * first[2]);
}

TEST_CASE("running normalizer statistics, clipping, and floor") {
  RunningNormalizer norm(2);
  CHECK(norm.count() == 0);
  Vector probe(2);
  probe << 7.0, -3.0;
  Vector id = norm.normalize(probe);
  CHECK(id(0) == 5.0);  // identity with clip before any data
  CHECK(id(1) == -3.0);

  Matrix samples(2, 4);
  samples << 1.0, 2.0, 3.0, 4.0, 10.0, 10.0, 10.0, 10.0;
  norm.update(samples);
  CHECK(norm.count() == 4);
  CHECK(norm.mean()(0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(norm.mean()(1) == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(norm.stddev()(0) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
  CHECK(norm.stddev()(1) == doctest::Approx(1e-2).epsilon(1e-12));  // variance floor

  Matrix normalized = norm.normalize(samples);
  CHECK(normalized.row(0).mean() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normalized.row(0).maxCoeff() <= 5.0);
  Vector far(2);
  far << 1000.0, 10.0;
  CHECK(norm.normalize(far)(0) == 5.0);
  CHECK(norm.normalize(far)(1) == 0.0);

  CHECK_THROWS_AS(norm.update(Matrix::Zero(3, 1)), std::invalid_argument);
  Matrix bad = Matrix::Zero(2, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(norm.update(bad), NumericalError);

  RunningNormalizer copy(2);
  copy.restore(norm.raw_sum(), norm.raw_sumsq(), norm.count());
  CHECK(bit_equal(copy.normalize(samples), normalized));
}

TEST_CASE("observe_episode feeds states plus desired and achieved goals") {
  auto env = make_env("point2d-large");
  Rng init(derive_seed(32, "agent-init"));
  ActorCritic agent(env->spec(), small_cfg(), init);
  Rng rng(20);
  auto episode = random_episode(*env, rng);
  episode.resize(3);
  agent.observe_episode(*env, episode);
  CHECK(agent.obs_normalizer().count() == 4);   // 3 states + the final next_state
  CHECK(agent.goal_normalizer().count() == 4);  // desired goal + 3 achieved goals
  Vector expect = episode[0].goal;
  for (const auto& tr : episode) expect += env->phi(tr.next_state);
  expect /= 4.0;
  CHECK((agent.goal_normalizer().mean() - expect).cwiseAbs().maxCoeff() < 1e-15);

  AgentConfig off = small_cfg();
  off.normalize_inputs = false;
  Rng init2(derive_seed(33, "agent-init"));
  ActorCritic plain(env->spec(), off, init2);
  plain.observe_episode(*env, episode);
  CHECK(plain.obs_normalizer().count() == 0);
}

TEST_CASE("actor-critic checkpoint round trip") {
  auto env = make_env("point2d-large");
  AgentConfig cfg = small_cfg();
  cfg.relabel_mode = RelabelMode::kMbr;
  cfg.use_sl = true;
  Rng init(derive_seed(34, "agent-init"));
  ActorCritic agent(env->spec(), cfg, init);
  Rng rng(21);
  auto episode = random_episode(*env, rng);
  agent.observe_episode(*env, episode);
  auto rows = sample_rows(*env, 16, 22);
  RelabeledBatch batch = make_batch(rows, false);
  agent.critic_update(batch);
  agent.actor_update_joint(batch, 0.0);
  agent.update_target_networks();

  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "mgrl_agent_roundtrip";
  fs::remove_all(dir);
  agent.save(dir);
  ActorCritic loaded = ActorCritic::load(dir);
  CHECK(same_params(agent.actor(), loaded.actor()));
  CHECK(same_params(agent.critic(), loaded.critic()));
  CHECK(same_params(agent.actor_target(), loaded.actor_target()));
  CHECK(same_params(agent.critic_target_net(), loaded.critic_target_net()));
  CHECK(loaded.config().gamma == agent.config().gamma);
  CHECK(loaded.config().relabel_mode == RelabelMode::kMbr);
  CHECK(loaded.config().use_sl == true);
  CHECK(bit_equal(loaded.obs_normalizer().raw_sum(), agent.obs_normalizer().raw_sum()));
  CHECK(bit_equal(loaded.goal_normalizer().raw_sumsq(), agent.goal_normalizer().raw_sumsq()));

  Rng probe(23);
  Vector s = env->sample_start(probe), g = env->sample_goal(probe);
  CHECK(bit_equal(agent.select_action(s, g, false, probe),
                  loaded.select_action(s, g, false, probe)));
  fs::remove_all(dir);
}
