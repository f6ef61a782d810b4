#pragma once

#include <filesystem>

#include "mgrl/dynamics.hpp"
#include "mgrl/envs.hpp"
#include "mgrl/mlp.hpp"
#include "mgrl/normalizer.hpp"
#include "mgrl/replay.hpp"

namespace mgrl {

enum class RelabelMode { kNone, kHerFuture, kMbr, kRandom, kGoalNoise };

RelabelMode relabel_mode_from_string(const std::string& s);
std::string to_string(RelabelMode mode);

struct AgentConfig {
  double gamma = 0.98;
  double alpha = 3.0;     // weight of the supervised actor term
  bool use_sl = false;    // effective weight is use_sl ? alpha : 0
  int n_mbr_steps = 5;    // model rollout length for relabeling
  RelabelMode relabel_mode = RelabelMode::kNone;
  double p_relabel = 0.8;
  double goal_noise_std = 0.01;  // goal-noise baseline
  double lr_actor = 1e-3;
  double lr_critic = 1e-3;
  double polyak = 0.9;
  double eps_random = 0.3;  // chance of a uniform random action while exploring
  double noise_std = 0.2;   // Gaussian action noise, as a fraction of the half-range
  bool target_clip = true;  // clip TD targets to [-1/(1-gamma), 0]
  bool normalize_inputs = true;
  int hidden_units = 256;   // actor and critic use three hidden layers
};

// View over an actor network plus the agent's input normalizers.
class ActorPolicy final : public Policy {
 public:
  ActorPolicy(const Mlp* net, const RunningNormalizer* obs_norm, const RunningNormalizer* goal_norm,
              bool normalize)
      : net_(net), obs_norm_(obs_norm), goal_norm_(goal_norm), normalize_(normalize) {}
  Matrix act(const Matrix& states, const Matrix& goals) const override;

 private:
  const Mlp* net_;
  const RunningNormalizer* obs_norm_;
  const RunningNormalizer* goal_norm_;
  bool normalize_;
};

// DDPG-family goal-conditioned agent: deterministic actor with a bounded
// output, Q critic, polyak-averaged target copies, and an optional supervised
// actor term computed over relabeled rows.
class ActorCritic {
 public:
  ActorCritic(const GoalEnvSpec& env_spec, const AgentConfig& cfg, Rng& init_rng);

  const AgentConfig& config() const { return cfg_; }

  // explore=false is the deterministic evaluation policy and draws nothing.
  // While exploring: with probability eps_random the action is uniform in the
  // box, otherwise Gaussian noise (noise_std of the half-range per dimension)
  // is added and the result clipped back to the box.
  Vector select_action(const Vector& state, const Vector& goal, bool explore, Rng& rng) const;

  Matrix actions(const Matrix& states, const Matrix& goals) const;
  Matrix target_actions(const Matrix& states, const Matrix& goals) const;
  Vector q_values(const Matrix& states, const Matrix& actions, const Matrix& goals) const;
  Vector target_q_values(const Matrix& states, const Matrix& actions, const Matrix& goals) const;

  // One-step TD target y = r + gamma * Q'(s', pi'(s', g), g), clipped to
  // [-1/(1-gamma), 0] when target clipping is on.
  Vector critic_targets(const std::vector<Transition>& rows) const;
  double critic_target(const Transition& row) const;

  // H-step model-expanded target: real reward now, model-predicted sparse
  // rewards for the next H-1 virtual steps, then the bootstrap. H=1 reduces
  // to critic_targets.
  Vector mve_targets(const std::vector<Transition>& rows, const GoalEnv& env,
                     const TransitionModel& model, int horizon) const;
  double mve_target(const Transition& row, const GoalEnv& env, const TransitionModel& model,
                    int horizon) const;

  // Critic regression onto fixed targets; one Adam step; returns pre-step loss.
  double critic_update(const RelabeledBatch& batch);
  double critic_update_with_targets(const std::vector<Transition>& rows, const Vector& targets);

  struct ActorLossTerms {
    double q_term = 0.0;   // -mean Q(s, pi(s,g), g)
    double sl_term = 0.0;  // mean ||a - pi(s,g)||^2 over masked rows (0 if none)
  };

  // Joint actor step: gradient of q_term plus alpha times the gradient of the
  // supervised term, with the critic held fixed. The split variant feeds the
  // two terms from different relabelings of the same sampled rows.
  ActorLossTerms actor_update_joint(const RelabeledBatch& batch, double alpha);
  ActorLossTerms actor_update_joint_split(const RelabeledBatch& rl_batch,
                                          const RelabeledBatch& sl_batch, double alpha);

  void update_target_networks();

  // Feeds the running input normalizers with a collected episode.
  void observe_episode(const GoalEnv& env, const std::vector<Transition>& episode);

  ActorPolicy policy() const;
  ActorPolicy target_policy() const;

  // Loss values and gradients without stepping, for gradient checks.
  double critic_loss_value(const Mlp& critic, const std::vector<Transition>& rows,
                           const Vector& targets) const;
  LossGrad critic_loss_grads(const std::vector<Transition>& rows, const Vector& targets) const;
  double joint_loss_value(const Mlp& actor, const RelabeledBatch& rl_batch,
                          const RelabeledBatch& sl_batch, double alpha) const;
  struct JointGrads {
    ActorLossTerms terms;
    GradientBundle grads;
  };
  JointGrads joint_loss_grads(const RelabeledBatch& rl_batch, const RelabeledBatch& sl_batch,
                              double alpha) const;

  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  const Mlp& actor_target() const { return actor_target_; }
  const Mlp& critic_target_net() const { return critic_target_; }
  Mlp& mutable_actor() { return actor_; }
  Mlp& mutable_critic() { return critic_; }
  Mlp& mutable_actor_target() { return actor_target_; }
  Mlp& mutable_critic_target() { return critic_target_; }
  const RunningNormalizer& obs_normalizer() const { return obs_norm_; }
  const RunningNormalizer& goal_normalizer() const { return goal_norm_; }

  void save(const std::filesystem::path& dir) const;
  static ActorCritic load(const std::filesystem::path& dir);

 private:
  ActorCritic() : obs_norm_(1), goal_norm_(1) {}
  Matrix actor_input(const Matrix& states, const Matrix& goals) const;
  Matrix critic_input(const Matrix& states, const Matrix& actions, const Matrix& goals) const;
  Vector clip_targets(Vector y) const;

  GoalEnvSpec env_spec_;
  AgentConfig cfg_;
  Mlp actor_, critic_, actor_target_, critic_target_;
  AdamState actor_adam_, critic_adam_;
  RunningNormalizer obs_norm_, goal_norm_;
};

// Goal-conditioned supervised learner: a lone policy network trained with
// mean ||a - pi(s, g')||^2 over relabeled rows. No critic, no target nets.
class GcslAgent {
 public:
  GcslAgent(const GoalEnvSpec& env_spec, const AgentConfig& cfg, Rng& init_rng);

  const AgentConfig& config() const { return cfg_; }
  Vector select_action(const Vector& state, const Vector& goal, bool explore, Rng& rng) const;

  // One Adam step on the masked rows; no-op returning 0 when none are masked.
  double update(const RelabeledBatch& batch);

  double loss_value(const Mlp& net, const RelabeledBatch& batch) const;
  LossGrad loss_grads(const RelabeledBatch& batch) const;

  void observe_episode(const GoalEnv& env, const std::vector<Transition>& episode);
  ActorPolicy policy() const;
  const Mlp& net() const { return net_; }
  Mlp& mutable_net() { return net_; }

 private:
  GoalEnvSpec env_spec_;
  AgentConfig cfg_;
  Mlp net_;
  AdamState adam_;
  RunningNormalizer obs_norm_, goal_norm_;
};

}  // namespace mgrl
