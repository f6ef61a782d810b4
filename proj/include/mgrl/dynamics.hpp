#pragma once

#include "mgrl/mlp.hpp"
#include "mgrl/normalizer.hpp"
#include "mgrl/replay.hpp"

namespace mgrl {

// Anything that can predict next states from (state, action) batches.
class TransitionModel {
 public:
  virtual ~TransitionModel() = default;
  // states, actions: (dim, count) -> next states (state_dim, count)
  virtual Matrix predict_next(const Matrix& states, const Matrix& actions) const = 0;
};

// Deterministic goal-conditioned policy, batched.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual Matrix act(const Matrix& states, const Matrix& goals) const = 0;
  Vector act(const Vector& state, const Vector& goal) const {
    return act(Matrix(state), Matrix(goal)).col(0);
  }
};

// Learned one-step model. The network regresses the state delta
// s_{t+1} - s_t from the normalized (s_t, a_t) pair; the training loss is
// mean ||(s_{t+1} - s_t) - net(s_t, a_t)||^2 over the batch.
class DynamicsModel final : public TransitionModel {
 public:
  DynamicsModel(int state_dim, int action_dim, int hidden_layers, int hidden_units,
                double learning_rate, Rng& init_rng);

  // One Adam step; input normalizer statistics absorb the batch first and are
  // held fixed within the step. Returns the pre-step loss.
  double train_step(const std::vector<Transition>& batch);

  Matrix predict_next(const Matrix& states, const Matrix& actions) const override;
  Vector predict_next(const Vector& state, const Vector& action) const;

  std::int64_t train_steps() const { return steps_; }
  const Mlp& net() const { return net_; }
  const RunningNormalizer& input_normalizer() const { return input_norm_; }
  void restore(Mlp net, const Vector& norm_sum, const Vector& norm_sumsq, std::int64_t norm_count);

 private:
  Matrix stack_inputs(const Matrix& states, const Matrix& actions) const;

  int state_dim_, action_dim_;
  Mlp net_;
  AdamState adam_;
  RunningNormalizer input_norm_;
  double learning_rate_;
  std::int64_t steps_ = 0;
};

// States of an n-step virtual rollout. states[0] is the (real) seed state and
// states[i] for i >= 1 the model predictions; actions come from the policy
// conditioned on the fixed goal.
struct VirtualTrajectory {
  std::vector<Vector> states;
  Vector goal;
};

VirtualTrajectory policy_rollout(const TransitionModel& model, const Policy& policy,
                                 const Vector& seed_state, const Vector& goal, int n);

// Batched rollout: element [i] of the result is the (state_dim, count) matrix
// of step-i states; result.size() == n + 1 and result[0] == seed_states.
std::vector<Matrix> policy_rollout_batch(const TransitionModel& model, const Policy& policy,
                                         const Matrix& seed_states, const Matrix& goals, int n);

// Model-based relabeling: for each selected row, roll the policy through the
// model for n steps starting from the row's next_state under the row's
// original goal, pick one of the n+1 visited states uniformly, and use its
// achieved goal as the new goal. States and actions stay untouched; rewards
// are recomputed from phi(next_state).
RelabeledBatch mbr_relabel(std::vector<Transition> batch, const GoalEnv& env, const Policy& policy,
                           const TransitionModel& model, int n, double p_relabel, Rng& rng);

}  // namespace mgrl
