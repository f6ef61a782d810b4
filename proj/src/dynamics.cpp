#include "mgrl/dynamics.hpp"

namespace mgrl {

DynamicsModel::DynamicsModel(int state_dim, int action_dim, int hidden_layers, int hidden_units,
                             double learning_rate, Rng& init_rng)
    : state_dim_(state_dim),
      action_dim_(action_dim),
      input_norm_(state_dim + action_dim),
      learning_rate_(learning_rate) {
  if (hidden_layers < 1) throw std::invalid_argument("dynamics model needs hidden layers");
  std::vector<int> sizes;
  sizes.push_back(state_dim + action_dim);
  for (int l = 0; l < hidden_layers; ++l) sizes.push_back(hidden_units);
  sizes.push_back(state_dim);
  net_ = init_mlp(sizes, OutputActivation::kIdentity, init_rng);
  adam_ = make_adam_state(net_);
}

Matrix DynamicsModel::stack_inputs(const Matrix& states, const Matrix& actions) const {
  if (states.rows() != state_dim_ || actions.rows() != action_dim_ ||
      states.cols() != actions.cols())
    throw std::invalid_argument("dynamics input shape mismatch");
  Matrix input(state_dim_ + action_dim_, states.cols());
  input.topRows(state_dim_) = states;
  input.bottomRows(action_dim_) = actions;
  return input;
}

double DynamicsModel::train_step(const std::vector<Transition>& batch) {
  if (batch.empty()) throw std::invalid_argument("empty dynamics batch");
  const int n = static_cast<int>(batch.size());
  Matrix states(state_dim_, n), actions(action_dim_, n), deltas(state_dim_, n);
  for (int i = 0; i < n; ++i) {
    states.col(i) = batch[i].state;
    actions.col(i) = batch[i].action;
    deltas.col(i) = batch[i].next_state - batch[i].state;
  }
  Matrix input = stack_inputs(states, actions);
  input_norm_.update(input);
  LossGrad lg = mse_loss_backward(net_, input_norm_.normalize(input), deltas);
  adam_step(net_, lg.grads, adam_, learning_rate_);
  ++steps_;
  return lg.loss;
}

Matrix DynamicsModel::predict_next(const Matrix& states, const Matrix& actions) const {
  return states + forward(net_, input_norm_.normalize(stack_inputs(states, actions)));
}

Vector DynamicsModel::predict_next(const Vector& state, const Vector& action) const {
  return predict_next(Matrix(state), Matrix(action)).col(0);
}

void DynamicsModel::restore(Mlp net, const Vector& norm_sum, const Vector& norm_sumsq,
                            std::int64_t norm_count) {
  if (net.input_dim() != state_dim_ + action_dim_ || net.output_dim() != state_dim_)
    throw std::invalid_argument("restored dynamics net has the wrong shape");
  net_ = std::move(net);
  adam_ = make_adam_state(net_);
  input_norm_.restore(norm_sum, norm_sumsq, norm_count);
}

std::vector<Matrix> policy_rollout_batch(const TransitionModel& model, const Policy& policy,
                                         const Matrix& seed_states, const Matrix& goals, int n) {
  if (n < 0) throw std::invalid_argument("rollout length must be non-negative");
  if (seed_states.cols() != goals.cols()) throw std::invalid_argument("rollout batch mismatch");
  std::vector<Matrix> states;
  states.reserve(n + 1);
  states.push_back(seed_states);
  for (int i = 0; i < n; ++i) {
    const Matrix actions = policy.act(states.back(), goals);
    states.push_back(model.predict_next(states.back(), actions));
  }
  return states;
}

VirtualTrajectory policy_rollout(const TransitionModel& model, const Policy& policy,
                                 const Vector& seed_state, const Vector& goal, int n) {
  const auto batched = policy_rollout_batch(model, policy, Matrix(seed_state), Matrix(goal), n);
  VirtualTrajectory traj;
  traj.goal = goal;
  traj.states.reserve(batched.size());
  for (const auto& m : batched) traj.states.push_back(m.col(0));
  return traj;
}

RelabeledBatch mbr_relabel(std::vector<Transition> batch, const GoalEnv& env, const Policy& policy,
                           const TransitionModel& model, int n, double p_relabel, Rng& rng) {
  if (p_relabel < 0.0 || p_relabel > 1.0) throw std::invalid_argument("p_relabel outside [0,1]");
  if (n < 0) throw std::invalid_argument("rollout length must be non-negative");
  RelabeledBatch out = relabel_none(std::move(batch));
  // Selection and candidate draws happen row by row so results match the
  // serial definition; the rollouts themselves consume no randomness and run
  // batched over the selected rows.
  std::vector<int> selected;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (rng.uniform() >= p_relabel) continue;
    out.mbr_candidate[i] = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n) + 1));
    selected.push_back(static_cast<int>(i));
  }
  if (selected.empty()) return out;
  const int count = static_cast<int>(selected.size());
  const int state_dim = out.rows.front().state.size();
  const int goal_dim = out.rows.front().goal.size();
  Matrix seeds(state_dim, count), goals(goal_dim, count);
  for (int c = 0; c < count; ++c) {
    seeds.col(c) = out.rows[selected[c]].next_state;
    goals.col(c) = out.rows[selected[c]].goal;
  }
  const std::vector<Matrix> rollout = policy_rollout_batch(model, policy, seeds, goals, n);
  for (int c = 0; c < count; ++c) {
    const int i = selected[c];
    Transition& tr = out.rows[i];
    tr.goal = env.phi(rollout[out.mbr_candidate[i]].col(c));
    tr.reward = env.sparse_reward(env.phi(tr.next_state), tr.goal);
    out.sl_mask[i] = 1;
  }
  return out;
}

}  // namespace mgrl
