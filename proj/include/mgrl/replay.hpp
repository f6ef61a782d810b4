#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <vector>

#include "mgrl/envs.hpp"
#include "mgrl/rng.hpp"

namespace mgrl {

struct Transition {
  Vector state;
  Vector action;
  Vector next_state;
  Vector goal;
  double reward = -1.0;
  std::int64_t episode_id = -1;
  int t = 0;  // index within the episode, 0-based
};

// Replay buffer addressed by whole episodes. Eviction is FIFO at episode
// granularity, so future-state lookups stay valid for every stored episode.
class EpisodeBuffer {
 public:
  EpisodeBuffer(std::size_t capacity_transitions, int horizon);

  // Takes a full episode (length == horizon, one goal throughout, rewards in
  // {0,-1}, t running 0..horizon-1). Returns the assigned episode id.
  std::int64_t store_episode(std::vector<Transition> episode);

  std::size_t size() const { return episodes_.size() * static_cast<std::size_t>(horizon_); }
  std::size_t capacity() const { return capacity_; }
  int horizon() const { return horizon_; }
  std::int64_t episode_count() const { return next_id_ - first_id_; }

  bool contains_episode(std::int64_t id) const { return id >= first_id_ && id < next_id_; }
  const std::vector<Transition>& episode(std::int64_t id) const;

  // State s_index of an episode, index in [0, horizon]; index == horizon is
  // the final next_state.
  const Vector& state_at(std::int64_t id, int index) const;

  // Uniform over stored transitions, with replacement.
  std::vector<Transition> sample_transitions(int count, Rng& rng) const;

  // One row per transition: episode, t, state..., action..., next_state...,
  // goal..., reward.
  void dump_csv(std::ostream& out) const;

 private:
  std::deque<std::vector<Transition>> episodes_;
  std::int64_t first_id_ = 0;
  std::int64_t next_id_ = 0;
  std::size_t capacity_;
  int horizon_;
};

// A sampled batch after goal relabeling. Rows keep their real states and
// actions; only goals and rewards may differ from the stored transitions.
struct RelabeledBatch {
  std::vector<Transition> rows;
  std::vector<char> sl_mask;          // 1 iff the row was relabeled
  std::vector<Vector> original_goal;  // the desired goal each row was collected under
  std::vector<int> mbr_candidate;     // chosen rollout candidate index, -1 when not model-relabeled
  int stale_rows = 0;                 // rows whose episode was already evicted, left unrelabeled

  int relabeled_count() const;
};

RelabeledBatch relabel_none(std::vector<Transition> batch);

// Hindsight relabeling with the "future" strategy: a relabeled row at index t
// gets g' = phi(s_{t+k}), k uniform in {1, ..., horizon - t}. Each row is
// relabeled independently with probability p_relabel; rewards are recomputed
// from phi(next_state) against the new goal.
RelabeledBatch relabel_her_future(std::vector<Transition> batch, const EpisodeBuffer& buffer,
                                  const GoalEnv& env, double p_relabel, Rng& rng);

enum class BaselineRelabel {
  kRandom,     // g' uniform from the goal space
  kGoalNoise,  // future-strategy goal plus Gaussian noise
};

RelabeledBatch relabel_baseline(std::vector<Transition> batch, const EpisodeBuffer& buffer,
                                const GoalEnv& env, BaselineRelabel mode, double noise_std,
                                double p_relabel, Rng& rng);

}  // namespace mgrl
