#include "mgrl/replay.hpp"

#include <ostream>

namespace mgrl {

EpisodeBuffer::EpisodeBuffer(std::size_t capacity_transitions, int horizon)
    : capacity_(capacity_transitions), horizon_(horizon) {
  if (horizon <= 0) throw std::invalid_argument("horizon must be positive");
  if (capacity_transitions < static_cast<std::size_t>(horizon))
    throw std::invalid_argument("buffer capacity below one episode");
}

std::int64_t EpisodeBuffer::store_episode(std::vector<Transition> episode) {
  if (static_cast<int>(episode.size()) != horizon_)
    throw std::invalid_argument("ragged episode: expected length " + std::to_string(horizon_));
  for (int t = 0; t < horizon_; ++t) {
    const Transition& tr = episode[t];
    if (tr.t != t) throw std::invalid_argument("episode transitions out of order");
    if (tr.reward != 0.0 && tr.reward != -1.0)
      throw std::invalid_argument("reward outside {0,-1}");
    if (tr.goal.size() != episode.front().goal.size() ||
        (tr.goal.array() != episode.front().goal.array()).any())
      throw std::invalid_argument("goal changes within the episode");
  }
  const std::int64_t id = next_id_++;
  for (auto& tr : episode) tr.episode_id = id;
  episodes_.push_back(std::move(episode));
  while (size() > capacity_) {
    episodes_.pop_front();
    ++first_id_;
  }
  return id;
}

const std::vector<Transition>& EpisodeBuffer::episode(std::int64_t id) const {
  if (!contains_episode(id)) throw std::invalid_argument("episode not in buffer");
  return episodes_[static_cast<std::size_t>(id - first_id_)];
}

const Vector& EpisodeBuffer::state_at(std::int64_t id, int index) const {
  const auto& ep = episode(id);
  if (index < 0 || index > horizon_) throw std::invalid_argument("state index outside episode");
  return index < horizon_ ? ep[index].state : ep[horizon_ - 1].next_state;
}

std::vector<Transition> EpisodeBuffer::sample_transitions(int count, Rng& rng) const {
  if (episodes_.empty()) throw std::invalid_argument("sampling from an empty buffer");
  if (count <= 0) throw std::invalid_argument("sample count must be positive");
  std::vector<Transition> batch;
  batch.reserve(count);
  const std::uint64_t total = size();
  for (int i = 0; i < count; ++i) {
    const std::uint64_t flat = rng.uniform_int(total);
    batch.push_back(episodes_[flat / horizon_][flat % horizon_]);
  }
  return batch;
}

void EpisodeBuffer::dump_csv(std::ostream& out) const {
  out.precision(17);
  out << "episode,t,state,action,next_state,goal,reward\n";
  auto put = [&out](const Vector& v) {
    out << '"';
    for (int i = 0; i < v.size(); ++i) out << (i ? ";" : "") << v(i);
    out << '"';
  };
  for (const auto& ep : episodes_) {
    for (const auto& tr : ep) {
      out << tr.episode_id << ',' << tr.t << ',';
      put(tr.state);
      out << ',';
      put(tr.action);
      out << ',';
      put(tr.next_state);
      out << ',';
      put(tr.goal);
      out << ',' << tr.reward << '\n';
    }
  }
}

int RelabeledBatch::relabeled_count() const {
  int n = 0;
  for (char m : sl_mask) n += (m != 0);
  return n;
}

static RelabeledBatch init_relabeled(std::vector<Transition> batch) {
  RelabeledBatch out;
  out.sl_mask.assign(batch.size(), 0);
  out.mbr_candidate.assign(batch.size(), -1);
  out.original_goal.reserve(batch.size());
  for (const auto& tr : batch) out.original_goal.push_back(tr.goal);
  out.rows = std::move(batch);
  return out;
}

RelabeledBatch relabel_none(std::vector<Transition> batch) { return init_relabeled(std::move(batch)); }

// Shared body of the future strategy; when noise_std > 0 Gaussian noise is
// added to the selected goal (the goal-noise baseline). noise_std == 0 takes
// the exact future-strategy path, draw for draw.
static RelabeledBatch relabel_future_impl(std::vector<Transition> batch, const EpisodeBuffer& buffer,
                                          const GoalEnv& env, double p_relabel, double noise_std,
                                          Rng& rng) {
  if (p_relabel < 0.0 || p_relabel > 1.0) throw std::invalid_argument("p_relabel outside [0,1]");
  RelabeledBatch out = init_relabeled(std::move(batch));
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    Transition& tr = out.rows[i];
    if (rng.uniform() >= p_relabel) continue;
    if (!buffer.contains_episode(tr.episode_id)) {
      ++out.stale_rows;
      continue;
    }
    const int span = buffer.horizon() - tr.t;  // k in {1, ..., span}
    const int k = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(span)));
    Vector goal = env.phi(buffer.state_at(tr.episode_id, tr.t + k));
    if (noise_std > 0.0) {
      for (int d = 0; d < goal.size(); ++d) goal(d) += noise_std * rng.normal();
    }
    tr.goal = std::move(goal);
    tr.reward = env.sparse_reward(env.phi(tr.next_state), tr.goal);
    out.sl_mask[i] = 1;
  }
  return out;
}

RelabeledBatch relabel_her_future(std::vector<Transition> batch, const EpisodeBuffer& buffer,
                                  const GoalEnv& env, double p_relabel, Rng& rng) {
  return relabel_future_impl(std::move(batch), buffer, env, p_relabel, 0.0, rng);
}

RelabeledBatch relabel_baseline(std::vector<Transition> batch, const EpisodeBuffer& buffer,
                                const GoalEnv& env, BaselineRelabel mode, double noise_std,
                                double p_relabel, Rng& rng) {
  if (mode == BaselineRelabel::kGoalNoise)
    return relabel_future_impl(std::move(batch), buffer, env, p_relabel, noise_std, rng);
  RelabeledBatch out = init_relabeled(std::move(batch));
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    Transition& tr = out.rows[i];
    if (rng.uniform() >= p_relabel) continue;
    tr.goal = env.sample_goal(rng);
    tr.reward = env.sparse_reward(env.phi(tr.next_state), tr.goal);
    out.sl_mask[i] = 1;
  }
  return out;
}

}  // namespace mgrl
