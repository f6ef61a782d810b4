#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mgrl/agents.hpp"
#include "mgrl/dynamics.hpp"
#include "mgrl/envs.hpp"
#include "mgrl/replay.hpp"

namespace mgrl {

struct RunConfig {
  std::string env = "point2d-large";
  std::string algo = "mher";  // ddpg | her | mher | gcsl | mve
  AgentConfig agent;
  std::uint64_t seed = 0;
  int epochs = 30;
  int episodes_per_epoch = 0;  // 0 means the per-env default (1 point2d, 15 planar-reacher)
  int batches_per_episode = 5;
  int batch_size = 64;
  int model_updates_per_batch = 2;
  int model_hidden_layers = 4;
  int model_hidden_units = 256;
  double model_lr = 1e-3;
  int warmup_updates = 100;
  int warmup_batch_size = 512;
  int warmup_episodes = 10;
  int eval_episodes = 100;
  int mve_horizon = 3;
  bool sl_from_mbr = false;  // feed the supervised term from a model-relabeled copy
  std::size_t buffer_capacity = 1000000;
  bool dump_relabel = true;
  std::string out_dir;  // empty: keep everything in memory
};

// Fills algo-dependent fields (relabel mode, alpha, use_sl) the way the named
// algorithm expects. Explicit config/CLI values are applied on top by the
// callers in tools/.
void apply_algo_preset(RunConfig& cfg);

// Fields resolved against the environment (episodes_per_epoch default).
void finalize_config(RunConfig& cfg, const GoalEnvSpec& spec);

std::string run_config_to_json(const RunConfig& cfg);
// Overlays the keys present in the JSON text onto cfg; unknown keys are
// rejected. The nested "agent" object overlays AgentConfig fields.
void overlay_config_json(RunConfig& cfg, const std::string& json_text);

// True when the configuration ever queries the learned dynamics model.
bool uses_model(const RunConfig& cfg);

struct EpochMetrics {
  int epoch = 0;  // 1-based
  long long env_steps = 0;
  double success_rate = 0.0;
  double mean_final_distance = 0.0;
  double expected_distance = 0.0;
  double critic_loss = 0.0;
  double actor_q_term = 0.0;
  double sl_loss = 0.0;
  double model_loss = 0.0;
  double mean_relabel_goal_distance = 0.0;
};

extern const char* const kMetricsHeader;
std::string metrics_csv_row(const EpochMetrics& m);

struct EvalResult {
  double success_rate = 0.0;
  double mean_final_distance = 0.0;
  double expected_distance = 0.0;  // mean over episodes of sum_t gamma^t ||phi(s_t) - g||^2
};

// Noise-free rollouts over the full horizon, all episodes stepped in
// lockstep. Success and final distance are measured at the last step; the
// expected-distance sum runs over s_0 .. s_{horizon-1}.
EvalResult eval_rollouts(const Policy& policy, const GoalEnv& env, int episodes, double gamma,
                         Rng& rng);
EvalResult eval_rollouts_fixed(const Policy& policy, const GoalEnv& env, const Matrix& starts,
                               const Matrix& goals, double gamma);

double evaluate(const Policy& policy, const GoalEnv& env, int episodes, Rng& rng);
double expected_distance(const Policy& policy, const GoalEnv& env, int episodes, double gamma,
                         Rng& rng);

// One training run: environment, agent, optional dynamics model, buffer, and
// the labeled random streams derived from the master seed.
class TrainRun {
 public:
  explicit TrainRun(RunConfig cfg);
  ~TrainRun();

  const RunConfig& config() const { return cfg_; }
  const GoalEnv& env() const { return *env_; }
  EpisodeBuffer& buffer() { return buffer_; }
  DynamicsModel* model() { return model_.get(); }
  ActorCritic* actor_critic() { return actor_critic_.get(); }
  GcslAgent* gcsl() { return gcsl_.get(); }
  long long env_steps() const { return env_steps_; }
  std::int64_t model_updates() const { return model_ ? model_->train_steps() : 0; }
  const std::vector<EpochMetrics>& metrics() const { return metrics_; }

  // Random-action episodes followed by warmup_updates model steps. Only runs
  // for model-using configurations; the episodes land in the main buffer and
  // do not count towards env_steps.
  void warmup();

  EpochMetrics run_epoch();

  // warmup + all epochs; writes metrics/dumps/config/checkpoint when out_dir
  // is set. On a numerical failure writes a diagnostic snapshot and rethrows.
  // When progress is given, each metrics row is streamed to it as CSV.
  std::vector<EpochMetrics> run(std::ostream* progress = nullptr);

 private:
  std::vector<Transition> collect_episode(bool random_actions, Rng& reset_rng, Rng& action_rng);
  Vector policy_action(const Vector& state, const Vector& goal, bool explore, Rng& rng) const;
  RelabeledBatch relabel(std::vector<Transition> batch);
  void write_outputs() const;

  RunConfig cfg_;
  std::unique_ptr<GoalEnv> env_;
  EpisodeBuffer buffer_;
  std::unique_ptr<ActorCritic> actor_critic_;
  std::unique_ptr<GcslAgent> gcsl_;
  std::unique_ptr<DynamicsModel> model_;
  Rng env_rng_, explore_rng_, sample_rng_, relabel_rng_, eval_rng_, warmup_rng_;
  long long env_steps_ = 0;
  int epoch_ = 0;
  bool warmed_up_ = false;
  std::vector<EpochMetrics> metrics_;
  // diagnostics: one row per relabeled row, (epoch, original goal, new goal)
  struct RelabelRow {
    int epoch;
    Vector original;
    Vector relabeled;
    int candidate;  // -1 unless model-based
  };
  std::vector<RelabelRow> relabel_rows_;
};

struct AggregateStats {
  std::vector<int> epochs;
  std::vector<long long> env_steps;
  std::vector<std::vector<double>> success_per_seed;  // [seed][epoch]
  std::vector<double> median, q25, q75;
};

// Linear-interpolation quantile of a sample (the numpy default).
double quantile(std::vector<double> values, double q);

AggregateStats aggregate_stats(const std::vector<std::filesystem::path>& metrics_files);
void write_aggregate_csv(const AggregateStats& stats, const std::filesystem::path& path);
AggregateStats read_aggregate_csv(const std::filesystem::path& path);
void render_success_svg(const AggregateStats& stats, const std::filesystem::path& path,
                        const std::string& title);

// Copies a run's relabel dump (validating the header) to out_path.
void dump_relabel_goals(const std::filesystem::path& run_dir,
                        const std::filesystem::path& out_path);

// Area under the success-rate curve (plain sum over epochs).
double success_auc(const std::vector<EpochMetrics>& metrics);

std::string format_double(double v);

}  // namespace mgrl
