#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mgrl/harness.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path metrics_file_of(const std::string& run) {
  std::filesystem::path p(run);
  if (std::filesystem::is_directory(p)) return p / "metrics.csv";
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mgrl;
  CLI::App app{"goal-conditioned RL lab: training, aggregation, and diagnostics"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run one training configuration");
  std::string env_name = "point2d-large", algo = "mher", relabel, config_path, out_dir;
  double alpha = 3.0, p_relabel = 0.8, goal_noise_std = 0.01, gamma = 0.98, polyak = 0.9;
  double eps_random = 0.3, noise_std = 0.2, lr_actor = 1e-3, lr_critic = 1e-3, model_lr = 1e-3;
  int n_steps = 5, epochs = 30, episodes_per_epoch = 0, batches_per_episode = 5, batch_size = 64;
  int eval_episodes = 100, mve_horizon = 3, hidden_units = 256;
  int warmup_episodes = 10, warmup_updates = 100, warmup_batch_size = 512;
  int model_hidden_layers = 4, model_hidden_units = 256, model_updates_per_batch = 2;
  std::uint64_t seed = 0, buffer_capacity = 1000000;
  bool no_target_clip = false, no_obs_norm = false, sl_from_mbr = false, no_dump_relabel = false;
  train->add_option("--env", env_name, "environment name")
      ->check(CLI::IsMember({"point2d-large", "point2d-fourroom", "planar-reacher"}));
  train->add_option("--algo", algo, "algorithm preset")
      ->check(CLI::IsMember({"ddpg", "her", "mher", "gcsl", "mve"}));
  train->add_option("--relabel", relabel, "relabeling strategy override")
      ->check(CLI::IsMember({"none", "her-future", "mbr", "random", "goal-noise"}));
  train->add_option("--alpha", alpha, "supervised term weight");
  train->add_option("--n-steps", n_steps, "virtual rollout length for model relabeling");
  train->add_option("--seed", seed, "master seed");
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--episodes-per-epoch", episodes_per_epoch, "0 uses the per-env default");
  train->add_option("--batches-per-episode", batches_per_episode);
  train->add_option("--batch-size", batch_size);
  train->add_option("--eval-episodes", eval_episodes);
  train->add_option("--mve-horizon", mve_horizon, "model-expanded target depth");
  train->add_option("--p-relabel", p_relabel, "per-row relabel probability");
  train->add_option("--goal-noise-std", goal_noise_std, "noise scale for goal-noise relabeling");
  train->add_option("--gamma", gamma);
  train->add_option("--polyak", polyak, "target network retention coefficient");
  train->add_option("--eps-random", eps_random, "random-action exploration probability");
  train->add_option("--noise-std", noise_std, "action noise scale (fraction of half-range)");
  train->add_option("--lr-actor", lr_actor);
  train->add_option("--lr-critic", lr_critic);
  train->add_option("--hidden-units", hidden_units, "actor/critic hidden width");
  train->add_option("--buffer-capacity", buffer_capacity, "replay capacity in transitions");
  train->add_option("--warmup-episodes", warmup_episodes);
  train->add_option("--warmup-updates", warmup_updates);
  train->add_option("--warmup-batch-size", warmup_batch_size);
  train->add_option("--model-hidden-layers", model_hidden_layers);
  train->add_option("--model-hidden-units", model_hidden_units);
  train->add_option("--model-lr", model_lr);
  train->add_option("--model-updates-per-batch", model_updates_per_batch);
  train->add_flag("--sl-from-mbr", sl_from_mbr,
                  "feed the supervised term from a model-relabeled copy of the batch");
  train->add_flag("--no-target-clip", no_target_clip, "disable critic target clipping");
  train->add_flag("--no-obs-norm", no_obs_norm, "disable observation/goal normalization");
  train->add_flag("--no-dump-relabel", no_dump_relabel, "skip the relabel diagnostics dump");
  train->add_option("--config", config_path, "JSON config overlaid between preset and flags")
      ->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "run output directory")->required();

  auto* agg = app.add_subcommand("aggregate", "combine per-seed runs into quantile curves");
  std::vector<std::string> agg_runs;
  std::string agg_out, agg_title = "success rate";
  agg->add_option("--runs", agg_runs, "run directories (or metrics.csv files)")
      ->required()
      ->expected(-1);
  agg->add_option("--out", agg_out, "aggregate CSV path (SVG written alongside)")->required();
  agg->add_option("--title", agg_title);

  auto* plot = app.add_subcommand("plot", "render an aggregate CSV as SVG");
  std::string plot_in, plot_out, plot_title = "success rate";
  plot->add_option("--aggregate", plot_in, "aggregate CSV")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "SVG path")->required();
  plot->add_option("--title", plot_title);

  auto* dump = app.add_subcommand("dump-goals", "export a run's relabeled-goal table");
  std::string dump_run, dump_out;
  dump->add_option("--run", dump_run, "run directory")->required();
  dump->add_option("--out", dump_out, "CSV destination")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      RunConfig cfg;
      std::string cfg_text;
      if (!config_path.empty()) cfg_text = read_file(config_path);
      if (train->count("--algo")) {
        cfg.algo = algo;
      } else if (!cfg_text.empty()) {
        const auto j = nlohmann::json::parse(cfg_text);
        if (j.contains("algo")) cfg.algo = j["algo"].get<std::string>();
      }
      apply_algo_preset(cfg);
      if (!cfg_text.empty()) overlay_config_json(cfg, cfg_text);
      if (train->count("--env")) cfg.env = env_name;
      if (train->count("--relabel")) cfg.agent.relabel_mode = relabel_mode_from_string(relabel);
      if (train->count("--alpha")) cfg.agent.alpha = alpha;
      if (train->count("--n-steps")) cfg.agent.n_mbr_steps = n_steps;
      if (train->count("--seed")) cfg.seed = seed;
      if (train->count("--epochs")) cfg.epochs = epochs;
      if (train->count("--episodes-per-epoch")) cfg.episodes_per_epoch = episodes_per_epoch;
      if (train->count("--batches-per-episode")) cfg.batches_per_episode = batches_per_episode;
      if (train->count("--batch-size")) cfg.batch_size = batch_size;
      if (train->count("--eval-episodes")) cfg.eval_episodes = eval_episodes;
      if (train->count("--mve-horizon")) cfg.mve_horizon = mve_horizon;
      if (train->count("--p-relabel")) cfg.agent.p_relabel = p_relabel;
      if (train->count("--goal-noise-std")) cfg.agent.goal_noise_std = goal_noise_std;
      if (train->count("--gamma")) cfg.agent.gamma = gamma;
      if (train->count("--polyak")) cfg.agent.polyak = polyak;
      if (train->count("--eps-random")) cfg.agent.eps_random = eps_random;
      if (train->count("--noise-std")) cfg.agent.noise_std = noise_std;
      if (train->count("--lr-actor")) cfg.agent.lr_actor = lr_actor;
      if (train->count("--lr-critic")) cfg.agent.lr_critic = lr_critic;
      if (train->count("--hidden-units")) cfg.agent.hidden_units = hidden_units;
      if (train->count("--buffer-capacity")) cfg.buffer_capacity = buffer_capacity;
      if (train->count("--warmup-episodes")) cfg.warmup_episodes = warmup_episodes;
      if (train->count("--warmup-updates")) cfg.warmup_updates = warmup_updates;
      if (train->count("--warmup-batch-size")) cfg.warmup_batch_size = warmup_batch_size;
      if (train->count("--model-hidden-layers")) cfg.model_hidden_layers = model_hidden_layers;
      if (train->count("--model-hidden-units")) cfg.model_hidden_units = model_hidden_units;
      if (train->count("--model-lr")) cfg.model_lr = model_lr;
      if (train->count("--model-updates-per-batch"))
        cfg.model_updates_per_batch = model_updates_per_batch;
      if (sl_from_mbr) cfg.sl_from_mbr = true;
      if (no_target_clip) cfg.agent.target_clip = false;
      if (no_obs_norm) cfg.agent.normalize_inputs = false;
      if (no_dump_relabel) cfg.dump_relabel = false;
      cfg.out_dir = out_dir;
      TrainRun run(std::move(cfg));
      run.run(&std::cout);
    } else if (agg->parsed()) {
      std::vector<std::filesystem::path> files;
      for (const auto& r : agg_runs) files.push_back(metrics_file_of(r));
      const AggregateStats stats = aggregate_stats(files);
      write_aggregate_csv(stats, agg_out);
      std::filesystem::path svg(agg_out);
      svg.replace_extension(".svg");
      render_success_svg(stats, svg, agg_title);
      std::cout << "wrote " << agg_out << " and " << svg.string() << '\n';
    } else if (plot->parsed()) {
      render_success_svg(read_aggregate_csv(plot_in), plot_out, plot_title);
      std::cout << "wrote " << plot_out << '\n';
    } else if (dump->parsed()) {
      dump_relabel_goals(dump_run, dump_out);
      std::cout << "wrote " << dump_out << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
