// gridrl: train, evaluate, replay and verify agents from the command line.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <map>

#include "gridrl/harness/check.hpp"
#include "gridrl/harness/runner.hpp"

using namespace gridrl;
using namespace gridrl::harness;

namespace {

/// One string option per config key; set ones are applied in registry order
/// after the --config file.
struct KeyFlags {
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    for (const auto& k : config_keys()) app->add_option("--" + k.name, values[k.name], k.help);
  }

  void apply(CLI::App* app, ConfigBuilder& b) const {
    for (const auto& k : config_keys())
      if (app->count("--" + k.name) > 0) b.set(k.name, values.at(k.name), "--" + k.name);
  }
};

double sample_sd(const std::vector<double>& xs) {
  if (xs.empty()) return std::nan("");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridrl: reinforcement learning on small grid worlds"};
  app.require_subcommand(1);

  std::string config_path;
  KeyFlags train_flags, eval_flags;
  bool resume = false;

  auto* train = app.add_subcommand("train", "train an agent, writing metrics and checkpoints to output_dir");
  train->add_option("--config", config_path, "key=value file applied before flags");
  train->add_flag("--resume", resume, "continue the run in output_dir from its latest checkpoint");
  train_flags.attach(train);

  std::string checkpoint, run_dir, baseline_out;
  std::uint64_t epoch = 0;
  bool random_policy = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, or a uniform random policy");
  eval->add_option("--config", config_path, "key=value file applied before flags");
  eval->add_option("--checkpoint", checkpoint, "checkpoint base path (without .state/.ckpt)");
  eval->add_option("--run-dir", run_dir, "take config and latest checkpoint from a run directory");
  eval->add_option("--epoch", epoch, "with --run-dir, evaluate this epoch's checkpoint");
  eval->add_flag("--random-policy", random_policy, "act uniformly at random instead of loading an agent");
  eval->add_option("--baseline-out", baseline_out, "write config and score statistics as a baseline fixture");
  eval_flags.attach(eval);

  std::string episode_path;
  auto* replay = app.add_subcommand("replay", "print a stored evaluation episode as ASCII frames");
  replay->add_option("episode", episode_path, "episode file from <run>/episodes")->required();

  auto* check = app.add_subcommand("check", "run the oracle and gradient verification suite");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ConfigBuilder b;
      if (resume) {
        // The stored snapshot is the base; flags may extend epochs.
        ConfigBuilder probe;
        if (!config_path.empty()) probe.load_file(config_path);
        train_flags.apply(train, probe);
        const RunPaths paths{probe.build().output_dir};
        b.load_file(paths.config().string());
      }
      if (!config_path.empty()) b.load_file(config_path);
      train_flags.apply(train, b);
      apply_seed_override(b);
      const RunConfig config = b.build();
      const auto result = run_train(config, resume, &std::cout);
      std::cout << "final checkpoint " << result.final_checkpoint.string() << '\n';
      return 0;
    }
    if (*eval) {
      ConfigBuilder b;
      std::optional<std::filesystem::path> ck;
      if (!run_dir.empty()) {
        const RunPaths paths{run_dir};
        b.load_file(paths.config().string());
        const auto latest = latest_checkpoint(paths);
        if (!latest) throw UsageError("eval: no checkpoint in '" + run_dir + "'");
        ck = paths.checkpoint(eval->count("--epoch") ? epoch : *latest);
      }
      if (!config_path.empty()) b.load_file(config_path);
      eval_flags.apply(eval, b);
      apply_seed_override(b);
      if (!checkpoint.empty()) ck = checkpoint;
      if (!ck && !random_policy) throw UsageError("eval: give --checkpoint, --run-dir or --random-policy");
      const RunConfig config = b.build();
      const auto r = run_eval(config, random_policy ? std::nullopt : ck, {.random_policy = random_policy});
      std::cout << kMetricsHeader << '\n' << format_row(r.row) << '\n';
      if (!baseline_out.empty()) {
        std::ofstream out(baseline_out, std::ios::trunc);
        out << "# " << (random_policy ? "uniform random policy" : "agent") << " baseline, written by gridrl eval\n"
            << snapshot(config) << "baseline_episodes=" << r.row.episodes << "\nbaseline_mean="
            << harness::detail::format_double(r.row.mean_score) << "\nbaseline_sd=" << harness::detail::format_double(sample_sd(r.scores))
            << '\n';
        if (!out) throw IoError("eval: cannot write '" + baseline_out + "'");
      }
      return 0;
    }
    if (*replay) {
      replay_episode(read_episode(episode_path), std::cout);
      return 0;
    }
    if (*check) return run_checks(std::cout) ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "gridrl: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "gridrl: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gridrl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
