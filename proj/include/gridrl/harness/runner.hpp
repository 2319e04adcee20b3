#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include "gridrl/a3c/a3c.hpp"
#include "gridrl/approx/checkpoint.hpp"
#include "gridrl/core/mdp_environment.hpp"
#include "gridrl/dqn/dqn.hpp"
#include "gridrl/envs/chain_walk.hpp"
#include "gridrl/envs/grid_world.hpp"
#include "gridrl/harness/config.hpp"
#include "gridrl/harness/metrics.hpp"
#include "gridrl/minideathmatch/world.hpp"
#include "gridrl/pg/reinforce.hpp"
#include "gridrl/tabular/control.hpp"

namespace gridrl::harness {

/// Networks in the harness run in single precision; the checkpoint encoding
/// is f32, so saved runs restore exactly.
using Real = float;

inline constexpr const char* kGridWorldMaze =
    "S...\n"
    ".##.\n"
    "...1\n";

inline deathmatch::Config deathmatch_config(const RunConfig& c) {
  deathmatch::Config d = c.environment == "minideathmatch_small" ? deathmatch::small_config() : deathmatch::Config{};
  d.death_penalty = c.death_penalty;
  return d;
}

inline PreprocessConfig preprocess_config(const RunConfig& c) {
  return {c.downsample, c.delta_frames, c.history, c.sign_rewards};
}

inline std::unique_ptr<DiscreteEnvironment> make_discrete_environment(const RunConfig& c) {
  if (c.environment == "chain_walk") return std::make_unique<ChainWalkEnv>(ChainWalk{c.chain_length, 1.0, 0.0});
  if (c.environment == "grid_world") return grid_as_environment(parse_grid_world(kGridWorldMaze));
  if (c.environment == "bandit") return std::make_unique<MdpEnvironment>(bandit_mdp({1.0, 0.0}));
  if (c.environment == "memory_cue") return std::make_unique<MemoryCue>();
  throw ConfigError("environment '" + c.environment + "' is not a discrete environment");
}

inline std::unique_ptr<TensorEnvironment<Real>> make_tensor_environment(const RunConfig& c) {
  if (is_frame_environment(c.environment)) {
    return std::make_unique<StackedFrameEnvironment<Real>>(
        std::make_unique<deathmatch::MiniDeathmatch>(deathmatch_config(c)), preprocess_config(c));
  }
  return std::make_unique<OneHotEnvironment<Real>>(make_discrete_environment(c), c.episode_step_limit);
}

/// Episode score contribution of a step: the unsigned reward, even when the
/// learner trains on signed rewards.
inline double score_of(const TensorEnvironment<Real>& env, const Step<Tensor<Real>>& s) {
  if (const auto* stacked = dynamic_cast<const StackedFrameEnvironment<Real>*>(&env)) return stacked->last_raw_reward();
  return s.reward;
}

/// Frame input: conv layers of 3x3 kernels with filters doubling up to
/// conv_filters and a 2x2 max pool after the first. Vector input: one ReLU
/// layer of hidden_units (none when 0). lstm_a3c adds an LSTM on top.
inline NetworkSpec network_spec(const RunConfig& c, const Shape& input, std::size_t actions) {
  NetworkSpec spec;
  spec.input = input;
  if (input.size() == 3) {
    for (std::uint64_t i = 0; i < c.conv_layers; ++i) {
      const std::size_t filters = std::max<std::size_t>(1, c.conv_filters >> (c.conv_layers - 1 - i));
      spec.trunk.push_back(LayerSpec::conv2d(filters, 3, 3));
      spec.trunk.push_back(LayerSpec::relu());
      if (i == 0) spec.trunk.push_back(LayerSpec::max_pool(2));
    }
  } else if (c.hidden_units > 0) {
    spec.trunk.push_back(LayerSpec::fully_connected(c.hidden_units));
    spec.trunk.push_back(LayerSpec::relu());
  }
  if (c.algorithm == "lstm_a3c") spec.trunk.push_back(LayerSpec::lstm(c.lstm_units));
  if (c.algorithm == "dqn") {
    spec.heads.push_back({kQHead, {LayerSpec::fully_connected(actions)}});
  } else {
    spec.heads.push_back({kPolicyHead, {LayerSpec::fully_connected(actions)}});
    if (c.algorithm != "reinforce") spec.heads.push_back({kValueHead, {LayerSpec::fully_connected(1)}});
  }
  return spec;
}

inline DqnConfig dqn_config(const RunConfig& c) {
  DqnConfig d;
  d.batch_size = c.batch_size;
  d.replay_capacity = c.replay_capacity;
  d.epsilon_start = c.epsilon_start;
  d.epsilon_end = c.epsilon_end;
  d.anneal_steps = c.anneal_steps;
  d.warmup_observations = c.warmup_observations;
  d.target_sync_interval = c.target_sync_interval;
  d.eval_epsilon = c.eval_epsilon;
  d.discount = c.discount;
  d.rmsprop = {c.learning_rate, c.rmsprop_decay, c.rmsprop_epsilon};
  d.clip_threshold = c.clip_threshold;
  d.anneal_learning_rate = c.anneal_learning_rate;
  d.use_replay = c.use_replay;
  return d;
}

inline WorkerConfig worker_config(const RunConfig& c) {
  WorkerConfig w;
  w.t_max = c.t_max;
  w.discount = c.discount;
  w.entropy_beta = c.entropy_beta;
  w.critic_scale = c.critic_scale;
  w.rmsprop = {c.learning_rate, c.rmsprop_decay, c.rmsprop_epsilon};
  w.clip_threshold = c.clip_threshold;
  w.anneal_learning_rate = c.anneal_learning_rate;
  w.worker_count = c.algorithm == "a3c" || c.algorithm == "lstm_a3c" ? c.workers : 1;
  return w;
}

/// Seed streams of a run, one per purpose and epoch.
inline std::uint64_t init_seed(const RunConfig& c) { return derive_seed(c.seed, 0); }
inline std::uint64_t train_seed(const RunConfig& c, std::uint64_t epoch) { return derive_seed(c.seed, 1000 + epoch); }
inline std::uint64_t eval_seed(const RunConfig& c, std::uint64_t epoch) { return derive_seed(c.seed, 2000000 + epoch); }

struct EvalOptions {
  /// Uniform random actions instead of the agent's policy.
  bool random_policy = false;
};

struct EvalResult {
  MetricsRow row;
  std::vector<double> scores;
  /// Reseed value and actions of the first evaluation episode, for replay.
  std::uint64_t environment_seed = 0;
  std::vector<std::size_t> first_episode_actions;
};

template <class T>
bool bitwise_equal(const ParameterSet<T>& a, const ParameterSet<T>& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].storage() != b[i].storage()) return false;
  return true;
}

inline double policy_entropy(const PolicyOutput& pi) {
  double h = 0.0;
  for (double p : pi.action_probabilities)
    if (p > 0.0) h -= p * std::log(p);
  return h;
}

/// Learner state of one run plus the epoch loop pieces: initialise or
/// restore, train one epoch, evaluate with frozen parameters.
class Agent {
 public:
  explicit Agent(RunConfig config) : config_(std::move(config)) {
    resolve(config_);
    if (is_tabular(config_.algorithm)) {
      auto env = make_discrete_environment(config_);
      q_ = QTable(env->state_count(), env->action_count(), config_.tabular_alpha);
    } else {
      auto env = make_tensor_environment(config_);
      net_.emplace(network_spec(config_, env->observation_shape(), env->action_count()));
      Rng rng(init_seed(config_));
      params_ = net_->init_parameters(rng);
      stats_ = params_.zeros_like();
    }
  }

  const RunConfig& config() const { return config_; }
  std::uint64_t epoch() const { return epoch_; }
  std::uint64_t observations() const { return observations_; }
  std::uint64_t updates() const { return updates_; }
  const ParameterSet<Real>& params() const { return params_; }
  const QTable& q_table() const { return q_; }
  const Network<Real>* network() const { return net_ ? &*net_ : nullptr; }
  std::uint64_t horizon() const { return config_.epochs * config_.observations_per_epoch; }

  double current_learning_rate() const {
    if (is_tabular(config_.algorithm)) return config_.tabular_alpha;
    if (!config_.anneal_learning_rate) return config_.learning_rate;
    return linear_lr(config_.learning_rate, observations_, horizon());
  }

  /// Training-side exploration, reported for value-based agents.
  double current_epsilon() const {
    if (is_tabular(config_.algorithm)) return config_.tabular_epsilon;
    return dqn_config(config_).epsilon_at(observations_);
  }

  /// Trains until observations_per_epoch more observations have been taken.
  /// Every epoch starts fresh episodes from its own seed stream.
  std::string train_epoch() {
    const std::uint64_t epoch = epoch_ + 1;
    const std::uint64_t target = observations_ + config_.observations_per_epoch;
    std::ostringstream debug;
    const auto& a = config_.algorithm;
    if (is_tabular(a)) {
      train_tabular(epoch, target, debug);
    } else if (a == "dqn") {
      train_dqn(epoch, target, debug);
    } else if (a == "reinforce") {
      train_reinforce(epoch, target, debug);
    } else {
      train_actor_critic(epoch, target, debug);
    }
    epoch_ = epoch;
    return debug.str();
  }

  EvalResult evaluate(const EvalOptions& options = {}) const {
    const auto params_before = params_;
    const auto q_before = q_.values;
    EvalResult r = is_tabular(config_.algorithm) && !options.random_policy ? evaluate_tabular()
                                                                           : evaluate_tensor(options);
    if (!bitwise_equal(params_before, params_) || !(q_before == q_.values)) {
      throw std::logic_error("evaluation modified the agent's parameters");
    }
    r.row.epoch = epoch_;
    r.row.steps = observations_;
    r.row.lr = current_learning_rate();
    if (is_value_based(config_.algorithm) && !options.random_policy) r.row.exploration = config_.eval_epsilon;
    if (options.random_policy) r.row.exploration = 1.0;
    return r;
  }

  /// Writes `<base>.state` (counters, tabular values as hex floats) and, for
  /// network agents, `<base>.ckpt`.
  void save(const std::filesystem::path& base) const {
    if (net_) save_checkpoint(params_, &stats_, base.string() + ".ckpt");
    const auto tmp = base.string() + ".state.tmp";
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << "format=1\nalgorithm=" << config_.algorithm << "\nenvironment=" << config_.environment
          << "\nepoch=" << epoch_ << "\nobservations=" << observations_ << "\nupdates=" << updates_ << '\n';
      if (!net_) {
        out << "q=" << q_.states() << 'x' << q_.actions();
        out << std::hexfloat;
        for (std::size_t s = 0; s < q_.states(); ++s)
          for (std::size_t k = 0; k < q_.actions(); ++k) out << ' ' << q_(s, k);
        out << '\n';
      }
      if (!out) throw IoError("state: write to '" + tmp + "' failed");
    }
    std::filesystem::rename(tmp, base.string() + ".state");
  }

  void load(const std::filesystem::path& base) {
    std::ifstream in(base.string() + ".state");
    if (!in) throw IoError("state: cannot read '" + base.string() + ".state'");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    if (kv["format"] != "1") throw IoError("state: unsupported format in '" + base.string() + ".state'");
    if (kv["algorithm"] != config_.algorithm || kv["environment"] != config_.environment) {
      throw ConfigError("checkpoint was written for " + kv["algorithm"] + " on " + kv["environment"] +
                        ", but the config asks for " + config_.algorithm + " on " + config_.environment);
    }
    epoch_ = detail::parse_count("epoch", kv["epoch"]);
    observations_ = detail::parse_count("observations", kv["observations"]);
    updates_ = detail::parse_count("updates", kv["updates"]);
    if (net_) {
      auto ck = load_checkpoint<Real>(base.string() + ".ckpt");
      net_->check_parameters(ck.params);
      params_ = std::move(ck.params);
      stats_ = ck.stats.empty() ? params_.zeros_like() : std::move(ck.stats);
      dqn_.reset();
    } else {
      std::istringstream q(kv["q"]);
      std::size_t s = 0, n = 0;
      char x = 0;
      q >> s >> x >> n;
      if (s != q_.states() || n != q_.actions() || x != 'x') throw ShapeError("state: Q table shape does not match");
      for (std::size_t i = 0; i < s; ++i)
        for (std::size_t k = 0; k < n; ++k) {
          std::string token;
          q >> token;
          q_(i, k) = std::strtod(token.c_str(), nullptr);
        }
      if (!q) throw IoError("state: truncated Q table");
    }
  }

 private:
  void train_tabular(std::uint64_t epoch, std::uint64_t target, std::ostream& debug) {
    auto env = make_discrete_environment(config_);
    env->reseed(train_seed(config_, epoch));
    Rng rng(derive_seed(train_seed(config_, epoch), 1));
    double score = 0.0;
    std::uint64_t episodes = 0;
    while (observations_ < target) {
      const std::size_t cap = static_cast<std::size_t>(std::min(config_.episode_step_limit, target - observations_));
      const auto stats = config_.algorithm == "sarsa"
                             ? sarsa_episode(*env, q_, config_.tabular_epsilon, config_.discount, rng, cap)
                             : q_learning_episode(*env, q_, config_.tabular_epsilon, config_.discount, rng, cap);
      observations_ += stats.steps;
      updates_ += stats.steps;
      score += stats.total_reward;
      ++episodes;
    }
    debug << "train_episodes=" << episodes << " train_score=" << (episodes ? score / episodes : 0.0);
  }

  void train_dqn(std::uint64_t epoch, std::uint64_t target, std::ostream& debug) {
    if (!dqn_) {
      dqn_ = std::make_unique<DqnLearner<Real>>(*net_, params_, dqn_config(config_), derive_seed(config_.seed, 3 + epoch),
                                                horizon());
      if (observations_ > 0) dqn_->restore(params_, stats_, observations_, updates_);
    }
    auto env = make_tensor_environment(config_);
    env->reseed(train_seed(config_, epoch));
    auto obs = env->reset();
    double score = 0.0, finished = 0.0, loss = 0.0;
    std::uint64_t episodes = 0, losses = 0;
    while (dqn_->observations() < target) {
      const std::size_t a = dqn_->act(obs);
      auto st = env->step(a);
      score += score_of(*env, st);
      const auto d = dqn_->train_step({std::move(obs), a, st.reward, st.observation, st.terminal});
      if (d.updated) {
        loss += d.loss;
        ++losses;
      }
      obs = std::move(st.observation);
      if (st.terminal) {
        finished += score;
        score = 0.0;
        ++episodes;
        obs = env->reset();
      }
    }
    params_ = dqn_->params();
    stats_ = dqn_->optimizer_stats();
    observations_ = dqn_->observations();
    updates_ = dqn_->updates();
    debug << "train_episodes=" << episodes << " train_score=" << (episodes ? finished / episodes : 0.0)
          << " mean_loss=" << (losses ? loss / losses : 0.0) << " replay=" << dqn_->memory().size();
  }

  void train_reinforce(std::uint64_t epoch, std::uint64_t target, std::ostream& debug) {
    auto env = make_tensor_environment(config_);
    env->reseed(train_seed(config_, epoch));
    Rng rng(derive_seed(train_seed(config_, epoch), 1));
    const std::size_t ph = net_->head_index(kPolicyHead);
    double finished = 0.0;
    std::uint64_t episodes = 0;
    std::vector<Transition<Tensor<Real>>> steps;
    while (observations_ < target) {
      steps.clear();
      auto obs = env->reset();
      auto state = net_->initial_state();
      double score = 0.0;
      bool terminal = false;
      while (!terminal && observations_ < target) {
        auto fr = net_->forward(params_, obs, &state);
        const std::size_t a = sample_action(policy_output(fr.outputs[ph]), rng);
        auto st = env->step(a);
        ++observations_;
        score += score_of(*env, st);
        terminal = st.terminal;
        steps.push_back({obs, a, st.reward, st.observation, st.terminal});
        state = std::move(fr.state);
        obs = std::move(st.observation);
      }
      if (terminal) {
        finished += score;
        ++episodes;
      }
      auto est = reinforce_gradient<Real>(std::span<const Transition<Tensor<Real>>>(steps), *net_, params_,
                                          config_.discount);
      ParameterSet<Real> descent = est.gradients.zeros_like();
      descent.add_scaled(est.gradients, Real(-1));
      clip_gradients(descent, static_cast<Real>(config_.clip_threshold));
      RmsPropConfig rms{current_learning_rate(), config_.rmsprop_decay, config_.rmsprop_epsilon};
      rmsprop_step(params_, descent, stats_, rms);
      ++updates_;
    }
    debug << "train_episodes=" << episodes << " train_score=" << (episodes ? finished / episodes : 0.0);
  }

  void train_actor_critic(std::uint64_t epoch, std::uint64_t target, std::ostream& debug) {
    const WorkerConfig wc = worker_config(config_);
    A3cOptions options;
    options.serialized = config_.serialized || config_.algorithm == "a2c";
    options.observation_offset = observations_;
    options.anneal_horizon = horizon();
    const RunConfig cfg = config_;
    EnvironmentFactory<Real> factory = [cfg](std::size_t) { return make_tensor_environment(cfg); };
    auto run = run_a3c<Real>(wc, factory, *net_, params_, target, train_seed(config_, epoch), options, &stats_);
    if (run.aborted) throw std::runtime_error("a3c: " + run.error);
    params_ = std::move(run.params);
    stats_ = std::move(run.stats);
    observations_ = run.observations;
    updates_ += run.updates;
    double score = 0.0;
    for (const auto& e : run.episodes) score += e.score;
    debug << "train_episodes=" << run.episodes.size()
          << " train_score=" << (run.episodes.empty() ? 0.0 : score / run.episodes.size())
          << " train_entropy=" << (run.steps ? run.entropy_sum / run.steps : 0.0);
  }

  /// Budget mode stops at eval_observations and drops the cut-off episode;
  /// episode mode plays exactly eval_episodes whole episodes.
  bool eval_done(std::uint64_t used, std::uint64_t episodes) const {
    return config_.eval_episodes > 0 ? episodes >= config_.eval_episodes : used >= config_.eval_observations;
  }
  bool budget_exhausted(std::uint64_t used) const {
    return config_.eval_episodes == 0 && used >= config_.eval_observations;
  }

  EvalResult evaluate_tabular() const {
    EvalResult r;
    auto env = make_discrete_environment(config_);
    r.environment_seed = eval_seed(config_, epoch_);
    env->reseed(r.environment_seed);
    Rng rng(derive_seed(r.environment_seed, 1));
    std::uint64_t used = 0;
    while (!eval_done(used, r.scores.size())) {
      std::size_t s = env->reset();
      double score = 0.0;
      std::size_t len = 0;
      bool complete = false;
      for (;;) {
        const std::size_t a = epsilon_greedy_action(q_.values.row(s), config_.eval_epsilon, rng);
        if (r.scores.empty()) r.first_episode_actions.push_back(a);
        const auto st = env->step(a);
        ++used;
        ++len;
        score += st.reward;
        s = st.observation;
        if (st.terminal || len >= config_.episode_step_limit) {
          complete = true;
          break;
        }
        if (budget_exhausted(used)) break;
      }
      if (!complete) break;
      r.scores.push_back(score);
    }
    finish(r);
    return r;
  }

  EvalResult evaluate_tensor(const EvalOptions& options) const {
    EvalResult r;
    auto env = make_tensor_environment(config_);
    r.environment_seed = eval_seed(config_, epoch_);
    env->reseed(r.environment_seed);
    Rng rng(derive_seed(r.environment_seed, 1));
    const bool value_based = config_.algorithm == "dqn";
    std::uint64_t used = 0;
    double entropy = 0.0;
    std::uint64_t entropy_steps = 0;
    while (!eval_done(used, r.scores.size())) {
      auto obs = env->reset();
      RecurrentState<Real> state = net_ ? net_->initial_state() : RecurrentState<Real>{};
      double score = 0.0;
      bool complete = false;
      for (;;) {
        std::size_t a = 0;
        if (options.random_policy) {
          a = uniform_index(rng, env->action_count());
        } else if (value_based) {
          a = act(*net_, params_, obs, config_.eval_epsilon, rng);
        } else {
          auto fr = net_->forward(params_, obs, &state);
          const auto pi = policy_output(fr.outputs[net_->head_index(kPolicyHead)]);
          entropy += policy_entropy(pi);
          ++entropy_steps;
          a = sample_action(pi, rng);
          state = std::move(fr.state);
        }
        if (r.scores.empty()) r.first_episode_actions.push_back(a);
        auto st = env->step(a);
        ++used;
        score += score_of(*env, st);
        obs = std::move(st.observation);
        if (st.terminal) {
          complete = true;
          break;
        }
        if (budget_exhausted(used)) break;
      }
      if (!complete) break;
      r.scores.push_back(score);
    }
    finish(r);
    r.row.exploration = entropy_steps ? entropy / static_cast<double>(entropy_steps) : 0.0;
    return r;
  }

  static void finish(EvalResult& r) {
    double total = 0.0;
    for (double s : r.scores) total += s;
    r.row.episodes = r.scores.size();
    r.row.mean_score = r.scores.empty() ? std::nan("") : total / static_cast<double>(r.scores.size());
  }

  RunConfig config_;
  std::optional<Network<Real>> net_;
  ParameterSet<Real> params_;
  ParameterSet<Real> stats_;
  QTable q_;
  std::unique_ptr<DqnLearner<Real>> dqn_;
  std::uint64_t epoch_ = 0;
  std::uint64_t observations_ = 0;
  std::uint64_t updates_ = 0;
};

struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path metrics() const { return root / "metrics.csv"; }
  std::filesystem::path config() const { return root / "config.txt"; }
  std::filesystem::path debug() const { return root / "debug.log"; }
  std::filesystem::path checkpoint(std::uint64_t epoch) const {
    std::ostringstream name;
    name << "epoch_" << std::setw(4) << std::setfill('0') << epoch;
    return root / "checkpoints" / name.str();
  }
  std::filesystem::path episode(std::uint64_t epoch) const {
    std::ostringstream name;
    name << "epoch_" << std::setw(4) << std::setfill('0') << epoch << ".episode";
    return root / "episodes" / name.str();
  }
};

/// Latest epoch with a complete checkpoint in the run directory.
inline std::optional<std::uint64_t> latest_checkpoint(const RunPaths& paths) {
  std::optional<std::uint64_t> best;
  const auto dir = paths.root / "checkpoints";
  if (!std::filesystem::exists(dir)) return best;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind("epoch_", 0) != 0 || entry.path().extension() != ".state") continue;
    const auto epoch = detail::parse_count("epoch", name.substr(6, name.size() - 6 - 6));
    if (!best || epoch > *best) best = epoch;
  }
  return best;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  ConfigBuilder b;
  b.load_file(path.string());
  return b.build();
}

/// Episode file: the run's config snapshot, then the environment reseed value
/// and the agent's actions.
inline void write_episode(const std::filesystem::path& path, const RunConfig& config, const EvalResult& r) {
  std::ofstream out(path, std::ios::trunc);
  out << snapshot(config) << "# episode\nenv_seed=" << r.environment_seed << "\nactions=";
  for (std::size_t i = 0; i < r.first_episode_actions.size(); ++i)
    out << (i ? " " : "") << r.first_episode_actions[i];
  out << '\n';
  if (!out) throw IoError("episode: write to '" + path.string() + "' failed");
}

struct EpisodeFile {
  RunConfig config;
  std::uint64_t environment_seed = 0;
  std::vector<std::size_t> actions;
};

inline EpisodeFile read_episode(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("episode: cannot read '" + path.string() + "'");
  std::ostringstream cfg;
  EpisodeFile e;
  bool have_seed = false, have_actions = false;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("env_seed=", 0) == 0) {
      e.environment_seed = detail::parse_count("env_seed", line.substr(9));
      have_seed = true;
    } else if (line.rfind("actions=", 0) == 0) {
      std::istringstream a(line.substr(8));
      std::string token;
      while (a >> token) e.actions.push_back(detail::parse_count("actions", token));
      have_actions = true;
    } else {
      cfg << line << '\n';
    }
  }
  if (!have_seed || !have_actions) throw IoError("episode: '" + path.string() + "' lacks env_seed or actions");
  ConfigBuilder b;
  std::istringstream text(cfg.str());
  b.load_text(text, path.string());
  e.config = b.build();
  return e;
}

/// Re-simulates a stored episode and prints one ASCII frame per agent step.
/// Returns the episode score.
inline double replay_episode(const EpisodeFile& e, std::ostream& out) {
  static constexpr char kRamp[] = " .:-=+*#%@";
  double score = 0.0;
  if (is_frame_environment(e.config.environment)) {
    auto env = make_tensor_environment(e.config);
    auto& stacked = dynamic_cast<StackedFrameEnvironment<Real>&>(*env);
    auto& world = dynamic_cast<deathmatch::MiniDeathmatch&>(stacked.inner());
    env->reseed(e.environment_seed);
    env->reset();
    auto show = [&](std::size_t t, const char* action, double reward) {
      const auto& s = world.state();
      out << "step " << t << " action=" << action << " reward=" << reward << " score=" << score
          << " health=" << s.agent.health << " ammo=" << s.agent.ammo << " enemies=" << s.enemies.size() << '\n'
          << world.world().ascii(s);
      const Frame view = world.world().render(s);
      for (std::size_t y = 0; y < view.height; y += 2) {
        for (std::size_t x = 0; x < view.width; ++x) out << kRamp[std::min<std::size_t>(9, view.at(y, x, 0) * 10)];
        out << '\n';
      }
      out << '\n';
    };
    show(0, "-", 0.0);
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      auto st = env->step(e.actions[t]);
      score += stacked.last_raw_reward();
      show(t + 1, deathmatch::action_name(e.actions[t]), stacked.last_raw_reward());
      if (st.terminal) break;
    }
  } else {
    auto env = make_discrete_environment(e.config);
    env->reseed(e.environment_seed);
    std::size_t s = env->reset();
    out << "step 0 state=" << s << '\n';
    for (std::size_t t = 0; t < e.actions.size(); ++t) {
      const auto st = env->step(e.actions[t]);
      score += st.reward;
      s = st.observation;
      out << "step " << t + 1 << " action=" << e.actions[t] << " reward=" << st.reward << " state=" << s << '\n';
      if (st.terminal) break;
    }
  }
  out << "score " << score << '\n';
  return score;
}

struct TrainResult {
  std::vector<MetricsRow> rows;
  std::filesystem::path final_checkpoint;
};

/// Evaluates the initial policy (epoch 0), then alternates a training epoch
/// and an evaluation, writing one metrics row, one checkpoint and one replay
/// episode per epoch. With `resume` the run continues from its latest
/// checkpoint; metrics rows past it are discarded first.
inline TrainResult run_train(const RunConfig& config, bool resume = false, std::ostream* log = nullptr) {
  const RunPaths paths{config.output_dir};
  std::filesystem::create_directories(paths.root / "checkpoints");
  std::filesystem::create_directories(paths.root / "episodes");
  Agent agent(config);
  double seconds_before = 0.0;
  std::optional<std::uint64_t> start;
  if (resume) {
    start = latest_checkpoint(paths);
    if (!start) throw UsageError("resume: no checkpoint in '" + paths.root.string() + "'");
    const RunConfig stored = load_run_config(paths.config());
    RunConfig expected = config;
    expected.epochs = stored.epochs;
    if (!(stored == expected)) throw ConfigError("resume: config differs from the run's stored config beyond epochs");
    agent.load(paths.checkpoint(*start));
    if (std::filesystem::exists(paths.metrics())) {
      truncate_metrics(paths.metrics(), *start);
      const auto rows = read_metrics(paths.metrics());
      if (!rows.empty()) seconds_before = rows.back().seconds;
    }
  } else if (std::filesystem::exists(paths.metrics()) && std::filesystem::file_size(paths.metrics()) > 0) {
    throw UsageError("run directory '" + paths.root.string() + "' already holds metrics; resume it or pick another");
  }
  {
    std::ofstream out(paths.config(), std::ios::trunc);
    out << snapshot(config);
  }
  MetricsWriter writer(paths.metrics());
  std::ofstream debug(paths.debug(), std::ios::app);
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    if (!config.wall_clock) return 0.0;
    return seconds_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  TrainResult result;
  auto record = [&](const std::string& train_note) {
    auto r = agent.evaluate();
    r.row.seconds = elapsed();
    if (is_value_based(agent.config().algorithm)) {
      r.row.exploration = agent.current_epsilon();
    }
    writer.append(r.row);
    const auto base = paths.checkpoint(agent.epoch());
    agent.save(base);
    write_episode(paths.episode(agent.epoch()), agent.config(), r);
    debug << "epoch=" << agent.epoch() << " steps=" << agent.observations() << " updates=" << agent.updates() << ' '
          << train_note << " eval_score=" << r.row.mean_score << " eval_episodes=" << r.row.episodes << '\n';
    debug.flush();
    if (log) {
      *log << "epoch " << r.row.epoch << " steps " << r.row.steps << " mean_score " << r.row.mean_score
           << " episodes " << r.row.episodes << '\n';
    }
    result.rows.push_back(r.row);
    result.final_checkpoint = base;
  };
  if (!start) record("initial");
  while (agent.epoch() < config.epochs) record(agent.train_epoch());
  if (result.final_checkpoint.empty()) result.final_checkpoint = paths.checkpoint(agent.epoch());
  return result;
}

/// Evaluates a stored checkpoint (or, with random_policy, no agent at all).
inline EvalResult run_eval(const RunConfig& config, const std::optional<std::filesystem::path>& checkpoint,
                           const EvalOptions& options = {}) {
  Agent agent(config);
  if (checkpoint) agent.load(*checkpoint);
  auto r = agent.evaluate(options);
  if (is_value_based(config.algorithm) && !options.random_policy) r.row.exploration = config.eval_epsilon;
  return r;
}

}  // namespace gridrl::harness
