#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gridrl/core/errors.hpp"

namespace gridrl::harness {

inline const std::vector<std::string>& algorithm_names() {
  static const std::vector<std::string> names{"tabular_q", "sarsa", "reinforce", "a2c", "dqn", "a3c", "lstm_a3c"};
  return names;
}

inline const std::vector<std::string>& environment_names() {
  static const std::vector<std::string> names{"chain_walk",    "grid_world",     "bandit",
                                              "memory_cue",    "minideathmatch", "minideathmatch_small"};
  return names;
}

inline bool is_tabular(const std::string& algorithm) { return algorithm == "tabular_q" || algorithm == "sarsa"; }
inline bool is_value_based(const std::string& algorithm) { return is_tabular(algorithm) || algorithm == "dqn"; }
inline bool is_actor_critic(const std::string& algorithm) {
  return algorithm == "a2c" || algorithm == "a3c" || algorithm == "lstm_a3c";
}
inline bool is_frame_environment(const std::string& env) {
  return env == "minideathmatch" || env == "minideathmatch_small";
}

/// Every tunable of a run. Budget fields left at 0 resolve to the
/// algorithm's default, scaled by the preset.
struct RunConfig {
  std::string algorithm = "dqn";
  std::string environment = "minideathmatch";
  std::string preset = "full";
  std::uint64_t seed = 0;
  std::uint64_t epochs = 20;
  std::uint64_t observations_per_epoch = 0;
  std::uint64_t eval_observations = 0;
  /// When positive, evaluation plays exactly this many complete episodes.
  std::uint64_t eval_episodes = 0;
  double eval_epsilon = 0.05;

  std::uint64_t batch_size = 64;
  std::uint64_t replay_capacity = 10000;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  std::uint64_t anneal_steps = 0;
  std::uint64_t warmup_observations = 0;
  std::uint64_t target_sync_interval = 1;
  bool use_replay = true;

  double discount = 0.99;
  double learning_rate = 2e-5;
  double rmsprop_decay = 0.99;
  double rmsprop_epsilon = 1e-8;
  double clip_threshold = 10.0;
  bool anneal_learning_rate = true;

  double entropy_beta = 0.01;
  double critic_scale = 0.5;
  std::uint64_t t_max = 5;
  std::uint64_t workers = 16;
  bool serialized = false;

  double tabular_alpha = 0.1;
  double tabular_epsilon = 0.3;  // zero-initialised rows tie to action 0; lower rates rarely leave it

  std::uint64_t history = 6;
  std::uint64_t downsample = 2;
  bool delta_frames = false;
  bool sign_rewards = true;

  std::uint64_t conv_layers = 2;
  std::uint64_t conv_filters = 16;
  std::uint64_t hidden_units = 32;
  std::uint64_t lstm_units = 32;

  std::uint64_t chain_length = 5;
  std::uint64_t episode_step_limit = 10000;
  double death_penalty = 0.0;

  std::string output_dir = "run";
  bool wall_clock = true;

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

/// Accepts plain integers and integral scientific forms such as 2e6.
inline std::uint64_t parse_count(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (!text.empty() && r.ec == std::errc() && r.ptr == text.data() + text.size()) return v;
  double d = 0.0;
  const auto rd = std::from_chars(text.data(), text.data() + text.size(), d);
  if (text.empty() || rd.ec != std::errc() || rd.ptr != text.data() + text.size() || !(d >= 0.0) ||
      d > 9007199254740992.0 || std::floor(d) != d) {
    throw ConfigError("config: key '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return static_cast<std::uint64_t>(d);
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config: key '" + key + "' expects true or false, got '" + text + "'");
}

inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1] ? 1u : 0u)});
      diag = up;
    }
  }
  return row[b.size()];
}

}  // namespace detail

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Registry of every settable key, in snapshot order.
inline const std::vector<ConfigKey>& config_keys() {
  using detail::format_double;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto text = [&](const char* name, std::string RunConfig::*m, const char* help) {
      k.push_back({name, help, [m](RunConfig& c, const std::string& v) { c.*m = v; },
                   [m](const RunConfig& c) { return c.*m; }});
    };
    auto count = [&](const char* name, std::uint64_t RunConfig::*m, const char* help) {
      k.push_back({name, help,
                   [m, name](RunConfig& c, const std::string& v) { c.*m = detail::parse_count(name, v); },
                   [m](const RunConfig& c) { return std::to_string(c.*m); }});
    };
    auto real = [&](const char* name, double RunConfig::*m, const char* help) {
      k.push_back({name, help,
                   [m, name](RunConfig& c, const std::string& v) { c.*m = detail::parse_double(name, v); },
                   [m](const RunConfig& c) { return format_double(c.*m); }});
    };
    auto flag = [&](const char* name, bool RunConfig::*m, const char* help) {
      k.push_back({name, help,
                   [m, name](RunConfig& c, const std::string& v) { c.*m = detail::parse_bool(name, v); },
                   [m](const RunConfig& c) { return std::string(c.*m ? "true" : "false"); }});
    };
    text("algorithm", &RunConfig::algorithm, "tabular_q, sarsa, reinforce, a2c, dqn, a3c or lstm_a3c");
    text("environment", &RunConfig::environment,
         "chain_walk, grid_world, bandit, memory_cue, minideathmatch or minideathmatch_small");
    text("preset", &RunConfig::preset, "full, or desk to shrink the budgets 100x");
    count("seed", &RunConfig::seed, "master seed");
    count("epochs", &RunConfig::epochs, "training epochs; 0 evaluates the initial policy only");
    count("observations_per_epoch", &RunConfig::observations_per_epoch, "training observations per epoch");
    count("eval_observations", &RunConfig::eval_observations, "evaluation observations per epoch");
    count("eval_episodes", &RunConfig::eval_episodes, "if positive, evaluate this many whole episodes instead");
    real("eval_epsilon", &RunConfig::eval_epsilon, "exploration during evaluation of value-based agents");
    count("batch_size", &RunConfig::batch_size, "DQN minibatch size");
    count("replay_capacity", &RunConfig::replay_capacity, "DQN replay memory capacity");
    real("epsilon_start", &RunConfig::epsilon_start, "initial exploration rate");
    real("epsilon_end", &RunConfig::epsilon_end, "final exploration rate");
    count("anneal_steps", &RunConfig::anneal_steps, "observations over which epsilon anneals");
    count("warmup_observations", &RunConfig::warmup_observations, "observations before DQN updates start");
    count("target_sync_interval", &RunConfig::target_sync_interval, "DQN updates between target copies");
    flag("use_replay", &RunConfig::use_replay, "sample minibatches from replay memory");
    real("discount", &RunConfig::discount, "discount factor");
    real("learning_rate", &RunConfig::learning_rate, "initial RMSProp learning rate");
    real("rmsprop_decay", &RunConfig::rmsprop_decay, "RMSProp decay");
    real("rmsprop_epsilon", &RunConfig::rmsprop_epsilon, "RMSProp numerical epsilon");
    real("clip_threshold", &RunConfig::clip_threshold, "elementwise gradient clip");
    flag("anneal_learning_rate", &RunConfig::anneal_learning_rate, "decay the learning rate linearly to zero");
    real("entropy_beta", &RunConfig::entropy_beta, "entropy regularization weight");
    real("critic_scale", &RunConfig::critic_scale, "critic loss weight");
    count("t_max", &RunConfig::t_max, "actor-critic rollout length");
    count("workers", &RunConfig::workers, "A3C worker threads");
    flag("serialized", &RunConfig::serialized, "run A3C workers round-robin on one thread");
    real("tabular_alpha", &RunConfig::tabular_alpha, "tabular step size");
    real("tabular_epsilon", &RunConfig::tabular_epsilon, "tabular training exploration rate");
    count("history", &RunConfig::history, "frames per stacked observation");
    count("downsample", &RunConfig::downsample, "frame downsampling factor");
    flag("delta_frames", &RunConfig::delta_frames, "feed frame differences");
    flag("sign_rewards", &RunConfig::sign_rewards, "train on reward signs");
    count("conv_layers", &RunConfig::conv_layers, "convolutional layers for frame input");
    count("conv_filters", &RunConfig::conv_filters, "filters in the last convolutional layer");
    count("hidden_units", &RunConfig::hidden_units, "hidden units for vector input; 0 is linear");
    count("lstm_units", &RunConfig::lstm_units, "LSTM units of lstm_a3c");
    count("chain_length", &RunConfig::chain_length, "ChainWalk length");
    count("episode_step_limit", &RunConfig::episode_step_limit, "step cap for the small environments");
    real("death_penalty", &RunConfig::death_penalty, "reward subtracted when the agent dies");
    text("output_dir", &RunConfig::output_dir, "run directory for metrics and checkpoints");
    flag("wall_clock", &RunConfig::wall_clock, "record elapsed seconds; false writes 0");
    return k;
  }();
  return keys;
}

inline const ConfigKey* find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return &k;
  return nullptr;
}

inline std::string suggest_key(const std::string& name) {
  std::string best;
  std::size_t best_d = std::string::npos;
  for (const auto& k : config_keys()) {
    const std::size_t d = detail::edit_distance(name, k.name);
    if (d < best_d) {
      best_d = d;
      best = k.name;
    }
  }
  return best_d <= std::max<std::size_t>(2, name.size() / 3) ? best : "";
}

/// Collects key=value assignments; later assignments win.
class ConfigBuilder {
 public:
  void set(const std::string& key, const std::string& value, const std::string& where = "") {
    const ConfigKey* k = find_key(key);
    if (!k) {
      const std::string hint = suggest_key(key);
      throw ConfigError((where.empty() ? "" : where + ": ") + "unknown key '" + key + "'" +
                        (hint.empty() ? "" : "; did you mean '" + hint + "'?"));
    }
    k->set(scratch_, value);  // type-checks now, applied in order later
    assignments_.emplace_back(key, value);
  }

  void load_text(std::istream& in, const std::string& source) {
    std::string line;
    for (int n = 1; std::getline(in, line); ++n) {
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string where = source + ":" + std::to_string(n);
      if (eq == std::string::npos) throw ConfigError(where + ": expected key=value");
      set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)), where);
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot read '" + path + "'");
    load_text(in, path);
  }

  bool explicitly_set(const std::string& key) const {
    return std::any_of(assignments_.begin(), assignments_.end(), [&](const auto& a) { return a.first == key; });
  }

  RunConfig build() const;

 private:
  RunConfig scratch_;
  std::vector<std::pair<std::string, std::string>> assignments_;
};

/// Full-scale budgets of the algorithm family: value-based runs use the
/// DQN protocol, policy-gradient runs the A3C protocol.
struct Budgets {
  std::uint64_t observations_per_epoch;
  std::uint64_t eval_observations;
  std::uint64_t warmup_observations;
  std::uint64_t anneal_steps;
};

inline Budgets full_budgets(const std::string& algorithm) {
  if (is_value_based(algorithm)) return {50000, 10000, 10000, 2000000};
  return {800000, 100000, 10000, 2000000};
}

inline std::uint64_t preset_divisor(const std::string& preset) {
  if (preset == "full") return 1;
  if (preset == "desk") return 100;
  throw ConfigError("config: unknown preset '" + preset + "' (use full or desk)");
}

/// Fills unset budgets from the algorithm and preset, then checks ranges and
/// algorithm/environment compatibility.
inline void resolve(RunConfig& c, const std::set<std::string>& explicit_keys = {}) {
  const std::uint64_t div = preset_divisor(c.preset);
  const Budgets b = full_budgets(c.algorithm);
  auto fill = [&](std::uint64_t& field, const char* key, std::uint64_t full) {
    if (!explicit_keys.count(key) && field == 0) field = std::max<std::uint64_t>(1, full / div);
  };
  fill(c.observations_per_epoch, "observations_per_epoch", b.observations_per_epoch);
  fill(c.eval_observations, "eval_observations", b.eval_observations);
  fill(c.warmup_observations, "warmup_observations", b.warmup_observations);
  fill(c.anneal_steps, "anneal_steps", b.anneal_steps);

  auto fail = [](const std::string& m) { throw ConfigError("config: " + m); };
  const auto& algos = algorithm_names();
  if (std::find(algos.begin(), algos.end(), c.algorithm) == algos.end()) fail("unknown algorithm '" + c.algorithm + "'");
  const auto& envs = environment_names();
  if (std::find(envs.begin(), envs.end(), c.environment) == envs.end()) {
    fail("unknown environment '" + c.environment + "'");
  }
  if (is_tabular(c.algorithm) && is_frame_environment(c.environment)) {
    fail(c.algorithm + " needs a small discrete environment; " + c.environment + " emits frames");
  }
  if (c.algorithm == "a2c" && !explicit_keys.count("workers")) c.workers = 1;
  if (c.algorithm == "a2c" && c.workers != 1) {
    fail("a2c is the single-worker synchronous variant; use a3c for workers=" + std::to_string(c.workers));
  }
  if (c.algorithm == "lstm_a3c" && c.lstm_units == 0) fail("lstm_a3c needs lstm_units > 0");
  if (c.observations_per_epoch == 0) fail("observations_per_epoch must be positive");
  if (c.eval_observations == 0 && c.eval_episodes == 0) fail("evaluation needs eval_observations or eval_episodes");
  if (c.workers == 0) fail("workers must be positive");
  if (c.t_max == 0) fail("t_max must be positive");
  if (c.history == 0 || c.downsample == 0) fail("history and downsample must be positive");
  if (c.episode_step_limit == 0) fail("episode_step_limit must be positive");
  if (is_frame_environment(c.environment) && c.conv_layers == 0) fail("frame input needs conv_layers >= 1");
  if (c.conv_filters == 0) fail("conv_filters must be positive");
  if (c.chain_length < 2) fail("chain_length must be at least 2");
  if (!(c.learning_rate >= 0.0)) fail("learning_rate must be non-negative");
  if (!(c.tabular_alpha > 0.0)) fail("tabular_alpha must be positive");
  if (!(c.rmsprop_decay >= 0.0 && c.rmsprop_decay < 1.0)) fail("rmsprop_decay must lie in [0, 1)");
  if (!(c.discount >= 0.0 && c.discount <= 1.0)) fail("discount must lie in [0, 1]");
  for (double p : {c.eval_epsilon, c.epsilon_start, c.epsilon_end, c.tabular_epsilon}) {
    if (!(p >= 0.0 && p <= 1.0)) fail("exploration rates must lie in [0, 1]");
  }
  if (c.epsilon_end > c.epsilon_start) fail("epsilon_end must not exceed epsilon_start");
  if (c.algorithm == "dqn" && c.use_replay) {
    if (c.batch_size == 0 || c.batch_size > c.replay_capacity) fail("batch_size must lie in [1, replay_capacity]");
    if (c.warmup_observations < c.batch_size) fail("warmup_observations must be at least batch_size");
  }
  if (c.output_dir.empty()) fail("output_dir must not be empty");
}

inline RunConfig ConfigBuilder::build() const {
  RunConfig c;
  std::set<std::string> keys;
  for (const auto& [k, v] : assignments_) {
    find_key(k)->set(c, v);
    keys.insert(k);
  }
  resolve(c, keys);
  return c;
}

/// key=value lines in registry order; parses back to the same config.
inline std::string snapshot(const RunConfig& c) {
  std::ostringstream out;
  for (const auto& k : config_keys()) out << k.name << '=' << k.get(c) << '\n';
  return out.str();
}

/// Applies GRIDRL_SEED when set; it outranks files and flags.
inline void apply_seed_override(ConfigBuilder& b, const char* variable = "GRIDRL_SEED") {
  if (const char* v = std::getenv(variable); v && *v) b.set("seed", v, std::string("environment ") + variable);
}

}  // namespace gridrl::harness
