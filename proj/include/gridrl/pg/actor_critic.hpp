#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gridrl/a3c/returns.hpp"
#include "gridrl/approx/network.hpp"
#include "gridrl/approx/optim.hpp"
#include "gridrl/core/mdp.hpp"
#include "gridrl/envs/tensor_env.hpp"
#include "gridrl/pg/policy.hpp"

namespace gridrl {

struct A2cOptions {
  double entropy_beta = 0.01;
  /// Critic loss is critic_scale * 0.5 * sum_t (R_t - V_t)^2.
  double critic_scale = 0.5;
  /// Also fill the separate actor/critic/entropy sets (three extra backward passes).
  bool components = false;
};

/// Gradients for one segment. `total` is the descent direction handed to the
/// optimizer: critic - actor - entropy. `actor` and `entropy` are ascent
/// directions and `critic` is the gradient of the critic loss; they are only
/// filled when A2cOptions::components is set.
template <class T>
struct A2cGradients {
  ParameterSet<T> total;
  ParameterSet<T> actor;
  ParameterSet<T> critic;
  ParameterSet<T> entropy;
  std::vector<double> returns;
  std::vector<double> values;
  std::vector<double> advantages;
  double entropy_sum = 0.0;
  double critic_loss = 0.0;
};

/// Actor-critic gradients over a segment of consecutive transitions, replayed
/// from `initial_state` for recurrent nets. The bootstrap value is ignored
/// (taken as 0) when the segment ends terminal. Advantages are constants: no
/// gradient flows from the actor term into the value head.
template <class T>
A2cGradients<T> a2c_gradients(std::span<const Transition<Tensor<T>>> segment, const Network<T>& net,
                              const ParameterSet<T>& params, double discount, double bootstrap_value,
                              const A2cOptions& options = {}, const RecurrentState<T>& initial_state = {}) {
  if (segment.empty()) throw ParameterError("a2c_gradients: empty segment");
  const std::size_t ph = net.head_index(kPolicyHead);
  const std::size_t vh = net.head_index(kValueHead);
  std::vector<Tensor<T>> inputs;
  std::vector<double> rewards;
  for (const auto& t : segment) {
    inputs.push_back(t.obs_before);
    rewards.push_back(t.reward);
  }
  const auto seq = forward_sequence<T>(net, params, inputs, initial_state);

  A2cGradients<T> out;
  out.returns = nstep_returns(rewards, bootstrap_value, discount, segment.back().terminal);
  const std::size_t n = segment.size();
  const std::size_t k = shape_size(net.head_shape(ph));
  // Per-step logit gradients of each term, kept separate for the component pass.
  std::vector<std::vector<double>> actor_g(n), entropy_g(n);
  std::vector<double> critic_g(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto pi = policy_output(seq.steps[t].outputs[ph]);
    const double v = static_cast<double>(seq.steps[t].outputs[vh][0]);
    const double adv = out.returns[t] - v;
    out.values.push_back(v);
    out.advantages.push_back(adv);
    actor_g[t] = score_at_logits(pi, segment[t].action);
    for (double& g : actor_g[t]) g *= adv;
    const auto ent = entropy_regularizer(pi, options.entropy_beta);
    out.entropy_sum += ent.entropy;
    entropy_g[t] = ent.logit_gradient;
    critic_g[t] = options.critic_scale * (v - out.returns[t]);
    out.critic_loss += options.critic_scale * 0.5 * adv * adv;
  }

  auto run = [&](double actor_sign, double entropy_sign, double critic_sign) {
    ParameterSet<T> grads = net.zero_gradients();
    std::vector<std::vector<Tensor<T>>> head_grads(n, std::vector<Tensor<T>>(net.head_count()));
    for (std::size_t t = 0; t < n; ++t) {
      if (actor_sign != 0.0 || entropy_sign != 0.0) {
        std::vector<T> g(k);
        for (std::size_t j = 0; j < k; ++j) {
          g[j] = static_cast<T>(actor_sign * actor_g[t][j] + entropy_sign * entropy_g[t][j]);
        }
        head_grads[t][ph] = Tensor<T>(net.head_shape(ph), std::move(g));
      }
      if (critic_sign != 0.0) head_grads[t][vh] = Tensor<T>(net.head_shape(vh), {static_cast<T>(critic_sign * critic_g[t])});
    }
    backward_sequence(net, params, seq, head_grads, grads);
    return grads;
  };
  out.total = run(-1.0, -1.0, 1.0);
  if (options.components) {
    out.actor = run(1.0, 0.0, 0.0);
    out.entropy = run(0.0, 1.0, 0.0);
    out.critic = run(0.0, 0.0, 1.0);
  }
  return out;
}

struct ActorCriticConfig {
  std::size_t t_max = 5;
  double discount = 0.99;
  double entropy_beta = 0.01;
  double critic_scale = 0.5;
  RmsPropConfig rmsprop{};
  double clip_threshold = 10.0;
  /// Decay the learning rate linearly to zero over the observation budget.
  bool anneal_learning_rate = true;

  void validate() const {
    if (t_max < 1) throw ConfigError("actor-critic: t_max must be at least 1");
    if (!(discount >= 0.0 && discount <= 1.0)) throw ConfigError("actor-critic: discount must lie in [0, 1]");
    if (!(entropy_beta >= 0.0)) throw ConfigError("actor-critic: entropy_beta must be non-negative");
    if (!(clip_threshold > 0.0)) throw ConfigError("actor-critic: clip threshold must be positive");
    if (!(rmsprop.learning_rate >= 0.0)) throw ConfigError("actor-critic: learning rate must be non-negative");
  }

  A2cOptions options() const { return {entropy_beta, critic_scale, false}; }
};

struct EpisodeRecord {
  std::size_t worker = 0;
  /// Global observation count when the episode ended.
  std::uint64_t observation = 0;
  double score = 0.0;
  std::size_t length = 0;
};

template <class T>
struct ActorCriticRun {
  ParameterSet<T> params;
  ParameterSet<T> stats;
  std::vector<EpisodeRecord> episodes;
  std::uint64_t observations = 0;
  std::uint64_t updates = 0;
};

template <class T>
double value_estimate(const Network<T>& net, const ParameterSet<T>& params, const Tensor<T>& obs,
                      const RecurrentState<T>& state) {
  return static_cast<double>(net.forward(params, obs, &state).outputs[net.head_index(kValueHead)][0]);
}

/// Synchronous n-step advantage actor-critic on one environment: roll out up
/// to t_max steps, compute a2c_gradients from the segment-start state, clip,
/// apply RMSProp, repeat until `total_observations` steps have been taken.
/// Actions come from Rng(seed); the environment is reseeded with
/// derive_seed(seed, 1). Recurrent state carries across segments and is
/// zeroed at episode start.
template <class T>
ActorCriticRun<T> run_a2c(const ActorCriticConfig& config, TensorEnvironment<T>& env, const Network<T>& net,
                          ParameterSet<T> params, std::uint64_t total_observations, std::uint64_t seed) {
  config.validate();
  net.check_parameters(params);
  const std::size_t ph = net.head_index(kPolicyHead);
  ActorCriticRun<T> run;
  run.stats = params.zeros_like();
  Rng rng(seed);
  env.reseed(derive_seed(seed, 1));
  Tensor<T> obs = env.reset();
  RecurrentState<T> state = net.initial_state();
  double score = 0.0;
  std::size_t length = 0;
  std::vector<Transition<Tensor<T>>> segment;
  while (run.observations < total_observations) {
    const RecurrentState<T> segment_start = state;
    segment.clear();
    bool terminal = false;
    while (segment.size() < config.t_max && !terminal) {
      auto fr = net.forward(params, obs, &state);
      const std::size_t a = sample_action(policy_output(fr.outputs[ph]), rng);
      auto st = env.step(a);
      ++run.observations;
      score += st.reward;
      ++length;
      terminal = st.terminal;
      segment.push_back({obs, a, st.reward, st.observation, st.terminal});
      state = std::move(fr.state);
      obs = std::move(st.observation);
    }
    const double bootstrap = terminal ? 0.0 : value_estimate(net, params, obs, state);
    auto g = a2c_gradients<T>(segment, net, params, config.discount, bootstrap, config.options(), segment_start);
    clip_gradients(g.total, static_cast<T>(config.clip_threshold));
    RmsPropConfig rms = config.rmsprop;
    if (config.anneal_learning_rate) rms.learning_rate = linear_lr(rms.learning_rate, run.observations, total_observations);
    rmsprop_step(params, g.total, run.stats, rms);
    ++run.updates;
    if (terminal) {
      run.episodes.push_back({0, run.observations, score, length});
      score = 0.0;
      length = 0;
      obs = env.reset();
      state = net.initial_state();
    }
  }
  run.params = std::move(params);
  return run;
}

}  // namespace gridrl
