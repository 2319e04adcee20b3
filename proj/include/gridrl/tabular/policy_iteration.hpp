#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "gridrl/core/environment.hpp"
#include "gridrl/core/mdp.hpp"
#include "gridrl/core/mdp_environment.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

/// First-visit Monte-Carlo estimate of Q^pi with per-entry sample statistics.
struct McEvaluation {
  StateActionTable q;
  StateActionTable counts;
  StateActionTable sum_sq;
  std::size_t episodes = 0;
  std::size_t truncated_episodes = 0;

  bool visited(std::size_t s, std::size_t a) const { return counts(s, a) > 0.0; }

  double standard_error(std::size_t s, std::size_t a) const {
    const double n = counts(s, a);
    if (n < 2.0) return std::numeric_limits<double>::infinity();
    const double mean = q(s, a);
    const double var = std::max(0.0, (sum_sq(s, a) - n * mean * mean) / (n - 1.0));
    return std::sqrt(var / n);
  }
};

/// Episodes longer than step_cap are truncated and counted in
/// truncated_episodes; their partial returns are still used.
inline McEvaluation mc_policy_evaluation(DiscreteEnvironment& env, const PolicyTable& policy, std::size_t episodes,
                                         double discount, Rng& rng, std::size_t step_cap = 10'000) {
  if (episodes < 1) throw ParameterError("mc_policy_evaluation: need at least one episode");
  if (policy.states() != env.state_count() || policy.actions() != env.action_count()) {
    throw ValidationError("mc_policy_evaluation: policy shape does not match the environment");
  }
  const std::size_t n_states = env.state_count();
  const std::size_t n_actions = env.action_count();
  McEvaluation out{StateActionTable(n_states, n_actions), StateActionTable(n_states, n_actions),
                   StateActionTable(n_states, n_actions)};
  StateActionTable sums(n_states, n_actions);
  std::vector<std::size_t> states;
  std::vector<std::size_t> actions;
  std::vector<double> rewards;
  std::vector<double> returns;
  std::vector<char> seen(n_states * n_actions);

  for (std::size_t ep = 0; ep < episodes; ++ep) {
    states.clear();
    actions.clear();
    rewards.clear();
    std::size_t s = env.reset();
    bool done = false;
    while (!done && states.size() < step_cap) {
      const std::size_t a = sample_discrete(rng, policy.row(s));
      const auto step = env.step(a);
      states.push_back(s);
      actions.push_back(a);
      rewards.push_back(step.reward);
      s = step.observation;
      done = step.terminal;
    }
    if (!done) ++out.truncated_episodes;
    returns.assign(rewards.size(), 0.0);
    double g = 0.0;
    for (std::size_t t = rewards.size(); t-- > 0;) {
      g = rewards[t] + discount * g;
      returns[t] = g;
    }
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t t = 0; t < states.size(); ++t) {
      const std::size_t idx = states[t] * n_actions + actions[t];
      if (seen[idx]) continue;
      seen[idx] = 1;
      sums(states[t], actions[t]) += returns[t];
      out.sum_sq(states[t], actions[t]) += returns[t] * returns[t];
      out.counts(states[t], actions[t]) += 1.0;
    }
  }
  out.episodes = episodes;
  for (std::size_t i = 0; i < out.q.values().size(); ++i) {
    const double n = out.counts.values()[i];
    out.q.values()[i] = n > 0.0 ? sums.values()[i] / n : 0.0;
  }
  return out;
}

enum class PolicyEvaluation { exact, monte_carlo };

struct PolicyIterationOptions {
  PolicyEvaluation evaluation = PolicyEvaluation::exact;
  DeterministicPolicy initial_policy;  // empty means action 0 everywhere
  std::size_t max_iterations = 10'000;
  // Monte-Carlo evaluation: exploring starts from every non-terminal (s, a).
  std::size_t rollouts_per_pair = 200;
  std::size_t rollout_step_cap = 1'000;
  std::uint64_t seed = 0;
};

struct PolicyIterationResult {
  DeterministicPolicy policy;
  StateActionTable q;
  std::size_t iterations = 0;
  /// V^{pi_k} for every evaluated policy (exact evaluation only).
  std::vector<std::vector<double>> value_history;
};

namespace detail {

inline StateActionTable mc_exploring_starts(const TabularMdp& mdp, const DeterministicPolicy& policy,
                                            const PolicyIterationOptions& options, Rng& rng) {
  StateActionTable q(mdp.n_states(), mdp.n_actions());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      double total = 0.0;
      for (std::size_t k = 0; k < options.rollouts_per_pair; ++k) {
        std::size_t state = s;
        std::size_t action = a;
        double g = 0.0;
        double scale = 1.0;
        for (std::size_t t = 0; t < options.rollout_step_cap && !mdp.is_terminal(state); ++t) {
          g += scale * mdp.reward(state, action);
          scale *= mdp.discount();
          state = sample_discrete(rng, mdp.next_state_probs(state, action));
          action = policy[state];
        }
        total += g;
      }
      q(s, a) = total / static_cast<double>(options.rollouts_per_pair);
    }
  }
  return q;
}

}  // namespace detail

/// Alternates evaluation of pi_k and greedy improvement until the policy is
/// stable. A state keeps its current action unless another action is
/// strictly better, so ties cannot make the loop oscillate.
inline PolicyIterationResult policy_iteration(const TabularMdp& mdp, const PolicyIterationOptions& options = {}) {
  DeterministicPolicy policy = options.initial_policy.empty() ? DeterministicPolicy(mdp.n_states(), 0)
                                                              : options.initial_policy;
  if (policy.size() != mdp.n_states()) throw ValidationError("policy_iteration: initial policy has the wrong size");
  for (std::size_t a : policy)
    if (a >= mdp.n_actions()) throw ValidationError("policy_iteration: initial policy action out of range");

  Rng rng(options.seed);
  PolicyIterationResult result;
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    StateActionTable q;
    if (options.evaluation == PolicyEvaluation::exact) {
      const auto v = evaluate_policy(mdp, policy);
      result.value_history.push_back(v);
      q = q_from_v(mdp, v);
    } else {
      q = detail::mc_exploring_starts(mdp, policy, options, rng);
    }
    bool changed = false;
    DeterministicPolicy next = policy;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      const std::size_t best = argmax(q.row(s));
      const double margin = 1e-12 * (1.0 + std::abs(q(s, best)));
      if (q(s, best) > q(s, policy[s]) + margin) {
        next[s] = best;
        changed = true;
      }
    }
    result.iterations = iter + 1;
    result.q = std::move(q);
    if (!changed) {
      result.policy = std::move(policy);
      return result;
    }
    policy = std::move(next);
  }
  throw ValidationError("policy_iteration: policy still changing after " + std::to_string(options.max_iterations) +
                        " iterations");
}

}  // namespace gridrl
