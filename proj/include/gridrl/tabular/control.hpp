#pragma once

#include "gridrl/core/environment.hpp"
#include "gridrl/tabular/epsilon.hpp"
#include "gridrl/tabular/td.hpp"

namespace gridrl {

struct EpisodeStats {
  double total_reward = 0.0;
  std::size_t steps = 0;
  bool terminated = false;
};

/// One epsilon-greedy Q-learning episode with online updates.
inline EpisodeStats q_learning_episode(DiscreteEnvironment& env, QTable& q, double epsilon, double discount, Rng& rng,
                                       std::size_t step_cap = 10'000) {
  EpisodeStats stats;
  std::size_t s = env.reset();
  while (stats.steps < step_cap) {
    const std::size_t a = epsilon_greedy_action(q.values.row(s), epsilon, rng);
    const auto step = env.step(a);
    q_learning_update(q, {s, a, step.reward, step.observation, step.terminal}, discount);
    stats.total_reward += step.reward;
    ++stats.steps;
    s = step.observation;
    if (step.terminal) {
      stats.terminated = true;
      break;
    }
  }
  return stats;
}

/// One epsilon-greedy SARSA episode with online updates.
inline EpisodeStats sarsa_episode(DiscreteEnvironment& env, QTable& q, double epsilon, double discount, Rng& rng,
                                  std::size_t step_cap = 10'000) {
  EpisodeStats stats;
  std::size_t s = env.reset();
  std::size_t a = epsilon_greedy_action(q.values.row(s), epsilon, rng);
  while (stats.steps < step_cap) {
    const auto step = env.step(a);
    const std::size_t next_action =
        step.terminal ? 0 : epsilon_greedy_action(q.values.row(step.observation), epsilon, rng);
    sarsa_update(q, {s, a, step.reward, step.observation, step.terminal}, next_action, discount);
    stats.total_reward += step.reward;
    ++stats.steps;
    if (step.terminal) {
      stats.terminated = true;
      break;
    }
    s = step.observation;
    a = next_action;
  }
  return stats;
}

/// Rolls out the epsilon-greedy policy of a Q table without learning.
inline EpisodeStats evaluate_q_episode(DiscreteEnvironment& env, const StateActionTable& q, double epsilon, Rng& rng,
                                       std::size_t step_cap = 10'000) {
  EpisodeStats stats;
  std::size_t s = env.reset();
  while (stats.steps < step_cap) {
    const auto step = env.step(epsilon_greedy_action(q.row(s), epsilon, rng));
    stats.total_reward += step.reward;
    ++stats.steps;
    s = step.observation;
    if (step.terminal) {
      stats.terminated = true;
      break;
    }
  }
  return stats;
}

}  // namespace gridrl
