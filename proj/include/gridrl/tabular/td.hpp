#pragma once

#include <optional>

#include "gridrl/core/mdp.hpp"
#include "gridrl/tabular/q_table.hpp"
#include "gridrl/tabular/traces.hpp"

namespace gridrl {

using StateTransition = Transition<std::size_t>;
using StateEpisode = Episode<std::size_t>;

enum class TdRule { sarsa, q_learning };

inline double sarsa_error(const QTable& q, const StateTransition& t, std::size_t next_action, double discount) {
  const double current = q(t.obs_before, t.action);
  if (t.terminal) return t.reward - current;
  return t.reward + discount * q(t.obs_after, next_action) - current;
}

inline double q_learning_error(const QTable& q, const StateTransition& t, double discount) {
  const double current = q(t.obs_before, t.action);
  if (t.terminal) return t.reward - current;
  return t.reward + discount * q.max_value(t.obs_after) - current;
}

/// One-step SARSA; returns the TD error.
inline double sarsa_update(QTable& q, const StateTransition& t, std::size_t next_action, double discount) {
  const double delta = sarsa_error(q, t, next_action, discount);
  q(t.obs_before, t.action) += q.learning_rate * delta;
  return delta;
}

/// One-step Q-learning; the logged next action plays no part.
inline double q_learning_update(QTable& q, const StateTransition& t, double discount) {
  const double delta = q_learning_error(q, t, discount);
  q(t.obs_before, t.action) += q.learning_rate * delta;
  return delta;
}

struct TdLambdaOptions {
  TdRule rule = TdRule::sarsa;
  double discount = 1.0;
  /// Offline mode computes every TD error against the Q table as it was at
  /// the start of the episode and applies the summed increments at the end.
  bool offline = false;
  /// SARSA bootstrap action for an episode that ends without a terminal flag.
  std::optional<std::size_t> final_next_action;
};

/// TD(lambda) / Q(lambda) over a recorded episode. Each step marks the
/// visited pair with trace_step, then moves every Q entry by
/// learning_rate * delta * trace. Traces are cleared before the episode.
inline QTable& td_lambda_episode(QTable& q, EligibilityTable& e, const StateEpisode& episode,
                                 const TdLambdaOptions& options) {
  if (episode.empty()) throw ParameterError("td_lambda_episode: empty episode");
  e.clear();
  const QTable frozen = options.offline ? q : QTable{};
  const QTable& reference = options.offline ? frozen : q;
  std::vector<double> pending;
  if (options.offline) pending.assign(q.values.values().size(), 0.0);

  const auto& steps = episode.transitions();
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const StateTransition& tr = steps[t];
    double delta = 0.0;
    if (options.rule == TdRule::q_learning) {
      delta = q_learning_error(reference, tr, options.discount);
    } else {
      std::size_t next_action = 0;
      if (t + 1 < steps.size()) {
        next_action = steps[t + 1].action;
      } else if (!tr.terminal) {
        if (!options.final_next_action) {
          throw ParameterError("td_lambda_episode: SARSA on a truncated episode needs final_next_action");
        }
        next_action = *options.final_next_action;
      }
      delta = sarsa_error(reference, tr, next_action, options.discount);
    }

    trace_step(e, tr.obs_before, tr.action, options.discount);
    const double step_size = q.learning_rate * delta;
    auto& traces = e.traces.values();
    auto& target = options.offline ? pending : q.values.values();
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (traces[i] != 0.0) target[i] += step_size * traces[i];
    }
  }
  if (options.offline) {
    auto& values = q.values.values();
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += pending[i];
  }
  return q;
}

}  // namespace gridrl
