#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "gridrl/a3c/returns.hpp"
#include "gridrl/approx/network.hpp"
#include "gridrl/core/mdp.hpp"
#include "gridrl/pg/policy.hpp"

namespace gridrl {

/// A policy-gradient estimate in the ascent direction, plus the scalar weight
/// each step's score function was multiplied by.
template <class T>
struct GradEstimate {
  ParameterSet<T> gradients;
  std::vector<double> weight_trace;
};

namespace detail {

template <class T>
std::vector<Tensor<T>> policy_only_grads(const Network<T>& net, std::size_t policy_head, const PolicyOutput& pi,
                                         std::span<const double> logit_grad) {
  std::vector<Tensor<T>> g(net.head_count());
  g[policy_head] = to_tensor<T>(std::vector<double>(logit_grad.begin(), logit_grad.end()), {pi.size()});
  return g;
}

}  // namespace detail

/// Sum over steps of R_t * grad ln pi(a_t|x_t), with R_t the discounted
/// return from t to the end of the recorded steps. Recurrent nets are run
/// from the zero state at the first step.
template <class T>
GradEstimate<T> reinforce_gradient(std::span<const Transition<Tensor<T>>> steps, const Network<T>& net,
                                   const ParameterSet<T>& params, double discount) {
  if (steps.empty()) throw ParameterError("reinforce_gradient: empty episode");
  const std::size_t ph = net.head_index(kPolicyHead);
  std::vector<Tensor<T>> inputs;
  std::vector<double> rewards;
  for (const auto& t : steps) {
    inputs.push_back(t.obs_before);
    rewards.push_back(t.reward);
  }
  const auto seq = forward_sequence<T>(net, params, inputs, {});
  GradEstimate<T> est{net.zero_gradients(), nstep_returns(rewards, 0.0, discount, true)};
  std::vector<std::vector<Tensor<T>>> head_grads;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto pi = policy_output(seq.steps[t].outputs[ph]);
    const std::size_t a = steps[t].action;
    if (a >= pi.size()) throw ParameterError("reinforce_gradient: logged action out of range");
    if (!(pi.action_probabilities[a] > 0.0)) {
      throw ValidationError("reinforce_gradient: logged action " + std::to_string(a) + " at step " + std::to_string(t) +
                            " has probability zero; its log is undefined");
    }
    auto g = score_at_logits(pi, a);
    for (double& v : g) v *= est.weight_trace[t];
    head_grads.push_back(detail::policy_only_grads(net, ph, pi, g));
  }
  backward_sequence(net, params, seq, head_grads, est.gradients);
  return est;
}

template <class T>
GradEstimate<T> reinforce_gradient(const Episode<Tensor<T>>& episode, const Network<T>& net,
                                   const ParameterSet<T>& params, double discount) {
  return reinforce_gradient<T>(std::span<const Transition<Tensor<T>>>(episode.transitions()), net, params, discount);
}

/// params += learning_rate * gradient (ascent), one version bump.
template <class T>
void gradient_ascent_step(ParameterSet<T>& params, const ParameterSet<T>& gradient, double learning_rate) {
  params.add_scaled(gradient, static_cast<T>(learning_rate));
  params.bump_version();
}

/// Per-state softmax policies of a feedforward net fed one-hot state vectors,
/// with the forward caches kept for backpropagation.
template <class T>
struct StatePolicies {
  std::vector<ForwardResult<T>> forward;
  std::vector<PolicyOutput> pi;

  PolicyTable table() const {
    PolicyTable t(pi.size(), pi.front().size());
    for (std::size_t s = 0; s < pi.size(); ++s)
      for (std::size_t a = 0; a < pi[s].size(); ++a) t(s, a) = pi[s].action_probabilities[a];
    return t;
  }
};

template <class T>
StatePolicies<T> state_policies(const TabularMdp& mdp, const Network<T>& net, const ParameterSet<T>& params) {
  if (net.recurrent()) throw UsageError("state_policies: the policy must be feedforward over one-hot states");
  if (net.input_shape() != Shape{mdp.n_states()}) {
    throw ShapeError("state_policies: net input must be a one-hot vector of " + std::to_string(mdp.n_states()) +
                     " states");
  }
  const std::size_t ph = net.head_index(kPolicyHead);
  if (shape_size(net.head_shape(ph)) != mdp.n_actions()) throw ShapeError("state_policies: policy head size != actions");
  StatePolicies<T> out;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    out.forward.push_back(net.forward(params, one_hot<T>(s, mdp.n_states())));
    out.pi.push_back(policy_output(out.forward.back().outputs[ph]));
  }
  return out;
}

inline constexpr double kEnumerationLimit = 1e7;

namespace detail {

inline void check_enumeration_guard(const TabularMdp& mdp, std::size_t horizon, const char* who) {
  const double count = std::pow(static_cast<double>(mdp.n_states() * mdp.n_actions()), static_cast<double>(horizon));
  if (count > kEnumerationLimit) {
    throw ParameterError(std::string(who) + ": " + std::to_string(mdp.n_states()) + " states x " +
                         std::to_string(mdp.n_actions()) + " actions over horizon " + std::to_string(horizon) +
                         " exceeds the enumeration limit of 1e7 trajectories");
  }
}

/// Depth-first walk over every trajectory of positive probability that stops
/// at a terminal state or after `horizon` actions. `leaf` receives the
/// visited states, actions, rewards and the trajectory probability.
template <class Leaf>
void enumerate_trajectories(const TabularMdp& mdp, const PolicyTable& pi, std::size_t horizon, Leaf&& leaf) {
  std::vector<std::size_t> states, actions;
  std::vector<double> rewards;
  std::function<void(std::size_t, double)> walk = [&](std::size_t s, double prob) {
    if (actions.size() == horizon || mdp.is_terminal(s)) {
      leaf(std::span<const std::size_t>(states), std::span<const std::size_t>(actions),
           std::span<const double>(rewards), prob);
      return;
    }
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const double pa = pi(s, a);
      if (pa == 0.0) continue;
      states.push_back(s);
      actions.push_back(a);
      rewards.push_back(mdp.reward(s, a));
      const auto row = mdp.next_state_probs(s, a);
      for (std::size_t s2 = 0; s2 < row.size(); ++s2)
        if (row[s2] > 0.0) walk(s2, prob * pa * row[s2]);
      states.pop_back();
      actions.pop_back();
      rewards.pop_back();
    }
  };
  walk(mdp.initial_state(), 1.0);
}

/// sum_{s,a} W[s][a] * grad ln pi(a|s), one backward pass per state.
template <class T>
ParameterSet<T> weighted_score_sum(const Network<T>& net, const ParameterSet<T>& params, const StatePolicies<T>& sp,
                                   const StateActionTable& w) {
  const std::size_t ph = net.head_index(kPolicyHead);
  ParameterSet<T> grads = net.zero_gradients();
  for (std::size_t s = 0; s < sp.pi.size(); ++s) {
    const auto& pi = sp.pi[s];
    std::vector<double> g(pi.size(), 0.0);
    bool any = false;
    for (std::size_t a = 0; a < pi.size(); ++a) {
      if (w(s, a) == 0.0) continue;
      any = true;
      for (std::size_t j = 0; j < pi.size(); ++j) g[j] += w(s, a) * ((j == a ? 1.0 : 0.0) - pi.action_probabilities[j]);
    }
    if (!any) continue;
    net.backward_into(params, sp.forward[s].cache, detail::policy_only_grads(net, ph, pi, g), grads);
  }
  return grads;
}

}  // namespace detail

/// Exact expectation of the REINFORCE estimator, E[sum_t G_t grad ln pi(a_t|s_t)],
/// over all trajectories truncated at `horizon` actions. With discount 1 this
/// is the gradient of the expected truncated return; `discount` defaults to
/// the MDP's own and may be 1 because the horizon is finite.
template <class T>
ParameterSet<T> exact_policy_gradient(const TabularMdp& mdp, const Network<T>& net, const ParameterSet<T>& params,
                                      std::size_t horizon, std::optional<double> discount = std::nullopt) {
  detail::check_enumeration_guard(mdp, horizon, "exact_policy_gradient");
  const double gamma = discount.value_or(mdp.discount());
  const auto sp = state_policies(mdp, net, params);
  StateActionTable w(mdp.n_states(), mdp.n_actions());
  detail::enumerate_trajectories(mdp, sp.table(), horizon,
                                 [&](auto states, auto actions, auto rewards, double prob) {
                                   const auto g = nstep_returns(rewards, 0.0, gamma, true);
                                   for (std::size_t t = 0; t < states.size(); ++t) w(states[t], actions[t]) += prob * g[t];
                                 });
  return detail::weighted_score_sum(net, params, sp, w);
}

/// Expected truncated return E[sum_t discount^t r_t] under the net's policy,
/// by the same enumeration.
template <class T>
double exact_expected_return(const TabularMdp& mdp, const Network<T>& net, const ParameterSet<T>& params,
                             std::size_t horizon, std::optional<double> discount = std::nullopt) {
  detail::check_enumeration_guard(mdp, horizon, "exact_expected_return");
  const double gamma = discount.value_or(mdp.discount());
  const auto sp = state_policies(mdp, net, params);
  double j = 0.0;
  detail::enumerate_trajectories(mdp, sp.table(), horizon, [&](auto, auto, auto rewards, double prob) {
    j += prob * discounted_return(rewards, gamma);
  });
  return j;
}

/// Max-norm of E[sum_t grad ln pi(a_t|s_t) * b(s_t)], computed exactly. It is
/// zero up to round-off for any state-dependent baseline b.
template <class T>
double baseline_bias_check(const TabularMdp& mdp, const Network<T>& net, const ParameterSet<T>& params,
                           const std::function<double(std::size_t)>& baseline, std::size_t horizon) {
  detail::check_enumeration_guard(mdp, horizon, "baseline_bias_check");
  const auto sp = state_policies(mdp, net, params);
  StateActionTable w(mdp.n_states(), mdp.n_actions());
  detail::enumerate_trajectories(mdp, sp.table(), horizon, [&](auto states, auto actions, auto, double prob) {
    for (std::size_t t = 0; t < states.size(); ++t) w(states[t], actions[t]) += prob * baseline(states[t]);
  });
  return static_cast<double>(detail::weighted_score_sum(net, params, sp, w).max_abs());
}

}  // namespace gridrl
