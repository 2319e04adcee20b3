#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridrl/core/errors.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

struct DiscreteSpace {
  std::size_t size = 1;

  explicit DiscreteSpace(std::size_t n) : size(n) {
    if (n < 1) throw ValidationError("DiscreteSpace: size must be at least 1");
  }
  bool contains(std::size_t i) const { return i < size; }
};

template <class Obs>
struct Transition {
  Obs obs_before{};
  std::size_t action = 0;
  double reward = 0.0;
  Obs obs_after{};
  bool terminal = false;
};

template <class Obs>
class Episode {
 public:
  void push(Transition<Obs> t) {
    if (!transitions_.empty() && transitions_.back().terminal) {
      throw UsageError("Episode: transition appended after the terminal one");
    }
    if (!std::isfinite(t.reward)) throw ValidationError("Episode: non-finite reward");
    total_reward_ += t.reward;
    transitions_.push_back(std::move(t));
  }

  const std::vector<Transition<Obs>>& transitions() const { return transitions_; }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  bool complete() const { return !transitions_.empty() && transitions_.back().terminal; }
  double total_reward() const { return total_reward_; }
  const Transition<Obs>& operator[](std::size_t i) const { return transitions_[i]; }

 private:
  std::vector<Transition<Obs>> transitions_;
  double total_reward_ = 0.0;
};

/// Dense row-major [states][actions] table of reals. Used for Q values and for
/// stochastic policies.
class StateActionTable {
 public:
  StateActionTable() = default;
  StateActionTable(std::size_t states, std::size_t actions, double fill = 0.0)
      : states_(states), actions_(actions), values_(states * actions, fill) {}

  std::size_t states() const { return states_; }
  std::size_t actions() const { return actions_; }

  double& operator()(std::size_t s, std::size_t a) { return values_[s * actions_ + a]; }
  double operator()(std::size_t s, std::size_t a) const { return values_[s * actions_ + a]; }

  std::span<double> row(std::size_t s) { return {values_.data() + s * actions_, actions_}; }
  std::span<const double> row(std::size_t s) const { return {values_.data() + s * actions_, actions_}; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool operator==(const StateActionTable&) const = default;

 private:
  std::size_t states_ = 0;
  std::size_t actions_ = 0;
  std::vector<double> values_;
};

using PolicyTable = StateActionTable;
using DeterministicPolicy = std::vector<std::size_t>;

class TabularMdp {
 public:
  /// transition_probs is [S][A][S] flattened, rewards is [S][A]. Rows of
  /// terminal states are overwritten with a zero-reward self loop.
  TabularMdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition_probs,
             std::vector<double> rewards, std::size_t initial_state, double discount,
             std::set<std::size_t> terminal_states = {})
      : n_states_(n_states),
        n_actions_(n_actions),
        probs_(std::move(transition_probs)),
        rewards_(std::move(rewards)),
        initial_state_(initial_state),
        discount_(discount),
        terminal_(n_states, false) {
    if (n_states == 0 || n_actions == 0) throw ValidationError("TabularMdp: empty state or action space");
    if (probs_.size() != n_states * n_actions * n_states) {
      throw ValidationError("TabularMdp: transition table must have S*A*S entries");
    }
    if (rewards_.size() != n_states * n_actions) throw ValidationError("TabularMdp: reward table must have S*A entries");
    if (initial_state >= n_states) throw ValidationError("TabularMdp: initial state out of range");
    if (!(discount >= 0.0 && discount < 1.0)) throw ValidationError("TabularMdp: discount must lie in [0, 1)");
    for (std::size_t s : terminal_states) {
      if (s >= n_states) throw ValidationError("TabularMdp: terminal state out of range");
      terminal_[s] = true;
      for (std::size_t a = 0; a < n_actions; ++a) {
        for (std::size_t s2 = 0; s2 < n_states; ++s2) probs_[index(s, a, s2)] = (s2 == s) ? 1.0 : 0.0;
        rewards_[s * n_actions + a] = 0.0;
      }
    }
    for (std::size_t s = 0; s < n_states; ++s) {
      for (std::size_t a = 0; a < n_actions; ++a) {
        double sum = 0.0;
        for (std::size_t s2 = 0; s2 < n_states; ++s2) {
          const double p = probs_[index(s, a, s2)];
          if (!(p >= 0.0) || !std::isfinite(p)) {
            throw ValidationError("TabularMdp: negative or non-finite probability at (" + std::to_string(s) + ", " +
                                  std::to_string(a) + ")");
          }
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
          throw ValidationError("TabularMdp: transition row (" + std::to_string(s) + ", " + std::to_string(a) +
                                ") sums to " + std::to_string(sum));
        }
        if (!std::isfinite(rewards_[s * n_actions + a])) throw ValidationError("TabularMdp: non-finite reward");
      }
    }
  }

  std::size_t n_states() const { return n_states_; }
  std::size_t n_actions() const { return n_actions_; }
  std::size_t initial_state() const { return initial_state_; }
  double discount() const { return discount_; }
  bool is_terminal(std::size_t s) const { return terminal_[s]; }
  std::set<std::size_t> terminal_states() const {
    std::set<std::size_t> out;
    for (std::size_t s = 0; s < n_states_; ++s)
      if (terminal_[s]) out.insert(s);
    return out;
  }

  double prob(std::size_t s, std::size_t a, std::size_t s2) const { return probs_[index(s, a, s2)]; }
  double reward(std::size_t s, std::size_t a) const { return rewards_[s * n_actions_ + a]; }
  std::span<const double> next_state_probs(std::size_t s, std::size_t a) const {
    return {probs_.data() + index(s, a, 0), n_states_};
  }

  const std::vector<double>& transition_table() const { return probs_; }
  const std::vector<double>& reward_table() const { return rewards_; }

  TabularMdp with_discount(double discount) const {
    return TabularMdp(n_states_, n_actions_, probs_, rewards_, initial_state_, discount, terminal_states());
  }

 private:
  std::size_t index(std::size_t s, std::size_t a, std::size_t s2) const {
    return (s * n_actions_ + a) * n_states_ + s2;
  }

  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> probs_;
  std::vector<double> rewards_;
  std::size_t initial_state_;
  double discount_;
  std::vector<bool> terminal_;
};

/// G = sum_k discount^k * rewards[k]; the first reward is undiscounted.
inline double discounted_return(std::span<const double> rewards, double discount) {
  if (!(discount >= 0.0 && discount <= 1.0)) throw ParameterError("discounted_return: discount must lie in [0, 1]");
  double g = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) g = rewards[k] + discount * g;
  return g;
}

inline double bellman_backup(const TabularMdp& mdp, std::span<const double> v, std::size_t s, std::size_t a) {
  double expected = 0.0;
  const auto row = mdp.next_state_probs(s, a);
  for (std::size_t s2 = 0; s2 < mdp.n_states(); ++s2) expected += row[s2] * v[s2];
  return mdp.reward(s, a) + mdp.discount() * expected;
}

/// max_s |V(s) - max_a [R(s,a) + gamma * sum_s' T V(s')]|
inline double bellman_residual(const TabularMdp& mdp, std::span<const double> v) {
  double residual = 0.0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) best = std::max(best, bellman_backup(mdp, v, s, a));
    residual = std::max(residual, std::abs(best - v[s]));
  }
  return residual;
}

inline std::vector<double> value_iteration(const TabularMdp& mdp, double tolerance,
                                           std::size_t max_sweeps = 1'000'000) {
  if (!(tolerance > 0.0)) throw ParameterError("value_iteration: tolerance must be positive");
  std::vector<double> v(mdp.n_states(), 0.0);
  std::vector<double> next(mdp.n_states(), 0.0);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double residual = 0.0;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) best = std::max(best, bellman_backup(mdp, v, s, a));
      next[s] = mdp.is_terminal(s) ? 0.0 : best;
      residual = std::max(residual, std::abs(best - v[s]));
    }
    if (residual <= tolerance) return v;
    std::swap(v, next);
  }
  throw ValidationError("value_iteration: no convergence within " + std::to_string(max_sweeps) + " sweeps");
}

/// Q(s,a) = R(s,a) + gamma * sum_s' T(s,a,s') V(s'); zero on terminal states.
inline StateActionTable q_from_v(const TabularMdp& mdp, std::span<const double> v) {
  if (v.size() != mdp.n_states()) {
    throw ValidationError("q_from_v: value table has " + std::to_string(v.size()) + " entries, expected " +
                          std::to_string(mdp.n_states()));
  }
  StateActionTable q(mdp.n_states(), mdp.n_actions());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) q(s, a) = bellman_backup(mdp, v, s, a);
  }
  return q;
}

/// argmax with the lowest index winning ties.
inline std::size_t argmax(std::span<const double> row) {
  if (row.empty()) throw ParameterError("argmax: empty row");
  std::size_t best = 0;
  for (std::size_t a = 1; a < row.size(); ++a)
    if (row[a] > row[best]) best = a;
  return best;
}

inline DeterministicPolicy greedy_policy(const StateActionTable& q) {
  DeterministicPolicy policy(q.states());
  for (std::size_t s = 0; s < q.states(); ++s) policy[s] = argmax(q.row(s));
  return policy;
}

inline PolicyTable policy_table(const DeterministicPolicy& policy, std::size_t n_actions) {
  PolicyTable table(policy.size(), n_actions, 0.0);
  for (std::size_t s = 0; s < policy.size(); ++s) {
    if (policy[s] >= n_actions) throw ValidationError("policy_table: action out of range");
    table(s, policy[s]) = 1.0;
  }
  return table;
}

inline void validate_policy(const TabularMdp& mdp, const PolicyTable& policy) {
  if (policy.states() != mdp.n_states() || policy.actions() != mdp.n_actions()) {
    throw ValidationError("policy table shape does not match the MDP");
  }
  for (std::size_t s = 0; s < policy.states(); ++s) {
    double sum = 0.0;
    for (double p : policy.row(s)) {
      if (!(p >= 0.0)) throw ValidationError("policy row " + std::to_string(s) + " has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("policy row " + std::to_string(s) + " does not sum to 1");
  }
}

/// Exact V^pi by solving (I - gamma P_pi) V = R_pi.
inline std::vector<double> evaluate_policy(const TabularMdp& mdp, const PolicyTable& policy) {
  validate_policy(mdp, policy);
  const auto n = static_cast<Eigen::Index>(mdp.n_states());
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const double pa = policy(s, a);
      if (pa == 0.0) continue;
      rhs(row) += pa * mdp.reward(s, a);
      const auto next = mdp.next_state_probs(s, a);
      for (std::size_t s2 = 0; s2 < mdp.n_states(); ++s2) {
        system(row, static_cast<Eigen::Index>(s2)) -= mdp.discount() * pa * next[s2];
      }
    }
  }
  Eigen::VectorXd v = system.partialPivLu().solve(rhs);
  return {v.data(), v.data() + v.size()};
}

inline std::vector<double> evaluate_policy(const TabularMdp& mdp, const DeterministicPolicy& policy) {
  return evaluate_policy(mdp, policy_table(policy, mdp.n_actions()));
}

/// p_t(s) for t = 0..horizon by forward propagation from the initial state.
inline std::vector<std::vector<double>> exact_state_distribution(const TabularMdp& mdp, const PolicyTable& policy,
                                                                 std::size_t horizon) {
  validate_policy(mdp, policy);
  std::vector<std::vector<double>> dist;
  dist.reserve(horizon + 1);
  std::vector<double> p(mdp.n_states(), 0.0);
  p[mdp.initial_state()] = 1.0;
  dist.push_back(p);
  for (std::size_t t = 0; t < horizon; ++t) {
    std::vector<double> next(mdp.n_states(), 0.0);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      if (p[s] == 0.0) continue;
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        const double w = p[s] * policy(s, a);
        if (w == 0.0) continue;
        const auto row = mdp.next_state_probs(s, a);
        for (std::size_t s2 = 0; s2 < mdp.n_states(); ++s2) next[s2] += w * row[s2];
      }
    }
    p = std::move(next);
    dist.push_back(p);
  }
  return dist;
}

/// Random MDP with dense transition rows and rewards in [-1, 1].
inline TabularMdp random_mdp(Rng& rng, std::size_t n_states, std::size_t n_actions, double discount,
                             std::set<std::size_t> terminal_states = {}) {
  std::vector<double> probs(n_states * n_actions * n_states);
  std::vector<double> rewards(n_states * n_actions);
  for (std::size_t sa = 0; sa < n_states * n_actions; ++sa) {
    double sum = 0.0;
    for (std::size_t s2 = 0; s2 < n_states; ++s2) {
      const double w = -std::log(1.0 - uniform01(rng));
      probs[sa * n_states + s2] = w;
      sum += w;
    }
    for (std::size_t s2 = 0; s2 < n_states; ++s2) probs[sa * n_states + s2] /= sum;
    rewards[sa] = uniform_real(rng, -1.0, 1.0);
  }
  return TabularMdp(n_states, n_actions, std::move(probs), std::move(rewards), 0, discount,
                    std::move(terminal_states));
}

}  // namespace gridrl
