#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "gridrl/approx/tensor.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

inline constexpr const char* kPolicyHead = "policy";
inline constexpr const char* kValueHead = "value";

/// Softmax distribution over actions. Log values come from a log-sum-exp of
/// the logits, so they stay finite even where a probability underflows.
struct PolicyOutput {
  std::vector<double> action_probabilities;
  std::vector<double> log_probabilities;

  std::size_t size() const { return action_probabilities.size(); }
};

template <class T>
PolicyOutput policy_output(std::span<const T> logits) {
  if (logits.empty()) throw ShapeError("policy_output: no logits");
  double max = -std::numeric_limits<double>::infinity();
  for (T z : logits) {
    if (!std::isfinite(static_cast<double>(z))) throw ValidationError("policy_output: non-finite logit");
    max = std::max(max, static_cast<double>(z));
  }
  double sum = 0.0;
  for (T z : logits) sum += std::exp(static_cast<double>(z) - max);
  const double log_z = max + std::log(sum);
  PolicyOutput out;
  out.action_probabilities.reserve(logits.size());
  out.log_probabilities.reserve(logits.size());
  for (T z : logits) {
    const double lp = static_cast<double>(z) - log_z;
    out.log_probabilities.push_back(lp);
    out.action_probabilities.push_back(std::exp(lp));
  }
  return out;
}

template <class T>
PolicyOutput policy_output(const Tensor<T>& logits) {
  return policy_output(logits.values());
}

/// Builds a PolicyOutput from explicit probabilities; log 0 is -inf.
inline PolicyOutput policy_from_probabilities(std::vector<double> probs) {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ValidationError("policy_from_probabilities: negative probability");
    sum += p;
  }
  if (probs.empty() || std::abs(sum - 1.0) > 1e-9) throw ValidationError("policy_from_probabilities: not a distribution");
  PolicyOutput out;
  for (double p : probs) out.log_probabilities.push_back(std::log(p));
  out.action_probabilities = std::move(probs);
  return out;
}

inline std::size_t sample_action(const PolicyOutput& pi, Rng& rng) { return sample_discrete(rng, pi.action_probabilities); }

inline std::size_t greedy_action(const PolicyOutput& pi) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < pi.size(); ++a)
    if (pi.action_probabilities[a] > pi.action_probabilities[best]) best = a;
  return best;
}

/// d ln pi(a) / d logits = onehot(a) - pi.
inline std::vector<double> score_at_logits(const PolicyOutput& pi, std::size_t action) {
  std::vector<double> g(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) g[j] = (j == action ? 1.0 : 0.0) - pi.action_probabilities[j];
  return g;
}

struct EntropyTerm {
  double entropy = 0.0;
  /// beta * dH/dlogits; ascending it moves the policy toward uniform.
  std::vector<double> logit_gradient;
};

/// H = -sum pi log pi with 0 log 0 = 0, and dH/dz_j = -pi_j (log pi_j + H).
inline EntropyTerm entropy_regularizer(const PolicyOutput& pi, double beta) {
  EntropyTerm out;
  for (std::size_t j = 0; j < pi.size(); ++j) {
    const double p = pi.action_probabilities[j];
    if (p > 0.0) out.entropy -= p * pi.log_probabilities[j];
  }
  out.logit_gradient.resize(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j) {
    const double p = pi.action_probabilities[j];
    out.logit_gradient[j] = p > 0.0 ? -beta * p * (pi.log_probabilities[j] + out.entropy) : 0.0;
  }
  return out;
}

template <class T>
Tensor<T> to_tensor(const std::vector<double>& v, const Shape& shape) {
  return Tensor<T>(shape, std::vector<T>(v.begin(), v.end()));
}

}  // namespace gridrl
