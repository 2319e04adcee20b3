#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "gridrl/core/mdp.hpp"
#include "gridrl/core/random.hpp"

namespace gridrl {

struct EpsilonSchedule {
  enum class Kind { constant, linear_anneal, exponential_decay };

  Kind kind = Kind::constant;
  double start = 1.0;
  double end = 0.1;
  double duration = 1.0;

  static EpsilonSchedule constant(double eps) { return {Kind::constant, eps, eps, 1.0}; }
  static EpsilonSchedule linear(double start, double end, double duration) {
    return {Kind::linear_anneal, start, end, duration};
  }
  static EpsilonSchedule exponential(double start, double end, double duration) {
    return {Kind::exponential_decay, start, end, duration};
  }

  void validate() const {
    if (!(start >= 0.0 && start <= 1.0 && end >= 0.0 && end <= 1.0)) {
      throw ParameterError("EpsilonSchedule: start and end must lie in [0, 1]");
    }
    if (start < end) throw ParameterError("EpsilonSchedule: start must be >= end");
    if (!(duration > 0.0)) throw ParameterError("EpsilonSchedule: duration must be positive");
  }

  double value(double t) const {
    switch (kind) {
      case Kind::constant:
        return start;
      case Kind::linear_anneal: {
        const double frac = std::clamp(t / duration, 0.0, 1.0);
        return start + (end - start) * frac;
      }
      case Kind::exponential_decay: {
        // tau = duration / 5 puts value(duration) within 1% of the gap from `end`.
        const double tau = duration / 5.0;
        return end + (start - end) * std::exp(-std::max(t, 0.0) / tau);
      }
    }
    return start;
  }
};

/// Uniform action with probability epsilon, otherwise argmax (lowest index on ties).
inline std::size_t epsilon_greedy_action(std::span<const double> q_row, double epsilon, Rng& rng) {
  if (q_row.empty()) throw ParameterError("epsilon_greedy_action: empty Q row");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ParameterError("epsilon_greedy_action: epsilon must lie in [0, 1]");
  if (epsilon > 0.0 && uniform01(rng) < epsilon) return uniform_index(rng, q_row.size());
  return argmax(q_row);
}

}  // namespace gridrl
