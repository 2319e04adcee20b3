#pragma once

#include "gridrl/core/mdp.hpp"

namespace gridrl {

enum class TraceMode { accumulating, dutch, replacing };

struct EligibilityTable {
  StateActionTable traces;
  double lambda = 0.0;
  TraceMode mode = TraceMode::accumulating;
  double dutch_scale = 0.5;

  EligibilityTable() = default;
  EligibilityTable(std::size_t states, std::size_t actions, double lambda_, TraceMode mode_,
                   double dutch_scale_ = 0.5)
      : traces(states, actions, 0.0), lambda(lambda_), mode(mode_), dutch_scale(dutch_scale_) {
    if (!(lambda_ >= 0.0 && lambda_ <= 1.0)) throw ParameterError("EligibilityTable: lambda must lie in [0, 1]");
    if (!(dutch_scale_ > 0.0 && dutch_scale_ < 1.0)) {
      throw ParameterError("EligibilityTable: dutch_scale must lie in (0, 1)");
    }
  }

  double operator()(std::size_t s, std::size_t a) const { return traces(s, a); }
  void clear() { std::fill(traces.values().begin(), traces.values().end(), 0.0); }
};

/// Decays every trace by discount*lambda, then marks the visited pair.
inline EligibilityTable& trace_step(EligibilityTable& e, std::size_t s, std::size_t a, double discount) {
  const double decay = discount * e.lambda;
  for (double& v : e.traces.values()) v *= decay;
  double& visited = e.traces(s, a);
  switch (e.mode) {
    case TraceMode::replacing:
      visited = 1.0;
      break;
    case TraceMode::accumulating:
      visited += 1.0;
      break;
    case TraceMode::dutch:
      visited = e.dutch_scale * (visited + 1.0);
      break;
  }
  return e;
}

}  // namespace gridrl
