#pragma once

#include <span>
#include <vector>

#include "gridrl/core/errors.hpp"

namespace gridrl {

/// R_t = r_t + discount * R_{t+1}, seeded with R_n = bootstrap (0 when the
/// segment ended in a terminal state).
inline std::vector<double> nstep_returns(std::span<const double> rewards, double bootstrap, double discount,
                                         bool terminal) {
  if (!(discount >= 0.0 && discount <= 1.0)) throw ParameterError("nstep_returns: discount must lie in [0, 1]");
  std::vector<double> out(rewards.size());
  double r = terminal ? 0.0 : bootstrap;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    r = rewards[t] + discount * r;
    out[t] = r;
  }
  return out;
}

}  // namespace gridrl
